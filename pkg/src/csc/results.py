from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PursuitResult:
    """Output of every pursuit in the package.

    ``trace`` holds one dict per iteration (``iter``, ``objective``,
    ``primal_res``, ``dual_res``, ``wall_time``); entries a solver does not
    track are ``nan``.
    """

    code: np.ndarray
    support: np.ndarray
    residual_norms: list
    iterations: int
    wall_time: float
    converged: bool
    objective: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    reselections: int = 0
    lam: float | None = None
    extras: dict = field(default_factory=dict)
