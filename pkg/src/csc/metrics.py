"""Stripe sparsity measures and the stability theorems as checkable predicates.

Bound functions return ``None`` instead of raising when their hypothesis
fails, so mixed populations of trials can be tabulated side by side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conv_model import (ConvOperator, extract_patches, materialize_global,
                         mutual_coherence, stripe_index)
from .errors import DimensionMismatch, RankDeficient, TooLarge
from .io import dumps_keyvalue, format_float

ZERO_TOL = 1e-10
MAX_SUPPORTS = 10 ** 7
MAX_ERC_SUPPORT = 4096


@dataclass(frozen=True)
class SupportSet:
    """Sorted, unique coefficient indices in ``[0, N*m)`` plus model dims."""

    indices: tuple
    n: int
    m: int
    N: int

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.intp))
        if idx.size and (idx[0] < 0 or idx[-1] >= self.N * self.m):
            raise DimensionMismatch(f"support index outside [0, {self.N * self.m})")
        object.__setattr__(self, "indices", tuple(int(i) for i in idx))

    @classmethod
    def of(cls, op: ConvOperator, indices):
        return cls(tuple(indices), op.n, op.m, op.N)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def array(self):
        return np.asarray(self.indices, dtype=np.intp)

    def complement(self):
        mask = np.ones(self.N * self.m, dtype=bool)
        mask[self.array()] = False
        return np.flatnonzero(mask)

    def indicator(self):
        out = np.zeros(self.N * self.m)
        out[self.array()] = 1.0
        return out


# -- sparsity ---------------------------------------------------------------

def l0_norm(code, tol: float = ZERO_TOL) -> int:
    if tol < 0:
        raise ValueError("tol must be >= 0")
    return int(np.count_nonzero(np.abs(np.asarray(code)) > tol))


def _stripe_members(N, n):
    """Distinct block positions of every stripe (a stripe wraps onto itself when N < 2n-1)."""
    sidx = stripe_index(N, n)
    if 2 * n - 1 <= N:
        return sidx
    return [np.unique(row) for row in sidx]


def stripe_counts(code, n: int, m: int, tol: float = ZERO_TOL):
    """Non-zero count of every stripe ``gamma_i``, each coefficient counted once."""
    code = np.asarray(code)
    if code.ndim != 1 or code.size % m:
        raise DimensionMismatch(f"code length {code.shape} is not a multiple of m={m}")
    per_block = np.count_nonzero(np.abs(code.reshape(-1, m)) > tol, axis=1)
    members = _stripe_members(per_block.size, n)
    if isinstance(members, np.ndarray):
        return per_block[members].sum(axis=1)
    return np.array([per_block[row].sum() for row in members], dtype=np.int64)


def l0_inf_norm(code, n: int, m: int, tol: float = ZERO_TOL) -> int:
    """Max over stripes of the stripe l0 count."""
    counts = stripe_counts(code, n, m, tol)
    return int(counts.max()) if counts.size else 0


def support_l0_inf(support: SupportSet) -> int:
    return l0_inf_norm(support.indicator(), support.n, support.m, tol=0.0)


# -- SRIP / Gram eigenvalues ---------------------------------------------------

def srip_bound(mu: float, k: int) -> float:
    """Coherence upper bound ``(k-1) mu`` on the SRIP constant."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return (k - 1) * mu


def gram_eigen_bounds(mu: float, k: int):
    """Gershgorin enclosure ``(1-(k-1)mu, 1+(k-1)mu)`` of the restricted Gram spectrum."""
    spread = (k - 1) * mu
    return 1.0 - spread, 1.0 + spread


def enumerate_supports(N: int, n: int, m: int, k: int, exact: bool = True,
                       limit: int = MAX_SUPPORTS):
    """Yield every non-empty support whose stripe l0 count is at most ``k``.

    With ``exact`` only supports with l0,inf exactly ``k`` are yielded.
    Backtracks over coefficient indices, pruning as soon as a stripe
    overflows.  Raises :class:`TooLarge` after ``limit`` candidates.
    """
    total = N * m
    # stripes containing block p
    sidx = stripe_index(N, n)
    owners = [np.unique(np.argwhere(sidx == p)[:, 0]) for p in range(N)]
    counts = np.zeros(N, dtype=np.int64)
    chosen = []
    produced = 0

    def rec(start):
        nonlocal produced
        for idx in range(start, total):
            own = owners[idx // m]
            np.add.at(counts, own, 1)
            if counts[own].max() <= k:
                chosen.append(idx)
                if not exact or counts.max() == k:
                    produced += 1
                    if produced > limit:
                        raise TooLarge(f"more than {limit} candidate supports")
                    yield tuple(chosen)
                yield from rec(idx + 1)
                chosen.pop()
            np.subtract.at(counts, own, 1)

    yield from rec(0)


def srip_exact(op: ConvOperator, k: int, limit: int = MAX_SUPPORTS) -> float:
    """Brute-force SRIP constant over all supports with l0,inf equal to ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    D = materialize_global(op)
    delta = 0.0
    for supp in enumerate_supports(op.N, op.n, op.m, k, exact=True, limit=limit):
        cols = D[:, supp]
        eig = np.linalg.eigvalsh(cols.T @ cols)
        delta = max(delta, 1.0 - eig[0], eig[-1] - 1.0)
    return float(delta)


# -- theorem predicates --------------------------------------------------------

def _inv(mu):
    return math.inf if mu == 0 else 1.0 / mu


def coherence_threshold(mu: float) -> float:
    """``(1 + 1/mu) / 2``."""
    return 0.5 * (1.0 + _inv(mu))


def stability_bound_p0inf(eps: float, mu: float, k: int):
    """``4 eps^2 / (1 - (2k-1) mu)`` if ``k < (1 + 1/mu)/2``, else ``None``."""
    if not k < coherence_threshold(mu):
        return None
    return 4.0 * eps ** 2 / (1.0 - (2 * k - 1) * mu)


def stability_bound_srip(eps: float, delta_2k: float):
    """Tighter form ``4 eps^2 / (1 - delta_2k)``; ``None`` when ``delta_2k >= 1``."""
    if delta_2k >= 1.0:
        return None
    return 4.0 * eps ** 2 / (1.0 - delta_2k)


def omp_phase_threshold(mu: float, k: int) -> float:
    """Largest admissible ``eps_L / |Gamma_min|`` for OMP at stripe sparsity ``k``."""
    return 0.5 * mu * (1.0 + _inv(mu)) - mu * k if mu > 0 else math.inf


def omp_hypothesis(mu: float, k: int, eps_local: float, gamma_min_abs: float) -> bool:
    """``k < (1 + 1/mu)/2 - (1/mu) eps_L/|Gamma_min|``."""
    if gamma_min_abs <= 0:
        raise ValueError("gamma_min_abs must be positive")
    if mu == 0:
        return True
    return k < coherence_threshold(mu) - (eps_local / gamma_min_abs) / mu


def omp_error_bound(eps: float, mu: float, k: int):
    """Squared-error bound ``eps^2 / (1 - mu (k-1))`` for OMP, or ``None``."""
    denom = 1.0 - mu * (k - 1)
    if denom <= 0:
        return None
    return eps ** 2 / denom


def erc_coherence_condition(mu: float, k: int) -> bool:
    """ERC holds for every support with ``||T||_0,inf = k < (1 + 1/mu)/2``."""
    if not 0 < mu <= 1:
        raise ValueError("mu must lie in (0, 1]")
    return k < coherence_threshold(mu)


def erc_theta_lower_bound(mu: float, k: int):
    """``1 - k mu / (1 - (k-1) mu)``, valid while ``(k-1) mu < 1``."""
    denom = 1.0 - (k - 1) * mu
    if denom <= 0:
        return None
    return 1.0 - k * mu / denom


def erc_constant(op: ConvOperator, support: SupportSet) -> float:
    """``theta = 1 - max_{i not in T} || pinv(D_T) d_i ||_1``.

    Only atoms overlapping the support are visited; the rest give exactly 0.
    """
    T = support.array()
    if T.size == 0:
        return 1.0
    if T.size > MAX_ERC_SUPPORT:
        raise TooLarge(f"support of size {T.size} exceeds {MAX_ERC_SUPPORT}")
    G = op.gram(T)
    eig = np.linalg.eigvalsh(G)
    if eig[0] <= 1e-20:                  # sigma_min(D_T) <= 1e-10
        raise RankDeficient("restricted dictionary is rank deficient")
    positions = np.unique(T // op.m)
    near = np.unique((positions[:, None] + np.arange(-(op.n - 1), op.n)) % op.N)
    cand = (near[:, None] * op.m + np.arange(op.m)).ravel()
    cand = np.setdiff1d(cand, T)
    if cand.size == 0:
        return 1.0
    coef = np.linalg.solve(G, op.gram(T, cand))
    return float(1.0 - np.abs(coef).sum(axis=0).max())


def bp_threshold(mu: float) -> float:
    """``(1 + 1/mu) / 3``."""
    return (1.0 + _inv(mu)) / 3.0


def bp_hypothesis(mu: float, k: int) -> bool:
    return k < bp_threshold(mu)


def bp_linf_bound(eps_local: float) -> float:
    """l_inf error bound ``15/2 eps_L`` for BP with ``lambda = 4 eps_L``."""
    if eps_local < 0:
        raise ValueError("eps_local must be >= 0")
    return 7.5 * eps_local


def bp_guaranteed_entries(code, eps_local: float):
    """Indices whose magnitude exceeds ``15/2 eps_L`` (must survive in the BP support)."""
    return np.flatnonzero(np.abs(np.asarray(code)) > bp_linf_bound(eps_local))


def local_noise_level(noise, n: int) -> float:
    """Largest l2 energy of any (periodic) length-n patch of ``noise``."""
    noise = np.asarray(noise, dtype=float)
    if n > noise.size:
        raise DimensionMismatch("patch length exceeds signal length")
    return float(np.sqrt((extract_patches(noise, n) ** 2).sum(axis=1).max()))


def ls_fit(op: ConvOperator, y, support):
    """Least-squares code of ``y`` restricted to ``support`` (zero elsewhere)."""
    T = np.asarray(support, dtype=np.intp)
    code = np.zeros(op.N * op.m)
    if T.size:
        rhs = op.adjoint(y)[T]
        code[T] = np.linalg.solve(op.gram(T), rhs)
    return code


# -- reports ---------------------------------------------------------------

CSV_COLUMNS = ("N", "n", "m", "l0", "l0_inf", "mu", "eps", "eps_L", "gamma_min",
               "omp_hyp", "omp_bound", "bp_hyp", "bp_linf_bound", "p0inf_bound")


@dataclass(frozen=True)
class TheoremCheck:
    hypothesis_holds: bool
    bound_value: float | None = None

    def __post_init__(self):
        if self.hypothesis_holds != (self.bound_value is not None):
            raise ValueError("bound_value must be present iff the hypothesis holds")


@dataclass(frozen=True)
class BoundReport:
    N: int
    n: int
    m: int
    l0: int
    l0_inf: int
    mu: float
    eps_global: float
    eps_local: float
    gamma_min_abs: float | None
    p0inf: TheoremCheck
    omp: TheoremCheck
    bp: TheoremCheck
    extras: dict = field(default_factory=dict)

    def row(self):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return str(int(v))
            if isinstance(v, float):
                return format_float(v)
            return str(v)

        values = (self.N, self.n, self.m, self.l0, self.l0_inf, self.mu, self.eps_global,
                  self.eps_local, self.gamma_min_abs, self.omp.hypothesis_holds,
                  self.omp.bound_value, self.bp.hypothesis_holds, self.bp.bound_value,
                  self.p0inf.bound_value)
        return [fmt(v) for v in values]

    def to_csv_row(self) -> str:
        return ",".join(self.row())

    def to_keyvalue(self) -> str:
        return dumps_keyvalue(zip(CSV_COLUMNS, self.row()))


def bound_report(op: ConvOperator, code, noise, mu: float | None = None,
                 tol: float = ZERO_TOL) -> BoundReport:
    """Evaluate every theorem hypothesis and bound for ``(D, Gamma, E)``."""
    code = np.asarray(code, dtype=float)
    mu = mutual_coherence(op) if mu is None else float(mu)
    eps = float(np.linalg.norm(noise))
    eps_l = local_noise_level(noise, op.n)
    nz = np.abs(code[np.abs(code) > tol])
    gmin = float(nz.min()) if nz.size else None
    k = l0_inf_norm(code, op.n, op.m, tol)

    p0 = stability_bound_p0inf(eps, mu, k) if k >= 1 else None
    omp_ok = gmin is not None and omp_hypothesis(mu, k, eps_l, gmin)
    omp_val = omp_error_bound(eps, mu, k) if omp_ok else None
    bp_ok = k >= 1 and bp_hypothesis(mu, k)
    return BoundReport(
        N=op.N, n=op.n, m=op.m, l0=l0_norm(code, tol), l0_inf=k, mu=mu,
        eps_global=eps, eps_local=eps_l, gamma_min_abs=gmin,
        p0inf=TheoremCheck(p0 is not None, p0),
        omp=TheoremCheck(omp_val is not None, omp_val),
        bp=TheoremCheck(bp_ok, bp_linf_bound(eps_l) if bp_ok else None),
    )

