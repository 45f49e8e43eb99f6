"""Global Orthogonal Matching Pursuit over the implicit convolutional dictionary."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .conv_model import ConvOperator, mutual_coherence
from .errors import RankDeficient, StoppingNotReached
from .io import format_float
from .metrics import coherence_threshold, omp_error_bound, omp_hypothesis, omp_phase_threshold
from .results import PursuitResult
from .signals import SignalSpec, generate_instance


@dataclass(frozen=True)
class OmpConfig:
    """Exactly one of ``n_nonzero`` (fixed iterations) or ``eps`` (residual rule)."""

    n_nonzero: int | None = None
    eps: float | None = None
    max_iterations: int | None = None
    ls_tolerance: float = 1e-12

    def __post_init__(self):
        if (self.n_nonzero is None) == (self.eps is None):
            raise ValueError("give exactly one of n_nonzero or eps")
        if self.n_nonzero is not None and self.n_nonzero < 0:
            raise ValueError("n_nonzero must be >= 0")
        if self.eps is not None and self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @classmethod
    def fixed(cls, k, **kw):
        return cls(n_nonzero=int(k), **kw)

    @classmethod
    def residual(cls, eps, **kw):
        return cls(eps=float(eps), **kw)


def omp(op: ConvOperator, Y, cfg: OmpConfig) -> PursuitResult:
    """Orthogonal Matching Pursuit.

    Each iteration picks the atom most correlated with the residual (lowest
    index on ties), extends a Cholesky factor of the restricted Gram built
    from overlapping-atom inner products, and refits ``Y`` on the support.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (op.N,) or not np.all(np.isfinite(Y)):
        raise ValueError(f"Y must be a finite vector of length {op.N}")
    start = time.perf_counter()
    total = op.N * op.m
    if cfg.n_nonzero is not None:
        target = min(cfg.n_nonzero, total)
        cap = target if cfg.max_iterations is None else min(target, cfg.max_iterations)
    else:
        cap = total if cfg.max_iterations is None else min(cfg.max_iterations, total)

    rhs_all = op.adjoint(Y)
    selected = np.zeros(total, dtype=bool)
    supp = []
    L = np.zeros((0, 0))
    coef = np.zeros(0)
    residual = Y.copy()
    norms = [float(np.linalg.norm(residual))]
    trace = []
    reselections = 0
    code = np.zeros(total)

    def done():
        if cfg.n_nonzero is not None:
            return len(supp) >= target
        return norms[-1] <= cfg.eps

    while not done() and len(supp) < cap:
        corr = np.abs(op.adjoint(residual))
        best = int(np.argmax(corr))
        if selected[best]:
            reselections += 1
            corr[selected] = -np.inf
            best = int(np.argmax(corr))
        if corr[best] == 0.0:
            break                        # residual orthogonal to every atom

        g = op.gram(supp, [best]).ravel() if supp else np.zeros(0)
        w = solve_triangular(L, g, lower=True) if supp else g
        diag = 1.0 - w @ w               # unit atoms: <d, d> = 1
        if diag < cfg.ls_tolerance:
            raise RankDeficient(f"restricted Gram singular when adding atom {best}")
        k = len(supp)
        L_new = np.zeros((k + 1, k + 1))
        L_new[:k, :k] = L
        L_new[k, :k] = w
        L_new[k, k] = np.sqrt(diag)
        L = L_new
        supp.append(best)
        selected[best] = True

        z = solve_triangular(L, rhs_all[supp], lower=True)
        coef = solve_triangular(L.T, z, lower=False)
        code[:] = 0.0
        code[supp] = coef
        residual = Y - op.apply(code)
        norms.append(float(np.linalg.norm(residual)))
        trace.append({"iter": len(supp), "objective": 0.5 * norms[-1] ** 2,
                      "primal_res": norms[-1], "dual_res": float("nan"),
                      "wall_time": time.perf_counter() - start})

    converged = done()
    if not converged and cfg.eps is not None:
        warnings.warn("OMP stopped before the residual fell below eps", StoppingNotReached)
    return PursuitResult(
        code=code, support=np.array(sorted(supp), dtype=np.intp), residual_norms=norms,
        iterations=len(supp), wall_time=time.perf_counter() - start, converged=converged,
        objective=[0.5 * r ** 2 for r in norms], trace=trace, reselections=reselections,
    )


# -- batch experiment ------------------------------------------------------------

BATCH_COLUMNS = ("trial", "l0", "l0_inf", "gamma_min", "eps_L", "distance_l2", "success")


def omp_trial(op: ConvOperator, spec: SignalSpec, trial: int, mu: float | None = None) -> dict:
    """One planted-signal OMP run with a fixed budget of ``||Gamma||_0`` iterations.

    Besides the batch columns the row carries the squared distance, the
    coherence-only and full hypothesis flags, the squared-error bound and the
    phase-line value used by the support-recovery plot.
    """
    mu = mutual_coherence(op) if mu is None else mu
    inst = generate_instance(op, spec, trial)
    res = omp(op, inst.y, OmpConfig.fixed(inst.l0))
    k = inst.l0_inf
    dist_sq = float(np.sum((res.code - inst.gamma) ** 2))
    ratio = inst.eps_local / inst.gamma_min if inst.gamma_min else None
    coherence_ok = k < coherence_threshold(mu)
    line = omp_phase_threshold(mu, k)
    return {
        "trial": trial, "l0": inst.l0, "l0_inf": k, "gamma_min": inst.gamma_min,
        "eps_L": inst.eps_local, "distance_l2": float(np.sqrt(dist_sq)),
        "success": bool(np.array_equal(res.support, np.flatnonzero(inst.gamma))),
        "eps": inst.eps, "amplitude_scale": inst.amplitude_scale, "distance_sq": dist_sq,
        "coherence_hyp": coherence_ok,
        "coherence_bound": omp_error_bound(inst.eps, mu, k) if coherence_ok else None,
        "full_hyp": bool(inst.gamma_min and omp_hypothesis(mu, k, inst.eps_local, inst.gamma_min)),
        "ratio": ratio, "phase_line": line, "below_line": ratio is not None and ratio < line,
        "reselections": res.reselections, "code": res.code, "instance": inst,
    }


def omp_batch_experiment(op: ConvOperator, trials: int, cardinality_range=(1, 500),
                         amplitude_range=(0.1, 100.0), noise_norm: float = 0.1,
                         seed: int = 0) -> list:
    """Rows of :func:`omp_trial` for ``trials`` planted signals.

    Amplitudes are uniform on ``[-a, a]`` with ``a`` log-uniform over
    ``amplitude_range``; noise is Gaussian rescaled to ``noise_norm``.  A
    failing trial yields a row holding only ``trial`` and ``error``.
    """
    spec = SignalSpec(seed=seed, cardinality=tuple(cardinality_range), amplitude="uniform",
                      scale=tuple(float(a) for a in amplitude_range),
                      noise="norm" if noise_norm > 0 else "none", noise_level=noise_norm)
    mu = mutual_coherence(op)
    rows = []
    for t in range(trials):
        try:
            row = omp_trial(op, spec, t, mu)
            row.pop("code"), row.pop("instance")
            rows.append(row)
        except (ArithmeticError, ValueError) as exc:
            rows.append({"trial": t, "error": f"{type(exc).__name__}: {exc}"})
    return rows


def rows_to_csv(rows, columns=BATCH_COLUMNS) -> str:
    """CSV text of ``rows`` restricted to ``columns`` (missing cells left empty)."""
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, (bool, np.bool_)):
            return str(int(v))
        if isinstance(v, float):
            return format_float(v)
        return str(v)

    lines = [",".join(columns)]
    lines += [",".join(cell(r.get(c)) for c in columns) for r in rows]
    return "\n".join(lines) + "\n"
