"""Synthetic sparse signals, noise and the derived scalars (eps, eps_L, |Gamma_min|).

Random streams come from numpy's Philox4x64 counter-based bit generator.
Trial ``t`` of a spec with seed ``s`` uses the 128-bit key ``s + (t << 64)``,
so any trial can be regenerated in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy.optimize import minimize

from .conv_model import ConvOperator, LocalDictionary, normalize_local_dictionary
from .errors import SpecInvalid
from .io import dumps_keyvalue, loads_keyvalue
from .metrics import l0_inf_norm, l0_norm, local_noise_level

RNG_NAME = "philox4x64-10/v1"


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent stream for ``(seed, trial)``."""
    if not 0 <= seed < 2 ** 64 or not 0 <= trial < 2 ** 64:
        raise SpecInvalid("seed and trial must be unsigned 64-bit integers")
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(trial) << 64)))


@dataclass(frozen=True)
class SignalSpec:
    """Recipe for one family of synthetic instances.

    ``cardinality`` is an int or an inclusive ``(lo, hi)`` range sampled
    uniformly.  ``amplitude="uniform"`` draws entries from ``[-a, a]``; a
    ``(lo, hi)`` pair for ``scale`` then draws ``a`` log-uniformly per trial.
    ``amplitude="band"`` draws magnitudes from ``[lo, hi]`` with random signs.
    ``noise`` is ``"none"``, ``"norm"`` (Gaussian rescaled to exactly
    ``noise_level`` in l2) or ``"sigma"`` (i.i.d. Gaussian, std ``noise_level``).
    """

    seed: int = 0
    cardinality: int | tuple = 1
    amplitude: str = "uniform"
    scale: float | tuple = 1.0
    noise: str = "none"
    noise_level: float = 0.0

    def validate(self, total: int | None = None):
        lo, hi = self.cardinality_range
        if lo < 0 or hi < lo:
            raise SpecInvalid(f"bad cardinality {self.cardinality}")
        if total is not None and hi > total:
            raise SpecInvalid(f"cardinality {hi} exceeds N*m={total}")
        if self.amplitude == "uniform":
            a = self.scale if isinstance(self.scale, tuple) else (self.scale, self.scale)
            if min(a) <= 0 or a[1] < a[0]:
                raise SpecInvalid("uniform amplitude needs a > 0")
        elif self.amplitude == "band":
            if not isinstance(self.scale, tuple) or not 0 < self.scale[0] < self.scale[1]:
                raise SpecInvalid("band amplitude needs 0 < lo < hi")
        else:
            raise SpecInvalid(f"unknown amplitude law {self.amplitude!r}")
        if self.noise not in ("none", "norm", "sigma"):
            raise SpecInvalid(f"unknown noise rule {self.noise!r}")
        if self.noise_level < 0:
            raise SpecInvalid("noise_level must be >= 0")
        return self

    @property
    def cardinality_range(self):
        if isinstance(self.cardinality, tuple):
            return int(self.cardinality[0]), int(self.cardinality[1])
        return int(self.cardinality), int(self.cardinality)

    def to_keyvalue(self) -> str:
        def join(v):
            return ",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in v) \
                if isinstance(v, tuple) else v
        return dumps_keyvalue({
            "seed": self.seed, "cardinality": join(self.cardinality),
            "amplitude": self.amplitude, "scale": join(self.scale),
            "noise": self.noise, "noise_level": self.noise_level, "rng": RNG_NAME,
        })

    @classmethod
    def from_keyvalue(cls, text):
        kv = loads_keyvalue(text) if isinstance(text, str) else dict(text)
        return cls.from_mapping(kv)

    @classmethod
    def from_mapping(cls, kv):
        def parse(v, cast):
            parts = [cast(p) for p in str(v).split(",")]
            return tuple(parts) if len(parts) > 1 else parts[0]

        return cls(
            seed=int(kv.get("seed", 0)),
            cardinality=parse(kv.get("cardinality", 1), int),
            amplitude=kv.get("amplitude", "uniform"),
            scale=parse(kv.get("scale", 1.0), float),
            noise=kv.get("noise", "none"),
            noise_level=float(kv.get("noise_level", 0.0) or 0.0),
        )


@dataclass(frozen=True)
class Instance:
    gamma: np.ndarray
    x: np.ndarray
    e: np.ndarray
    y: np.ndarray
    eps: float
    eps_local: float
    gamma_min: float | None
    l0: int
    l0_inf: int
    amplitude_scale: float
    trial: int


def generate_instance(op: ConvOperator, spec: SignalSpec, trial: int = 0) -> Instance:
    """Draw ``(Gamma, X, E, Y)`` for ``trial``; deterministic given ``(spec.seed, trial)``."""
    total = op.N * op.m
    spec.validate(total)
    rng = trial_rng(spec.seed, trial)
    lo, hi = spec.cardinality_range
    k = int(rng.integers(lo, hi + 1))
    supp = np.sort(rng.choice(total, size=k, replace=False)) if k else np.zeros(0, dtype=int)

    if spec.amplitude == "uniform":
        if isinstance(spec.scale, tuple):
            a_lo, a_hi = spec.scale
            a = math.exp(rng.uniform(math.log(a_lo), math.log(a_hi)))
        else:
            a = float(spec.scale)
        vals = rng.uniform(-a, a, size=k)
    else:
        a = float(spec.scale[1])
        vals = rng.uniform(spec.scale[0], spec.scale[1], size=k) * rng.choice([-1.0, 1.0], size=k)

    gamma = np.zeros(total)
    gamma[supp] = vals
    x = op.apply(gamma)

    if spec.noise == "norm":
        e = rng.standard_normal(op.N)
        norm = np.linalg.norm(e)
        e = e * (spec.noise_level / norm) if norm > 0 else e
    elif spec.noise == "sigma":
        e = spec.noise_level * rng.standard_normal(op.N)
    else:
        e = np.zeros(op.N)

    nz = np.abs(vals[vals != 0])
    return Instance(
        gamma=gamma, x=x, e=e, y=x + e,
        eps=float(np.linalg.norm(e)), eps_local=local_noise_level(e, op.n),
        gamma_min=float(nz.min()) if nz.size else None,
        l0=l0_norm(gamma, 0.0), l0_inf=l0_inf_norm(gamma, op.n, op.m, 0.0),
        amplitude_scale=a, trial=trial,
    )


def dct_local_dictionary(n: int = 25, m: int = 5) -> LocalDictionary:
    """First ``m`` orthonormal DCT-II basis vectors of length ``n`` as atoms."""
    if not 1 <= m <= n:
        raise SpecInvalid("need 1 <= m <= n")
    basis = scipy.fft.dct(np.eye(n), type=2, norm="ortho", axis=0)   # row k = k-th basis vector
    return normalize_local_dictionary(basis[:m].T)[0]


# -- low-coherence dictionary generator ----------------------------------------

def _shift_mats(a):
    n = a.size
    fwd = np.zeros((n, 2 * n - 1))
    back = np.zeros((n, 2 * n - 1))
    for s in range(-(n - 1), n):
        t = np.arange(n)
        ok = (t + s >= 0) & (t + s < n)
        fwd[t[ok], s + n - 1] = a[t[ok] + s]
        ok = (t - s >= 0) & (t - s < n)
        back[t[ok], s + n - 1] = a[t[ok] - s]
    return fwd, back


def _correlations(A):
    n, m = A.shape
    C = np.empty((m, m, 2 * n - 1))
    for j in range(m):
        for k in range(m):
            C[j, k] = np.correlate(A[:, k], A[:, j], "full")
        C[j, j, n - 1] = 0.0
    return C


def _pnorm_objective(v, n, m, p):
    V = v.reshape(n, m)
    norms = np.linalg.norm(V, axis=0)
    A = V / norms
    C = _correlations(A)
    total = np.sum(np.abs(C) ** p)
    value = total ** (1.0 / p)
    G = total ** (1.0 / p - 1.0) * np.abs(C) ** (p - 1) * np.sign(C)
    mats = [_shift_mats(A[:, k]) for k in range(m)]
    gA = np.zeros((n, m))
    for j in range(m):
        for k in range(m):
            gA[:, j] += mats[k][0] @ G[j, k]
            gA[:, k] += mats[j][1] @ G[j, k]
    gV = (gA - A * np.sum(A * gA, axis=0)) / norms
    return value, gV.ravel()


def _aperiodic_coherence(A):
    return float(np.abs(_correlations(A)).max())


def generate_low_coherence_dictionary(n: int = 64, m: int = 2, band=(0.085, 0.095),
                                      target: float = 0.09, seed: int = 0,
                                      max_restarts: int = 20) -> LocalDictionary:
    """Random local dictionary whose global coherence lands in ``band``.

    Starts from i.i.d. Gaussian atoms and lowers the largest shifted
    correlation with L-BFGS on a growing p-norm, stopping as soon as the
    coherence drops to ``target``.  Draws that overshoot ``band`` are
    discarded and redrawn.
    """
    lo, hi = band
    if not lo <= target <= hi:
        raise SpecInvalid("target must lie inside band")
    for restart in range(max_restarts):
        rng = trial_rng(seed, restart)
        v = rng.standard_normal(n * m)

        class _Hit(Exception):
            pass

        def check(xk):
            V = xk.reshape(n, m)
            if _aperiodic_coherence(V / np.linalg.norm(V, axis=0)) <= target:
                raise _Hit(xk.copy())

        try:
            for p in (4, 8, 16, 32, 64):
                res = minimize(_pnorm_objective, v, args=(n, m, p), jac=True,
                               method="L-BFGS-B", callback=check, options={"maxiter": 2000})
                v = res.x
                check(v)
        except _Hit as hit:
            v = hit.args[0]
        V = v.reshape(n, m)
        local = normalize_local_dictionary(V)[0]
        mu = _aperiodic_coherence(local.atoms)
        if lo <= mu <= hi:
            return local
    raise SpecInvalid(f"no dictionary with coherence in {band} after {max_restarts} draws")


def experiment_dictionary() -> LocalDictionary:
    """The pinned 64 x 2 low-coherence dictionary shipped with the package."""
    from importlib.resources import files

    from .io import loads_dictionary

    text = files("csc.data").joinpath("dict_n64_m2_v1.convdict").read_text()
    return LocalDictionary(loads_dictionary(text))
