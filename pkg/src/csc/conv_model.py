"""Convolutional dictionary model with periodic boundary.

The global dictionary ``D`` (``N x N*m``) holds every cyclic shift of the
``m`` local atoms of length ``n``.  Codes use a position-major layout:
coefficient ``i*m + j`` multiplies local atom ``j`` placed at shift ``i``.
Everything here works on the implicit operator; :func:`materialize_global`
is the only place a dense ``D`` is ever built.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (DimensionMismatch, IndexOutOfRange, NoConvergence,
                     TooLarge, ZeroAtom)

__all__ = [
    "LocalDictionary", "ConvOperator", "StripeDictionary",
    "normalize_local_dictionary", "materialize_global", "apply", "adjoint",
    "extract_patch", "patch_adjoint", "extract_patches", "aggregate_patches",
    "extract_block", "extract_stripe", "stripe_adjoint", "extract_stripes",
    "aggregate_stripes", "extract_center", "build_stripe_dictionary",
    "mutual_coherence", "largest_singular_value", "support",
]

UNIT_NORM_TOL = 1e-12
ZERO_ATOM_TOL = 1e-14
MAX_COLUMNS = 2 ** 22
MAX_ENTRIES = 2 ** 27


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LocalDictionary:
    """The ``n x m`` matrix of unit-norm local atoms (one atom per column)."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.ndim != 2 or atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise DimensionMismatch(f"atoms must be a non-empty n x m matrix, got {atoms.shape}")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms contain non-finite entries")
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValueError("atoms must have unit l2 norm; use normalize_local_dictionary")
        object.__setattr__(self, "atoms", _readonly(atoms))

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def m(self) -> int:
        return self.atoms.shape[1]


def normalize_local_dictionary(raw):
    """Scale every column of ``raw`` to unit norm.

    Returns ``(LocalDictionary, factors)`` where ``raw[:, j] == factors[j] *
    atoms[:, j]``.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    if raw.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw dictionary contains non-finite entries")
    factors = np.linalg.norm(raw, axis=0)
    bad = np.flatnonzero(factors < ZERO_ATOM_TOL)
    if bad.size:
        raise ZeroAtom(f"atom(s) {bad.tolist()} have (near) zero norm")
    atoms = raw / factors
    # one extra pass absorbs the rounding of the first division
    atoms /= np.linalg.norm(atoms, axis=0)
    return LocalDictionary(atoms), factors


@dataclass(frozen=True, eq=False)
class ConvOperator:
    """Implicit ``N x N*m`` convolutional dictionary (periodic boundary)."""

    local: LocalDictionary
    N: int
    boundary: str = field(default="periodic", init=False)

    def __post_init__(self):
        if not isinstance(self.local, LocalDictionary):
            object.__setattr__(self, "local", LocalDictionary(self.local))
        N = int(self.N)
        if N < 1 or N < self.local.n:
            raise DimensionMismatch(f"signal length N={N} must be >= patch length n={self.local.n}")
        object.__setattr__(self, "N", N)

    @property
    def n(self) -> int:
        return self.local.n

    @property
    def m(self) -> int:
        return self.local.m

    @property
    def shape(self):
        return (self.N, self.N * self.m)

    @cached_property
    def patch_index(self):
        """``(N, n)`` array: row ``i`` holds the signal positions of patch ``i``."""
        idx = (np.arange(self.N)[:, None] + np.arange(self.n)[None, :]) % self.N
        idx.setflags(write=False)
        return idx

    @cached_property
    def overlap_shifts(self):
        """Shift differences (mod N) at which two atoms can overlap."""
        n, N = self.n, self.N
        return np.unique(np.arange(-(n - 1), n) % N)

    @cached_property
    def overlap_table(self):
        """``table[d, j, k] = <atom(0, j), atom(d, k)>`` for every shift ``d``.

        Only shifts in :attr:`overlap_shifts` are computed; all others are 0.
        """
        N, n, m = self.N, self.n, self.m
        padded = np.zeros((N, m))
        padded[:n] = self.local.atoms
        table = np.zeros((N, m, m))
        for d in self.overlap_shifts:
            table[d] = padded.T @ np.roll(padded, d, axis=0)
        table.setflags(write=False)
        return table

    def gram(self, rows, cols=None):
        """Inner products between the atoms indexed by ``rows`` and ``cols``."""
        rows = np.asarray(rows, dtype=np.intp)
        cols = rows if cols is None else np.asarray(cols, dtype=np.intp)
        pr, jr = np.divmod(rows, self.m)
        pc, jc = np.divmod(cols, self.m)
        d = (pc[None, :] - pr[:, None]) % self.N
        return self.overlap_table[d, jr[:, None], jc[None, :]]

    def atom(self, index):
        """Global atom ``index`` as a length-N vector."""
        p, j = divmod(int(index), self.m)
        out = np.zeros(self.N)
        out[self.patch_index[p]] = self.local.atoms[:, j]
        return out

    def apply(self, code):
        return apply(self, code)

    def adjoint(self, signal):
        return adjoint(self, signal)


def _check_code(op, code):
    code = np.asarray(code, dtype=float)
    if code.shape != (op.N * op.m,):
        raise DimensionMismatch(f"code must have length N*m={op.N * op.m}, got shape {code.shape}")
    return code


def _check_signal(op, signal):
    signal = np.asarray(signal, dtype=float)
    if signal.shape != (op.N,):
        raise DimensionMismatch(f"signal must have length N={op.N}, got shape {signal.shape}")
    return signal


def apply(op: ConvOperator, code):
    """``D @ code``: sum over filters of cyclic convolutions."""
    code = _check_code(op, code)
    contrib = code.reshape(op.N, op.m) @ op.local.atoms.T   # (N, n): atom content per shift
    return np.bincount(op.patch_index.ravel(), weights=contrib.ravel(), minlength=op.N)


def adjoint(op: ConvOperator, signal):
    """``D.T @ signal``: cyclic correlations with every local atom."""
    signal = _check_signal(op, signal)
    return (signal[op.patch_index] @ op.local.atoms).ravel()


def materialize_global(op: ConvOperator):
    """Explicit dense ``D``; column ``i*m + j`` is atom ``j`` at shift ``i``."""
    N, n, m = op.N, op.n, op.m
    if N * m > MAX_COLUMNS or N * N * m > MAX_ENTRIES:
        raise TooLarge(f"refusing to materialize a {N} x {N * m} dictionary")
    D = np.zeros((N, N * m))
    for i in range(N):
        rows = (i + np.arange(n)) % N
        D[rows, i * m:(i + 1) * m] = op.local.atoms
    return D


# -- patches ---------------------------------------------------------------

def _check_index(i, N):
    if not 0 <= i < N:
        raise IndexOutOfRange(f"index {i} outside [0, {N})")
    return int(i)


def extract_patch(signal, i, n):
    """``R_i X``: entries ``i, ..., i+n-1`` of ``signal`` (mod N)."""
    signal = np.asarray(signal, dtype=float)
    N = signal.shape[0]
    i = _check_index(i, N)
    return signal[(i + np.arange(n)) % N]


def patch_adjoint(patch, i, N):
    """``R_i^T p``: scatter a length-n patch back into a length-N signal."""
    patch = np.asarray(patch, dtype=float)
    i = _check_index(i, N)
    out = np.zeros(N)
    np.add.at(out, (i + np.arange(patch.shape[0])) % N, patch)
    return out


def extract_patches(signal, n):
    """All N patches stacked as an ``(N, n)`` array."""
    signal = np.asarray(signal, dtype=float)
    N = signal.shape[0]
    idx = (np.arange(N)[:, None] + np.arange(n)[None, :]) % N
    return signal[idx]


def aggregate_patches(patches):
    """``sum_i R_i^T p_i`` for an ``(N, n)`` stack of patches."""
    patches = np.asarray(patches, dtype=float)
    N, n = patches.shape
    idx = (np.arange(N)[:, None] + np.arange(n)[None, :]) % N
    return np.bincount(idx.ravel(), weights=patches.ravel(), minlength=N)


# -- stripes ---------------------------------------------------------------

def _blocks(code, m):
    code = np.asarray(code, dtype=float)
    if code.ndim != 1 or code.shape[0] % m:
        raise DimensionMismatch(f"code length {code.shape} is not a multiple of m={m}")
    return code.reshape(-1, m)


def extract_block(code, i, m):
    """``P_i Gamma``: the m coefficients at shift ``i`` (the local code alpha_i)."""
    blocks = _blocks(code, m)
    return blocks[_check_index(i, blocks.shape[0])].copy()


def _stripe_positions(i, n, N):
    return (i + np.arange(-(n - 1), n)) % N


def extract_stripe(code, i, n, m):
    """``S_i Gamma``: blocks at shifts ``i-n+1 .. i+n-1`` (mod N), concatenated."""
    blocks = _blocks(code, m)
    i = _check_index(i, blocks.shape[0])
    return blocks[_stripe_positions(i, n, blocks.shape[0])].ravel()


def stripe_adjoint(stripe, i, n, m, N):
    """``S_i^T gamma``: scatter a stripe back into a length ``N*m`` code."""
    stripe = np.asarray(stripe, dtype=float)
    if stripe.shape != ((2 * n - 1) * m,):
        raise DimensionMismatch(f"stripe must have length (2n-1)m={(2 * n - 1) * m}")
    i = _check_index(i, N)
    out = np.zeros((N, m))
    np.add.at(out, _stripe_positions(i, n, N), stripe.reshape(2 * n - 1, m))
    return out.ravel()


def stripe_index(N, n):
    """``(N, 2n-1)`` array of block positions making up each stripe."""
    return (np.arange(N)[:, None] + np.arange(-(n - 1), n)[None, :]) % N


def extract_stripes(code, n, m):
    """All N stripes stacked as an ``(N, (2n-1)m)`` array."""
    blocks = _blocks(code, m)
    N = blocks.shape[0]
    return blocks[stripe_index(N, n)].reshape(N, (2 * n - 1) * m)


def aggregate_stripes(stripes, n, m):
    """``sum_i S_i^T gamma_i`` for an ``(N, (2n-1)m)`` stack of stripes."""
    stripes = np.asarray(stripes, dtype=float)
    N = stripes.shape[0]
    flat = (stripe_index(N, n)[:, :, None] * m + np.arange(m)).ravel()
    return np.bincount(flat, weights=stripes.ravel(), minlength=N * m)


def extract_center(stripe, m):
    """``Q gamma_i``: the centre m-block of a stripe."""
    stripe = np.asarray(stripe, dtype=float)
    L = stripe.shape[-1]
    if L % m or (L // m) % 2 == 0:
        raise DimensionMismatch(f"stripe length {L} is not (2n-1)*m for m={m}")
    n = (L // m + 1) // 2
    return stripe[..., (n - 1) * m:n * m].copy()


@dataclass(frozen=True, eq=False)
class StripeDictionary:
    """``Omega`` of shape ``n x (2n-1)m`` with ``R_i D Gamma = Omega S_i Gamma``."""

    omega: np.ndarray
    m: int

    @property
    def n(self) -> int:
        return self.omega.shape[0]


def build_stripe_dictionary(local: LocalDictionary) -> StripeDictionary:
    n, m = local.n, local.m
    omega = np.zeros((n, (2 * n - 1) * m))
    for s in range(2 * n - 1):
        offset = s - (n - 1)              # atom start relative to the patch
        for r in range(n):
            t = r - offset
            if 0 <= t < n:
                omega[r, s * m:(s + 1) * m] = local.atoms[t]
    return StripeDictionary(_readonly(omega), m)


# -- dictionary measures ----------------------------------------------------

def mutual_coherence(op: ConvOperator) -> float:
    """Largest |<d_a, d_b>| over distinct global atoms, from overlapping shifts only."""
    table = np.abs(op.overlap_table[op.overlap_shifts])
    zero = np.flatnonzero(op.overlap_shifts == 0)
    if zero.size:
        table = table.copy()
        np.fill_diagonal(table[zero[0]], 0.0)
    return float(table.max()) if table.size else 0.0


def largest_singular_value(op: ConvOperator, tol: float = 1e-6, max_iter: int = 1000,
                           seed: int = 0) -> float:
    """Power iteration on ``D D^T`` until the relative change drops below ``tol``.

    Warns with :class:`NoConvergence` (and returns the last estimate) if the
    iteration cap is hit.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = np.random.default_rng(seed).standard_normal(op.N)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = apply(op, adjoint(op, v))
        new = float(v @ w)                # Rayleigh quotient, v has unit norm
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(new - est) <= tol * abs(new):
            return float(np.sqrt(new))
        est = new
    warnings.warn(f"power iteration hit the {max_iter}-iteration cap", NoConvergence)
    return float(np.sqrt(est))


def support(code, tol: float = 0.0):
    """Sorted indices of entries with magnitude above ``tol``."""
    return np.flatnonzero(np.abs(np.asarray(code)) > tol)
