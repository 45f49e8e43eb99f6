"""Independent reference implementations used only by the tests.

Everything here is deliberately naive: explicit loops, dense matrices and
exhaustive enumeration, sharing no code with the package.
"""

import itertools

import numpy as np
from scipy.optimize import linprog, minimize


def dense_dictionary(atoms, N):
    """Column i*m + j is atom j written cyclically starting at row i."""
    n, m = atoms.shape
    D = np.zeros((N, N * m))
    for i in range(N):
        for j in range(m):
            for t in range(n):
                D[(i + t) % N, i * m + j] += atoms[t, j]
    return D


def patch_matrix(N, n, i):
    """R_i as an explicit n x N selection matrix."""
    R = np.zeros((n, N))
    for t in range(n):
        R[t, (i + t) % N] = 1.0
    return R


def stripe_matrix(N, n, m, i):
    """S_i as an explicit (2n-1)m x Nm selection matrix."""
    S = np.zeros(((2 * n - 1) * m, N * m))
    for s in range(2 * n - 1):
        pos = (i - (n - 1) + s) % N
        for j in range(m):
            S[s * m + j, pos * m + j] = 1.0
    return S


def block_matrix(N, m, i):
    """P_i: picks the m coefficients at shift i."""
    P = np.zeros((m, N * m))
    for j in range(m):
        P[j, i * m + j] = 1.0
    return P


def stripe_dictionary(atoms):
    """Omega from R_0 D restricted to the columns that can touch patch 0."""
    n, m = atoms.shape
    N = 4 * n
    D = dense_dictionary(atoms, N)
    return patch_matrix(N, n, 0) @ D @ stripe_matrix(N, n, m, 0).T


def coherence(D):
    G = np.abs(D.T @ D)
    np.fill_diagonal(G, 0.0)
    return G.max()


def sigma_max_fourier(atoms, N):
    """D D^T is circulant; its eigenvalues are sum_j |FFT(atom_j padded)|^2."""
    n, m = atoms.shape
    padded = np.zeros((N, m))
    padded[:n] = atoms
    return float(np.sqrt((np.abs(np.fft.fft(padded, axis=0)) ** 2).sum(axis=1).max()))


def l0_inf(code, N, n, m, tol=0.0):
    """Max over stripes of the number of distinct nonzero coefficients they touch."""
    best = 0
    for i in range(N):
        cols = np.flatnonzero(stripe_matrix(N, n, m, i).sum(axis=0))
        best = max(best, int((np.abs(code[cols]) > tol).sum()))
    return best


def supports_with_l0_inf(N, n, m, k, max_size=None):
    """All supports (as sorted tuples) whose stripe sparsity is exactly k."""
    out = []
    stripes = [np.flatnonzero(stripe_matrix(N, n, m, i).sum(axis=0)) for i in range(N)]
    cover = [set(s) for s in stripes]
    top = max_size or N * m
    for size in range(k, top + 1):
        found = False
        for T in itertools.combinations(range(N * m), size):
            best = max(len(c.intersection(T)) for c in cover)
            if best == k:
                out.append(T)
                found = True
        if not found and size > k:
            break
    return out


def erc_theta(D, T):
    T = list(T)
    pinv = np.linalg.pinv(D[:, T])
    others = [i for i in range(D.shape[1]) if i not in T]
    return 1.0 - max(np.abs(pinv @ D[:, i]).sum() for i in others)


def soft_threshold_grid(v, t, half_width=10.0, points=200001):
    """argmin_x 0.5 (x - v)^2 + t|x| over a fine grid."""
    grid = np.linspace(v - half_width, v + half_width, points)
    return grid[np.argmin(0.5 * (grid - v) ** 2 + t * np.abs(grid))]


def best_k_term(D, y, k):
    """Exhaustive best k-term least-squares fit: (support, residual norm)."""
    best = (None, np.inf)
    for T in itertools.combinations(range(D.shape[1]), k):
        A = D[:, T]
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = np.linalg.norm(y - A @ coef)
        if r < best[1] - 1e-12:
            best = (T, r)
    return best


def kkt_violation(D, y, code, lam, supp_tol=1e-9):
    corr = D.T @ (y - D @ code)
    supp = np.abs(code) > supp_tol
    off = np.abs(corr).max() - lam
    on = np.abs(corr[supp] - lam * np.sign(code[supp])).max() if supp.any() else 0.0
    return off, on


def basis_pursuit_lp(D, y):
    """min ||x||_1 s.t. D x = y via the split x = p - q, p, q >= 0."""
    k = D.shape[1]
    res = linprog(np.ones(2 * k), A_eq=np.hstack([D, -D]), b_eq=y, bounds=(0, None),
                  method="highs")
    return res.x[:k] - res.x[k:]


def lasso_split(D, y, lam):
    """Lasso solved with L-BFGS-B on the nonnegative split x = p - q."""
    k = D.shape[1]

    def f(z):
        x = z[:k] - z[k:]
        r = y - D @ x
        return 0.5 * r @ r + lam * z.sum(), np.concatenate([-D.T @ r + lam, D.T @ r + lam])

    res = minimize(f, np.zeros(2 * k), jac=True, bounds=[(0, None)] * (2 * k), method="L-BFGS-B",
                   options={"ftol": 1e-16, "gtol": 1e-12, "maxiter": 50000})
    return res.x[:k] - res.x[k:]
