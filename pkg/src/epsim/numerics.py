"""Dense complex linear algebra for small matrices (n <= 8).

The primary eigenvalue route is characteristic polynomial -> companion
matrix -> Newton polish, followed by a numerical-multiplicity test that
snaps root clusters which are indistinguishable from a multiple root at
working precision. Near an exceptional point of order k the raw roots of
a floating-point matrix scatter by roughly ``eps**(1/k)``; the snapping
step is what lets the spectrum at the EP come out exactly degenerate.

An independently written shifted-QR eigenvalue routine (:func:`qr_eigvals`)
is kept alongside as a cross-check.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MAX_DIM",
    "Polynomial",
    "RootCluster",
    "RootSet",
    "Eigensystem",
    "as_matrix",
    "char_poly",
    "poly_roots",
    "eigendecompose",
    "canonical_order",
    "qr_eigvals",
    "expm",
    "propagate",
    "propagate_many",
    "quartic_discriminant",
    "sylvester_resultant",
    "discriminant",
    "subdiscriminants",
]

MAX_DIM = 8
DEFAULT_CLUSTER_TOL = 1e-6
# coefficient noise level used by the multiplicity test, in units of eps
_NOISE_ULPS = 64.0


def as_matrix(M) -> np.ndarray:
    """Validate and return ``M`` as a square complex128 array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[0] > MAX_DIM:
        raise ValueError(f"matrix dimension must be in [1, {MAX_DIM}], got {A.shape[0]}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


@dataclass(frozen=True)
class Polynomial:
    """Complex polynomial with degree-descending coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        if c.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def normalized(self) -> "Polynomial":
        lead = self.coeffs[0]
        if lead == 0:
            raise ValueError("leading coefficient is zero")
        return Polynomial(self.coeffs / lead)

    def derivative(self) -> "Polynomial":
        n = self.degree
        if n == 0:
            return Polynomial([0.0])
        return Polynomial(self.coeffs[:-1] * np.arange(n, 0, -1))

    def __call__(self, x):
        return np.polyval(self.coeffs, x)

    def taylor(self, c: complex) -> np.ndarray:
        """Taylor coefficients ``p^(j)(c)/j!`` for j = 0..degree (ascending)."""
        # repeated synthetic division by (x - c)
        a = list(self.coeffs)
        out = []
        for _ in range(len(a)):
            acc = 0j
            rem = []
            for coef in a:
                acc = acc * c + coef
                rem.append(acc)
            out.append(rem[-1])
            a = rem[:-1]
        return np.array(out)


@dataclass(frozen=True)
class RootCluster:
    center: complex
    multiplicity: int
    radius: float
    indices: tuple


@dataclass(frozen=True)
class RootSet:
    roots: np.ndarray
    clusters: list
    raw_roots: np.ndarray

    def __len__(self):
        return len(self.roots)


@dataclass(frozen=True)
class Eigensystem:
    """Eigenvalues in canonical order with unit-norm right eigenvectors.

    ``vectors[:, k]`` pairs with ``eigenvalues[k]``. At a defective
    eigenvalue the same null vector is repeated, so ``gram_cond`` blows up.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    clusters: list
    gram_cond: float
    cluster_tol: float

    @property
    def min_gap(self) -> float:
        return min_pairwise_gap(self.eigenvalues)


def min_pairwise_gap(values) -> float:
    v = np.asarray(values, dtype=complex)
    if len(v) < 2:
        return math.inf
    d = np.abs(v[:, None] - v[None, :])
    d[np.diag_indices(len(v))] = np.inf
    return float(d.min())


def char_poly(M) -> Polynomial:
    """Monic characteristic polynomial det(lambda*I - M) by Faddeev-LeVerrier."""
    A = as_matrix(M)
    n = A.shape[0]
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = 1.0
    I = np.eye(n, dtype=complex)
    Mk = np.zeros_like(A)
    for k in range(1, n + 1):
        Mk = A @ Mk + coeffs[k - 1] * I
        coeffs[k] = -np.trace(A @ Mk) / k
    return Polynomial(coeffs)


def _polish(p: Polynomial, dp: Polynomial, z: complex, steps: int = 6) -> complex:
    best, best_val = z, abs(p(z))
    for _ in range(steps):
        d = dp(z)
        if d == 0:
            break
        z = z - p(z) / d
        val = abs(p(z))
        if val < best_val:
            best, best_val = z, val
        else:
            break
    return best


def _multiplicity_holds(p: Polynomial, c: complex, k: int, scale: float) -> bool:
    """True if p is numerically a k-fold root at c given coefficient noise."""
    n = p.degree
    t = p.taylor(c)
    eta = _NOISE_ULPS * n * np.finfo(float).eps
    for j in range(k):
        bound = eta * math.comb(n, j) * scale ** (n - j)
        if abs(t[j]) > bound:
            return False
    return True


def _snap_multiple_roots(p: Polynomial, roots: np.ndarray, scale: float, raw: np.ndarray | None = None) -> np.ndarray:
    n = len(roots)
    raw = roots if raw is None else raw
    eta = _NOISE_ULPS * n * np.finfo(float).eps
    roots = roots.copy()
    free = np.ones(n, dtype=bool)
    for k in range(n, 1, -1):
        changed = True
        while changed:
            changed = False
            idx = np.flatnonzero(free)
            if len(idx) < k:
                break
            for i in idx:
                dist = np.abs(roots[idx] - roots[i])
                group = idx[np.argsort(dist, kind="stable")[:k]]
                center = roots[group].mean()
                # a k-fold root under coefficient noise eta spreads by ~eta**(1/k)
                spread = np.max(np.abs(roots[group] - center))
                if spread > 10.0 * eta ** (1.0 / k) * scale:
                    continue
                # Newton polishing biases roots of a cluster; the raw mean is often better
                for c in (center, raw[group].mean()):
                    if _multiplicity_holds(p, c, k, scale):
                        roots[group] = c
                        free[group] = False
                        changed = True
                        break
                if changed:
                    break
    return roots


def _cluster(values: np.ndarray, tol: float) -> list:
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        pts = values[members]
        c = pts.mean()
        out.append(RootCluster(complex(c), len(members), float(np.max(np.abs(pts - c))), tuple(members)))
    return out


def poly_roots(p: Polynomial, cluster_tol: float = DEFAULT_CLUSTER_TOL, scale: float | None = None) -> RootSet:
    """Roots of ``p`` with multiplicity clusters.

    ``scale`` is the magnitude against which coefficient noise is judged
    (the matrix norm when ``p`` is a characteristic polynomial). Without it
    the Cauchy-type bound ``max |a_i|**(1/i)`` is used, floored at 1.
    """
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    c = np.trim_zeros(p.coeffs, "f")
    if len(c) == 0:
        raise ValueError("zero polynomial has no well-defined roots")
    if len(c) == 1:
        raise ValueError("constant polynomial has no roots")
    p = Polynomial(c).normalized()
    n = p.degree
    a = p.coeffs
    if scale is None:
        scale = max(1.0, max(abs(a[i]) ** (1.0 / i) for i in range(1, n + 1)))
    comp = np.zeros((n, n), dtype=complex)
    comp[0, :] = -a[1:]
    comp[np.arange(1, n), np.arange(n - 1)] = 1.0
    raw = np.linalg.eigvals(comp)
    dp = p.derivative()
    polished = np.array([_polish(p, dp, z) for z in raw])
    snapped = _snap_multiple_roots(p, polished, scale, raw)
    tol = cluster_tol * max(1.0, float(np.max(np.abs(snapped))))
    clusters = _cluster(snapped, tol)
    return RootSet(roots=snapped, clusters=clusters, raw_roots=raw)


def canonical_order(values, tol: float = 1e-12) -> np.ndarray:
    """Indices sorting by descending real part, ties by descending imaginary part."""
    v = np.asarray(values, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(v)))) if len(v) else 1.0
    eps = tol * scale

    def cmp(i, j):
        if abs(v[i].real - v[j].real) > eps:
            return -1 if v[i].real > v[j].real else 1
        if abs(v[i].imag - v[j].imag) > eps:
            return -1 if v[i].imag > v[j].imag else 1
        return i - j

    return np.array(sorted(range(len(v)), key=functools.cmp_to_key(cmp)), dtype=int)


def _null_vectors(A: np.ndarray, thresh: float) -> np.ndarray:
    _, s, vh = np.linalg.svd(A)
    k = max(1, int(np.sum(s <= thresh)))
    # column 0 is the smallest singular direction
    return vh[::-1][:k].conj().T


def eigendecompose(M, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> Eigensystem:
    """Eigenvalues (canonical order), right eigenvectors and residuals of ``M``."""
    A = as_matrix(M)
    n = A.shape[0]
    norm = float(np.linalg.norm(A, 2))
    if not np.any(np.tril(A, -1)) or not np.any(np.triu(A, 1)):
        # triangular: the diagonal is the spectrum, exactly
        vals = np.diag(A).copy()
    else:
        vals = poly_roots(char_poly(A), cluster_tol=cluster_tol, scale=norm if norm > 0 else 1.0).roots
    order = canonical_order(vals)
    vals = vals[order]
    thresh = cluster_tol * norm
    vecs = np.empty((n, n), dtype=complex)
    done: dict[complex, np.ndarray] = {}
    for k, lam in enumerate(vals):
        key = complex(lam)
        if key not in done:
            done[key] = _null_vectors(A - lam * np.eye(n), thresh)
        basis = done[key]
        # spread repeated eigenvalues over the available null vectors
        prior = sum(1 for j in range(k) if vals[j] == lam)
        vecs[:, k] = basis[:, prior % basis.shape[1]]
    vecs /= np.linalg.norm(vecs, axis=0)
    residuals = np.linalg.norm(A @ vecs - vecs * vals, axis=0)
    gram = vecs.conj().T @ vecs
    with np.errstate(all="ignore"):
        gram_cond = float(np.linalg.cond(gram))
    tol = cluster_tol * max(1.0, float(np.max(np.abs(vals))))
    clusters = _cluster(vals, tol)
    return Eigensystem(vals, vecs, residuals, clusters, gram_cond, tol)


def _hessenberg(A: np.ndarray) -> np.ndarray:
    H = A.copy()
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        x[0] += phase * alpha
        v = x / np.linalg.norm(x)
        H[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, :])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
    return H


def qr_eigvals(M, max_iter: int = 10000) -> np.ndarray:
    """Eigenvalues by Hessenberg reduction and Wilkinson-shifted QR sweeps."""
    H = _hessenberg(as_matrix(M))
    n = H.shape[0]
    eig = np.empty(n, dtype=complex)
    hi = n - 1
    it = 0
    scale = max(float(np.abs(H).max()), np.finfo(float).tiny)
    while hi >= 0:
        if hi == 0:
            eig[0] = H[0, 0]
            break
        if abs(H[hi, hi - 1]) <= np.finfo(float).eps * (abs(H[hi, hi]) + abs(H[hi - 1, hi - 1]) + 1e-300 * scale):
            eig[hi] = H[hi, hi]
            hi -= 1
            continue
        it += 1
        if it > max_iter:
            raise RuntimeError("QR iteration did not converge")
        a, b, c, d = H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi]
        tr, det = a + d, a * d - b * c
        disc = np.sqrt(tr * tr / 4 - det)
        mu1, mu2 = tr / 2 + disc, tr / 2 - disc
        mu = mu1 if abs(mu1 - d) < abs(mu2 - d) else mu2
        if it % 11 == 0:
            mu += abs(H[hi, hi - 1]) * (1 + 1j)  # exceptional shift
        m = hi + 1
        T = H[:m, :m] - mu * np.eye(m)
        rots = []
        for k in range(m - 1):
            x, y = T[k, k], T[k + 1, k]
            r = math.hypot(abs(x), abs(y))
            if r == 0:
                cs, sn = 1.0, 0.0
            else:
                cs, sn = x / r, y / r
            G = np.array([[cs.conjugate(), sn.conjugate()], [-sn, cs]])
            T[k : k + 2, k:] = G @ T[k : k + 2, k:]
            rots.append(G)
        for k, G in enumerate(rots):
            T[: min(k + 3, m), k : k + 2] = T[: min(k + 3, m), k : k + 2] @ G.conj().T
        H[:m, :m] = T + mu * np.eye(m)
    return eig


def expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of a stack ``(..., n, n)`` by scaling and squaring.

    Degree-18 Taylor polynomial on ``A / 2**s`` with ``||A / 2**s||_1 <= 1/2``;
    the truncation error there is below 1e-23, so rounding dominates.
    """
    A = np.asarray(A, dtype=complex)
    shape = A.shape
    n = shape[-1]
    B = A.reshape(-1, n, n)
    norms = np.abs(B).sum(axis=1).max(axis=1)
    s = np.zeros(len(B), dtype=int)
    big = norms > 0.5
    s[big] = np.ceil(np.log2(norms[big] / 0.5)).astype(int)
    X = B / (2.0 ** s)[:, None, None]
    I = np.broadcast_to(np.eye(n, dtype=complex), X.shape)
    E = I.copy()
    for k in range(18, 0, -1):
        E = I + (X @ E) / k
    for step in range(int(s.max(initial=0))):
        sel = s > step
        E[sel] = E[sel] @ E[sel]
    return E.reshape(shape)


def propagate(M, v, t: float) -> np.ndarray:
    """Return ``exp(-i M t) v``."""
    return propagate_many(M, v, [t])[0]


def propagate_many(M, v, times) -> np.ndarray:
    """Rows are ``exp(-i M t_k) v`` for each time in ``times``."""
    A = as_matrix(M)
    vec = np.asarray(v, dtype=complex)
    if vec.shape != (A.shape[0],) or not np.all(np.isfinite(vec)):
        raise ValueError("state vector must be finite with matching dimension")
    ts = np.asarray(times, dtype=float)
    if not np.all(np.isfinite(ts)):
        raise ValueError("times must be finite")
    if np.any(ts < 0):
        raise ValueError("times must be non-negative")
    U = expm(-1j * ts[:, None, None] * A[None])
    return U @ vec


def quartic_discriminant(p: Polynomial) -> complex:
    """Discriminant of a degree-4 polynomial from the closed-form expression."""
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    if p.degree != 4:
        raise ValueError(f"expected degree 4, got {p.degree}")
    a, b, c, d, e = p.coeffs
    if a == 0:
        raise ValueError("leading coefficient is zero")
    return (
        256 * a**3 * e**3
        - 192 * a**2 * b * d * e**2
        - 128 * a**2 * c**2 * e**2
        + 144 * a**2 * c * d**2 * e
        - 27 * a**2 * d**4
        + 144 * a * b**2 * c * e**2
        - 6 * a * b**2 * d**2 * e
        - 80 * a * b * c**2 * d * e
        + 18 * a * b * c * d**3
        + 16 * a * c**4 * e
        - 4 * a * c**3 * d**2
        - 27 * b**4 * e**2
        + 18 * b**3 * c * d * e
        - 4 * b**3 * d**3
        - 4 * b**2 * c**3 * e
        + b**2 * c**2 * d**2
    )


def _sylvester_block(f: np.ndarray, g: np.ndarray, j: int) -> np.ndarray:
    m, n = len(f) - 1, len(g) - 1
    rows = []
    width = m + n - j
    for r in range(n - j):
        row = np.zeros(width, dtype=complex)
        row[r : r + m + 1] = f
        rows.append(row)
    for r in range(m - j):
        row = np.zeros(width, dtype=complex)
        row[r : r + n + 1] = g
        rows.append(row)
    S = np.array(rows)
    return S[:, : m + n - 2 * j]


def sylvester_resultant(f, g) -> complex:
    """Resultant of two polynomials as a Sylvester determinant."""
    fc = np.asarray(f.coeffs if isinstance(f, Polynomial) else f, dtype=complex)
    gc = np.asarray(g.coeffs if isinstance(g, Polynomial) else g, dtype=complex)
    return complex(np.linalg.det(_sylvester_block(fc, gc, 0)))


def subdiscriminants(p: Polynomial) -> np.ndarray:
    """Principal subresultant coefficients of (p, p') for j = 0..deg-2.

    Entry 0 is the resultant. A k-fold root makes entries 0..k-2 vanish;
    the first non-vanishing-order entry generically changes sign across a
    touching zero of the discriminant.
    """
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    f, g = p.coeffs, p.derivative().coeffs
    n = p.degree
    return np.array([np.linalg.det(_sylvester_block(f, g, j)) for j in range(n - 1)])


def discriminant(p: Polynomial) -> complex:
    """Discriminant of ``p`` (closed form for quartics, resultant otherwise)."""
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    n = p.degree
    if n < 1:
        raise ValueError("degree must be at least 1")
    if n == 1:
        return 1.0 + 0j
    if n == 4:
        return complex(quartic_discriminant(p))
    sign = (-1) ** (n * (n - 1) // 2)
    return complex(sign * sylvester_resultant(p, p.derivative()) / p.coeffs[0])
