"""Constant-coefficient exterior algebra with a metric Hodge star.

Coefficients are either float64 arrays or object arrays of
``fractions.Fraction`` (exact mode).  The inner product convention is
the minor-determinant one: for ascending multi-indices I, J,
``<e^I, e^J> = det(g^{-1}[I, J])``, so a form with m unit coefficients
on an orthonormal coframe has squared norm m.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import multiindex as mi
from .errors import (
    DegreeMismatch,
    DegreeOverflow,
    DegreeUnderflow,
    DimensionMismatch,
    NotPositiveDefinite,
)


def _is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def _zeros(size: int, exact: bool) -> np.ndarray:
    if exact:
        return np.array([Fraction(0)] * size, dtype=object)
    return np.zeros(size)


@dataclass(frozen=True)
class KForm:
    """A constant alternating k-tensor, dense over ascending multi-indices."""

    degree: int
    coeffs: np.ndarray
    n: int = 7

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.dtype != object:
            c = c.astype(float)
        if c.shape != (mi.dim(self.n, self.degree),):
            raise ValueError(
                f"degree-{self.degree} form on R^{self.n} needs "
                f"{mi.dim(self.n, self.degree)} coefficients, got {c.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    # -- ring structure ------------------------------------------------

    def __add__(self, other: "KForm") -> "KForm":
        self._check_compat(other)
        return KForm(self.degree, self.coeffs + other.coeffs, self.n)

    def __sub__(self, other: "KForm") -> "KForm":
        self._check_compat(other)
        return KForm(self.degree, self.coeffs - other.coeffs, self.n)

    def __neg__(self) -> "KForm":
        return KForm(self.degree, -self.coeffs, self.n)

    def __rmul__(self, scalar) -> "KForm":
        return KForm(self.degree, self.coeffs * scalar, self.n)

    def __mul__(self, scalar) -> "KForm":
        return KForm(self.degree, self.coeffs * scalar, self.n)

    def _check_compat(self, other: "KForm"):
        if self.n != other.n:
            raise DimensionMismatch(f"dim {self.n} vs {other.n}")
        if self.degree != other.degree:
            raise DegreeMismatch(f"degree {self.degree} vs {other.degree}")

    @property
    def exact(self) -> bool:
        return _is_exact(self.coeffs)

    def to_float(self) -> "KForm":
        if not self.exact:
            return self
        return KForm(self.degree, self.coeffs.astype(float), self.n)

    def norm_max(self) -> float:
        return float(max(abs(float(c)) for c in self.coeffs)) if len(self.coeffs) else 0.0

    def full_tensor(self) -> np.ndarray:
        """Totally antisymmetric n^k coefficient array."""
        k, n = self.degree, self.n
        shape = (n,) * k
        out = (
            np.empty(shape, dtype=object)
            if self.exact
            else np.zeros(shape)
        )
        if self.exact:
            out[...] = Fraction(0)
        for p, idx in enumerate(mi.indices(n, k)):
            c = self.coeffs[p]
            if k == 0:
                out[()] = c
                continue
            from itertools import permutations

            for perm in permutations(range(k)):
                s = mi.perm_sign(perm)
                out[tuple(idx[q] for q in perm)] = s * c
        return out

    def __call__(self, *vectors) -> float:
        """Evaluate on k vectors (contravariant coordinate components)."""
        if len(vectors) != self.degree:
            raise DegreeMismatch(
                f"need {self.degree} vectors, got {len(vectors)}"
            )
        V = np.array(vectors, dtype=float).T  # n x k
        out = 0.0
        for p, idx in enumerate(mi.indices(self.n, self.degree)):
            c = self.coeffs[p]
            if c == 0:
                continue
            out += float(c) * np.linalg.det(V[list(idx), :])
        return out


def zero_form(degree: int, n: int = 7, exact: bool = False) -> KForm:
    return KForm(degree, _zeros(mi.dim(n, degree), exact), n)


def basis_form(idx, n: int = 7, exact: bool = False) -> KForm:
    """Elementary form e^idx for an ascending index tuple or 1-based name."""
    if isinstance(idx, str):
        idx = mi.name_to_index(idx)
    idx = tuple(idx)
    k = len(idx)
    coeffs = _zeros(mi.dim(n, k), exact)
    coeffs[mi.index_position(n, k)[idx]] = Fraction(1) if exact else 1.0
    return KForm(k, coeffs, n)


def wedge(a: KForm, b: KForm) -> KForm:
    """Exterior product; errors if the degree sum exceeds the dimension."""
    if a.n != b.n:
        raise DimensionMismatch(f"dim {a.n} vs {b.n}")
    k = a.degree + b.degree
    if k > a.n:
        raise DegreeOverflow(f"degree {a.degree}+{b.degree} exceeds n={a.n}")
    exact = a.exact and b.exact
    out = _zeros(mi.dim(a.n, k), exact)
    ac, bc = a.coeffs, b.coeffs
    if not exact:
        ac, bc = np.asarray(ac, dtype=float), np.asarray(bc, dtype=float)
    for ia, ib, iab, s in mi.wedge_table(a.n, a.degree, b.degree):
        out[iab] += s * ac[ia] * bc[ib]
    return KForm(k, out, a.n)


def interior(v, a: KForm) -> KForm:
    """Interior product v interior a for a coordinate vector v."""
    if a.degree == 0:
        raise DegreeUnderflow("interior product of a 0-form")
    v = np.asarray(v)
    if v.shape != (a.n,):
        raise DimensionMismatch(f"vector length {v.shape} vs n={a.n}")
    exact = a.exact and v.dtype == object
    out = _zeros(mi.dim(a.n, a.degree - 1), exact)
    for i, entries in enumerate(mi.interior_table(a.n, a.degree)):
        vi = v[i]
        if vi == 0:
            continue
        for pos_in, pos_out, sign in entries:
            out[pos_out] += sign * vi * a.coeffs[pos_in]
    return KForm(a.degree - 1, out, a.n)


def pullback(a: KForm, M: np.ndarray) -> KForm:
    """Pullback along the linear map with matrix M (a.n rows, d columns).

    (pullback a)(v_1..v_k) = a(M v_1, .., M v_k); the result lives on the
    d-dimensional source space.
    """
    M = np.asarray(M)
    if M.shape[0] != a.n:
        raise DimensionMismatch(f"matrix has {M.shape[0]} rows, form dim {a.n}")
    d = M.shape[1]
    k = a.degree
    if k > d:
        # nothing of degree > d survives on a d-dimensional source;
        # comb(d, k) = 0 so this is the canonical empty zero form
        return KForm(k, _zeros(0, a.exact), d)
    exact = a.exact and M.dtype == object
    out = _zeros(mi.dim(d, k), exact)
    Mf = M if exact else np.asarray(M, dtype=float)
    for pj, J in enumerate(mi.indices(d, k)):
        cols = Mf[:, list(J)]
        acc = Fraction(0) if exact else 0.0
        for pi, I in enumerate(mi.indices(a.n, k)):
            c = a.coeffs[pi]
            if c == 0:
                continue
            sub = cols[list(I), :]
            acc += c * (_exact_det(sub) if exact else np.linalg.det(sub))
        out[pj] = acc
    return KForm(k, out, d)


def _exact_det(M: np.ndarray):
    """Fraction-safe determinant by cofactor expansion (small matrices)."""
    m = M.shape[0]
    if m == 0:
        return Fraction(1)
    if m == 1:
        return M[0, 0]
    if m == 2:
        return M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    out = Fraction(0)
    for j in range(m):
        if M[0, j] == 0:
            continue
        minor = np.delete(np.delete(M, 0, axis=0), j, axis=1)
        out += (-1) ** j * M[0, j] * _exact_det(minor)
    return out


@dataclass(frozen=True)
class Sym2Tensor:
    """A symmetric 2-tensor h_ij; the avatar of 1 + 27 type 3-forms."""

    entries: np.ndarray
    n: int = 7

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.dtype != object:
            e = e.astype(float)
        if e.shape != (self.n, self.n):
            raise ValueError(f"need a {self.n}x{self.n} matrix")
        if not (e == e.T).all():
            raise ValueError("entries must be exactly symmetric")
        object.__setattr__(self, "entries", e)

    def __add__(self, other):
        return Sym2Tensor(self.entries + other.entries, self.n)

    def __sub__(self, other):
        return Sym2Tensor(self.entries - other.entries, self.n)

    def __rmul__(self, s):
        return Sym2Tensor(self.entries * s, self.n)

    def trace(self, inverse_metric: np.ndarray):
        """Metric trace g^{ij} h_ij."""
        return (self.entries * np.asarray(inverse_metric).T).sum()

    @property
    def exact(self) -> bool:
        return _is_exact(self.entries)


def gram_matrix(g_inv: np.ndarray, k: int, n: int = 7) -> np.ndarray:
    """Gram matrix <e^I, e^J> = det(g_inv[I, J]) on degree-k forms."""
    g_inv = np.asarray(g_inv)
    exact = g_inv.dtype == object
    N = mi.dim(n, k)
    out = np.empty((N, N), dtype=object) if exact else np.zeros((N, N))
    idx = mi.indices(n, k)
    if k == 0:
        out[0, 0] = Fraction(1) if exact else 1.0
        return out
    if not exact:
        blocks = np.empty((N, N, k, k))
        for a, I in enumerate(idx):
            sub = g_inv[list(I), :]
            for b, J in enumerate(idx):
                blocks[a, b] = sub[:, list(J)]
        out = np.linalg.det(blocks.reshape(N * N, k, k)).reshape(N, N)
        return out
    for a, I in enumerate(idx):
        for b, J in enumerate(idx):
            out[a, b] = _exact_det(g_inv[np.ix_(list(I), list(J))])
    return out


def inner_product(g_inv: np.ndarray, a: KForm, b: KForm):
    """Pointwise metric inner product <a, b>_g."""
    a._check_compat(b)
    G = gram_matrix(g_inv, a.degree, a.n)
    return a.coeffs @ (G @ b.coeffs)


def _check_spd(g: np.ndarray):
    gf = np.asarray(g, dtype=float)
    if not np.allclose(gf, gf.T, atol=1e-12):
        raise NotPositiveDefinite("metric is not symmetric")
    try:
        np.linalg.cholesky(gf)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("metric failed Cholesky")


def hodge_star(g: np.ndarray, vol_coeff, a: KForm) -> KForm:
    """Hodge star defined by  b ^ star(a) = <b, a>_g vol.

    ``vol_coeff`` is the coefficient of the volume form on the standard
    orientation class e^{1..n}; it must equal sqrt(det g) up to sign for
    the defining identity to hold (the sign carries the orientation).
    """
    g = np.asarray(g)
    exact = a.exact and g.dtype == object
    _check_spd(g)
    if exact:
        g_inv = _exact_inverse(g)
    else:
        g = np.asarray(g, dtype=float)
        g_inv = np.linalg.inv(g)
    n, k = a.n, a.degree
    G = gram_matrix(g_inv, k, n)
    paired = G @ a.coeffs  # <e^I, a> per ascending I
    out = _zeros(mi.dim(n, n - k), exact)
    for p, p_c, s in mi.complement_table(n, k):
        out[p_c] = s * vol_coeff * paired[p]
    return KForm(n - k, out, n)


def hodge_star_matrix(g: np.ndarray, vol_coeff, k: int, n: int = 7) -> np.ndarray:
    """Matrix of the Hodge star from degree k to n-k (float only)."""
    g = np.asarray(g, dtype=float)
    g_inv = np.linalg.inv(g)
    G = gram_matrix(g_inv, k, n)
    S = np.zeros((mi.dim(n, n - k), mi.dim(n, k)))
    for p, p_c, s in mi.complement_table(n, k):
        S[p_c, :] = s * vol_coeff * G[p, :]
    return S


def _exact_inverse(M: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse over Fractions."""
    m = M.shape[0]
    A = np.empty((m, 2 * m), dtype=object)
    for i in range(m):
        for j in range(m):
            A[i, j] = Fraction(M[i, j])
            A[i, m + j] = Fraction(1 if i == j else 0)
    for col in range(m):
        piv = next((r for r in range(col, m) if A[r, col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix in exact inverse")
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
        A[col] = A[col] / A[col, col]
        for r in range(m):
            if r != col and A[r, col] != 0:
                A[r] = A[r] - A[r, col] * A[col]
    return A[:, m:]


def exact_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve M x = rhs over Fractions (M square, nonsingular)."""
    return _exact_inverse(np.asarray(M, dtype=object)) @ np.asarray(rhs, dtype=object)


def top_coefficient(a: KForm):
    """Coefficient of e^{1..n} for a top-degree form."""
    if a.degree != a.n:
        raise DegreeMismatch(f"degree {a.degree} is not top on R^{a.n}")
    return a.coeffs[0]


def from_coeff_dict(degree: int, d: dict, n: int = 7, exact: bool = False) -> KForm:
    """Build a form from {'123': 1.0, ...}; exact mode accepts 'p/q' strings."""
    out = _zeros(mi.dim(n, degree), exact)
    pos = mi.index_position(n, degree)
    for name, val in d.items():
        idx = mi.name_to_index(name)
        if len(idx) != degree:
            raise DegreeMismatch(f"key {name!r} has wrong degree")
        if max(idx) >= n:
            raise DimensionMismatch(f"key {name!r} out of range for n={n}")
        out[pos[idx]] = Fraction(val) if exact else float(Fraction(val))
    return KForm(degree, out, n)
