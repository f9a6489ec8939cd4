"""The nonlinear metric construction and representation theory of a
positive 3-form on R^7.

A positive 3-form phi determines a metric, an orientation and a dual
4-form psi through the wedge identity

    (X int phi) ^ (Y int phi) ^ phi = -6 g(X, Y) vol,

normalized by the unique scaling that makes vol the metric volume form.
On top of the metric this module provides the pointwise type split of
2-, 3- and 4-forms into irreducible pieces of dimensions (7, 14) and
(1, 7, 27), the rescaled duality operator with eigenvalue factors
(4/3, 1, -1) on degree 3 and (3/4, 1, -1) on degree 4, and the linear
correspondence between symmetric 2-tensors and 1 + 27 type 3-forms.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import multiindex as mi
from .errors import (
    HasSevenComponent,
    NearDegenerate,
    NewtonDiverged,
    NotPositive,
    UnsupportedDegree,
)
from .forms import (
    KForm,
    Sym2Tensor,
    _exact_inverse,
    exact_solve,
    gram_matrix,
    hodge_star,
    inner_product,
    interior,
    pullback,
    wedge,
    zero_form,
)

NEAR_DEGENERATE_THRESHOLD = 1e-12

_PHI0_TERMS = {"123": 1, "145": 1, "167": 1, "246": 1, "257": -1, "347": -1, "356": -1}


def standard_phi(exact: bool = False) -> KForm:
    """The reference positive 3-form with identity metric and unit volume."""
    from .forms import from_coeff_dict

    return from_coeff_dict(3, _PHI0_TERMS, exact=exact)


def _calibrate_orientation() -> int:
    """Sign s such that the oriented top class is s * e^{1..7}.

    Calibrated once at import so the defining identity holds with the
    constant -6 against the reference form: if the fundamental wedge
    evaluates to +6 g vol on +e^{1..7}, the orientation class is taken
    as -e^{1..7}.  The sign is recorded in every report header.
    """
    phi = standard_phi()
    e1 = np.zeros(7)
    e1[0] = 1.0
    c = interior(e1, phi)
    top = wedge(wedge(c, c), phi).coeffs[0]
    return -1 if top > 0 else 1


ORIENTATION_SIGN = _calibrate_orientation()


def torus_integral(a: KForm):
    """Integral over the unit-covolume torus with the calibrated orientation."""
    if a.degree != a.n:
        raise UnsupportedDegree(f"cannot integrate degree {a.degree} over T^{a.n}")
    sign = ORIENTATION_SIGN if a.n == 7 else 1
    return sign * a.coeffs[0]


class G2Structure:
    """A positive 3-form with its induced metric, volume and dual 4-form.

    Treat instances as immutable values; all attributes are set once at
    construction and derived operators are cached internally.
    """

    def __init__(
        self,
        phi: KForm,
        metric: np.ndarray,
        inverse_metric: np.ndarray,
        vol_coeff,
        psi: KForm,
        norm_factor,
    ):
        self.phi = phi
        self.metric = metric
        self.inverse_metric = inverse_metric
        # coefficient of vol on e^{1..7}: ORIENTATION_SIGN * sqrt(det g)
        self.vol_coeff = vol_coeff
        self.psi = psi
        # norm_factor is sqrt(det g) > 0, the total volume of the torus
        self.norm_factor = norm_factor
        self._cache = {}

    @property
    def exact(self) -> bool:
        return self.phi.exact

    @property
    def vol(self) -> KForm:
        coeffs = np.array(
            [self.vol_coeff] if self.exact else [float(self.vol_coeff)],
            dtype=object if self.exact else float,
        )
        return KForm(7, coeffs, 7)

    def to_float(self) -> "G2Structure":
        if not self.exact:
            return self
        return G2Structure(
            self.phi.to_float(),
            np.asarray(self.metric, dtype=float),
            np.asarray(self.inverse_metric, dtype=float),
            float(self.vol_coeff),
            self.psi.to_float(),
            float(self.norm_factor),
        )

    # -- cached linear operators ----------------------------------------

    def star(self, a: KForm) -> KForm:
        return hodge_star(self.metric, self.vol_coeff, a)

    def star_matrix(self, k: int) -> np.ndarray:
        key = ("star", k)
        if key not in self._cache:
            from .forms import hodge_star_matrix

            self._cache[key] = hodge_star_matrix(
                np.asarray(self.metric, dtype=float), float(self.vol_coeff), k
            )
        return self._cache[key]

    def gram(self, k: int) -> np.ndarray:
        key = ("gram", k)
        if key not in self._cache:
            self._cache[key] = gram_matrix(self.inverse_metric, k)
        return self._cache[key]

    def seven_space(self, degree: int) -> np.ndarray:
        """Column basis of the 7-type subspace in the given degree."""
        key = ("seven", degree)
        if key not in self._cache:
            if degree == 2:
                gen = self.phi
            elif degree == 3:
                gen = self.psi
            elif degree == 4:
                cols = [
                    self.star(interior(_unit(i, self.exact), self.psi)).coeffs
                    for i in range(7)
                ]
                self._cache[key] = np.stack(cols, axis=1)
                return self._cache[key]
            else:
                raise UnsupportedDegree(f"no 7-type basis in degree {degree}")
            cols = [interior(_unit(i, self.exact), gen).coeffs for i in range(7)]
            self._cache[key] = np.stack(cols, axis=1)
        return self._cache[key]

    def projectors(self, degree: int):
        """Projection matrices onto the type components, low to high."""
        key = ("proj", degree)
        if key not in self._cache:
            self._cache[key] = _build_projectors(self, degree)
        return self._cache[key]


def _unit(i: int, exact: bool = False) -> np.ndarray:
    if exact:
        v = np.array([Fraction(0)] * 7, dtype=object)
        v[i] = Fraction(1)
        return v
    v = np.zeros(7)
    v[i] = 1.0
    return v


def _cubic_tensors():
    """Cached contraction tensors for the fundamental matrix (float path)."""
    key = getattr(_cubic_tensors, "_cache", None)
    if key is None:
        INT3 = mi.interior_matrices(7, 3)  # (7, 21, 35)
        W4 = mi.wedge_matrix_tensor(7, 2, 2)  # (35, 21, 21)
        W7 = mi.wedge_matrix_tensor(7, 4, 3)[0]  # (35, 35)
        M = np.einsum("zc,zab->abc", W7, W4)  # (21, 21, 35)
        key = (INT3, M)
        _cubic_tensors._cache = key
    return key


def fundamental_matrix(phi: KForm) -> np.ndarray:
    """B with (e_i int phi) ^ (e_j int phi) ^ phi = B_ij e^{1..7}."""
    if phi.exact:
        B = np.empty((7, 7), dtype=object)
        ints = [interior(_unit(i, True), phi) for i in range(7)]
        for i in range(7):
            for j in range(i, 7):
                top = wedge(wedge(ints[i], ints[j]), phi)
                B[i, j] = top.coeffs[0]
                B[j, i] = top.coeffs[0]
        return B
    INT3, M = _cubic_tensors()
    c = np.asarray(phi.coeffs, dtype=float)
    a = INT3 @ c  # (7, 21)
    return np.einsum("abc,ia,jb,c->ij", M, a, a, c, optimize=True)


def volume_scalar(phi: KForm) -> float:
    """sqrt(det g) of the induced metric, without building the dual form."""
    B = fundamental_matrix(phi.to_float())
    A = -ORIENTATION_SIGN * np.asarray(B, dtype=float) / 6.0
    detA = np.linalg.det(A)
    if abs(detA) < NEAR_DEGENERATE_THRESHOLD:
        raise NearDegenerate(f"|det| = {abs(detA):.3e} below threshold")
    if detA <= 0:
        raise NotPositive(f"determinant {detA:.3e} of -sB/6 not positive")
    lam = detA ** (1.0 / 9.0)
    _require_spd(A / lam, detA)
    return lam


def _rational_root(x: Fraction, k: int) -> Fraction:
    """Exact k-th root of a positive rational, or raise ValueError."""
    if x <= 0:
        raise ValueError("root of non-positive rational")
    p, q = x.numerator, x.denominator
    rp = round(p ** (1.0 / k))
    rq = round(q ** (1.0 / k))
    for a in (rp - 1, rp, rp + 1):
        for b in (rq - 1, rq, rq + 1):
            if a > 0 and b > 0 and a**k == p and b**k == q:
                return Fraction(a, b)
    raise ValueError(f"{x} has no exact rational {k}-th root")


def metric_from_phi(phi: KForm) -> G2Structure:
    """Build the full structure induced by a positive 3-form.

    Raises NotPositive when the fundamental matrix fails positivity and
    NearDegenerate when its determinant is below threshold.
    """
    B = fundamental_matrix(phi)
    exact = phi.exact
    sign = ORIENTATION_SIGN
    if exact:
        A = -sign * B / Fraction(6)
        detA = _exact_det_obj(A)
        if detA <= 0:
            raise NotPositive(f"determinant {float(detA):.3e} of -sB/6 not positive")
        lam = _rational_root(Fraction(detA), 9)
        g = A / lam
        _require_spd(np.asarray(g, dtype=float), detA)
        g_inv = _exact_inverse(g)
        vol_coeff = sign * lam
    else:
        A = -sign * np.asarray(B, dtype=float) / 6.0
        detA = np.linalg.det(A)
        if abs(detA) < NEAR_DEGENERATE_THRESHOLD:
            raise NearDegenerate(f"|det| = {abs(detA):.3e} below threshold")
        if detA <= 0:
            raise NotPositive(f"determinant {detA:.3e} of -sB/6 not positive")
        lam = detA ** (1.0 / 9.0)
        g = A / lam
        _require_spd(g, detA)
        g_inv = np.linalg.inv(g)
        vol_coeff = sign * lam
    psi = hodge_star(g, vol_coeff, phi)
    return G2Structure(phi, g, g_inv, vol_coeff, psi, lam)


def _exact_det_obj(M: np.ndarray) -> Fraction:
    from .forms import _exact_det

    return _exact_det(np.asarray(M, dtype=object))


def _require_spd(g: np.ndarray, detA):
    try:
        np.linalg.cholesky(np.asarray(g, dtype=float))
    except np.linalg.LinAlgError:
        raise NotPositive(f"candidate metric not positive definite (det A = {detA})")


def is_positive(phi: KForm) -> bool:
    try:
        metric_from_phi(phi)
        return True
    except NotPositive:
        return False


@dataclass(frozen=True)
class FormTypeComponents:
    """Orthogonal type components of a form; unused slots hold None."""

    p1: KForm | None
    p7: KForm
    p27: KForm | None
    p14: KForm | None = None

    def parts(self):
        return tuple(p for p in (self.p1, self.p7, self.p27, self.p14) if p is not None)


def _build_projectors(fs: G2Structure, degree: int):
    G = fs.gram(degree)
    if degree == 2:
        S7 = fs.seven_space(2)
        P7 = _span_projector(S7, G, fs.exact)
        I = _eye(mi.dim(7, 2), fs.exact)
        return {7: P7, 14: I - P7}
    if degree in (3, 4):
        gen = fs.phi if degree == 3 else fs.psi
        norm2 = inner_product(fs.inverse_metric, gen, gen)  # equals 7
        gcol = gen.coeffs
        P1 = np.outer(gcol, G @ gcol) / norm2
        S7 = fs.seven_space(degree)
        P7 = _span_projector(S7, G, fs.exact)
        I = _eye(mi.dim(7, degree), fs.exact)
        return {1: P1, 7: P7, 27: I - P1 - P7}
    raise UnsupportedDegree(f"no type split in degree {degree}")


def _eye(n: int, exact: bool) -> np.ndarray:
    if not exact:
        return np.eye(n)
    I = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            I[i, j] = Fraction(1 if i == j else 0)
    return I


def _span_projector(S: np.ndarray, G: np.ndarray, exact: bool) -> np.ndarray:
    """G-orthogonal projector onto the column span of S."""
    M = S.T @ G @ S
    if exact:
        Minv = _exact_inverse(np.asarray(M, dtype=object))
    else:
        Minv = np.linalg.inv(M)
    return S @ Minv @ (S.T @ G)


def decompose(fs: G2Structure, a: KForm) -> FormTypeComponents:
    """Split a form of degree 2, 3 or 4 into its orthogonal type pieces."""
    k = a.degree
    if k not in (2, 3, 4):
        raise UnsupportedDegree(f"decompose supports degrees 2, 3, 4; got {k}")
    P = fs.projectors(k)
    if k == 2:
        p7 = KForm(2, P[7] @ a.coeffs)
        p14 = KForm(2, P[14] @ a.coeffs)
        return FormTypeComponents(p1=None, p7=p7, p27=None, p14=p14)
    p1 = KForm(k, P[1] @ a.coeffs)
    p7 = KForm(k, P[7] @ a.coeffs)
    p27 = KForm(k, P[27] @ a.coeffs)
    return FormTypeComponents(p1=p1, p7=p7, p27=p27)


_STAR_WEIGHTS = {3: (Fraction(4, 3), 1, -1), 4: (Fraction(3, 4), 1, -1)}


def star_op(fs: G2Structure, a: KForm) -> KForm:
    """Rescaled duality operator: an involution exchanging degrees 3 and 4.

    Acts as (4/3) * star on the 1-part, star on the 7-part and -star on
    the 27-part of a 3-form; the degree-4 weights are (3/4, 1, -1).
    """
    if a.degree not in (3, 4):
        raise UnsupportedDegree(f"star_op needs degree 3 or 4, got {a.degree}")
    w1, w7, w27 = _STAR_WEIGHTS[a.degree]
    c = decompose(fs, a)
    combo = (w1 if a.exact else float(w1)) * c.p1 + w7 * c.p7 + w27 * c.p27
    return fs.star(combo)


def star_op_matrix(fs: G2Structure, k: int) -> np.ndarray:
    """Matrix of star_op on degree k in the ascending-index basis."""
    P = fs.projectors(k)
    w1, w7, w27 = (float(w) for w in _STAR_WEIGHTS[k])
    combo = w1 * np.asarray(P[1], dtype=float) + w7 * np.asarray(
        P[7], dtype=float
    ) + w27 * np.asarray(P[27], dtype=float)
    return fs.star_matrix(k) @ combo


def sym2_to_form(fs: G2Structure, h: Sym2Tensor) -> KForm:
    """The 3-form with components h_i^l phi_ljk + h_j^l phi_ilk + h_k^l phi_ijl.

    Maps g/3 to phi and traceless tensors onto the 27-type; a linear
    isomorphism onto the 1 + 27 part of degree 3.
    """
    exact = fs.exact and h.exact
    hr = np.asarray(h.entries) @ np.asarray(fs.inverse_metric)  # h_i^l
    phiT = fs.phi.full_tensor()
    pos = mi.index_position(7, 3)
    out = np.empty(35, dtype=object) if exact else np.zeros(35)
    for idx, p in pos.items():
        i, j, k = idx
        acc = Fraction(0) if exact else 0.0
        for l in range(7):
            acc += (
                hr[i, l] * phiT[l, j, k]
                + hr[j, l] * phiT[i, l, k]
                + hr[k, l] * phiT[i, j, l]
            )
        out[p] = acc
    return KForm(3, out, 7)


def sym2_basis(exact: bool = False):
    """The 28 elementary symmetric tensors E_ab (a <= b)."""
    out = []
    for a in range(7):
        for b in range(a, 7):
            E = (
                np.zeros((7, 7))
                if not exact
                else np.array([[Fraction(0)] * 7 for _ in range(7)], dtype=object)
            )
            one = Fraction(1) if exact else 1.0
            E[a, b] = one
            E[b, a] = one
            out.append(Sym2Tensor(E))
    return out


def sym2_map_matrix(fs: G2Structure) -> np.ndarray:
    """35 x 28 matrix of sym2_to_form over the elementary basis."""
    key = "sym2mat"
    if key not in fs._cache:
        cols = [sym2_to_form(fs, E).coeffs for E in sym2_basis(fs.exact)]
        fs._cache[key] = np.stack(cols, axis=1)
    return fs._cache[key]


SEVEN_PART_TOL = 1e-8


def form_to_sym2(fs: G2Structure, eta: KForm, tol: float = SEVEN_PART_TOL) -> Sym2Tensor:
    """Invert sym2_to_form on the 1 + 27 sector.

    Raises HasSevenComponent when the 7-part of eta exceeds tol
    relative to the size of eta.
    """
    comps = decompose(fs, eta)
    scale = max(eta.norm_max(), 1.0 if not eta.exact else Fraction(1))
    if comps.p7.to_float().norm_max() > tol * float(scale):
        raise HasSevenComponent(
            f"7-part of size {comps.p7.to_float().norm_max():.3e} above tolerance"
        )
    S = sym2_map_matrix(fs)
    if fs.exact and eta.exact:
        sol = exact_solve(S.T @ S, S.T @ eta.coeffs)
    else:
        Sf = np.asarray(S, dtype=float)
        sol, *_ = np.linalg.lstsq(Sf, np.asarray(eta.coeffs, dtype=float), rcond=None)
    H = (
        np.empty((7, 7), dtype=object)
        if fs.exact and eta.exact
        else np.zeros((7, 7))
    )
    pos = 0
    for a in range(7):
        for b in range(a, 7):
            H[a, b] = sol[pos]
            H[b, a] = sol[pos]
            pos += 1
    return Sym2Tensor(H)


def phi_from_psi(psi_target: KForm, seed: G2Structure, tol: float = 1e-13,
                 max_iter: int = 40) -> G2Structure:
    """Invert phi -> psi near a seed structure by Newton iteration.

    The derivative of phi -> psi(phi) is the rescaled duality operator,
    whose inverse is itself, so each step is
    phi <- phi - star_op(psi(phi) - psi_target).
    """
    fs = seed.to_float()
    target = psi_target.to_float()
    for _ in range(max_iter):
        resid = fs.psi - target
        if resid.norm_max() < tol:
            return fs
        step = star_op(fs, resid)
        fs = metric_from_phi(fs.phi - step)
    resid = (fs.psi - target).norm_max()
    if resid < 1e-9:
        return fs
    raise NewtonDiverged(f"psi inversion stalled at residual {resid:.3e}")
