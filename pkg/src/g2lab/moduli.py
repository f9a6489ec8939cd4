"""Flat-chart geometry of the 35-dimensional space of constant positive
3-forms on the unit 7-torus.

On the torus every constant form is harmonic and closed, so the chart
coordinates are the coefficients themselves and the flat connection is
the coordinate derivative.  The superpotential is three times the total
volume; its gradient pairs chart directions against the dual 4-form,
its Hessian is the moduli metric of signature (8, 27), and its exact
third derivative is twice the Yukawa coupling on the 1 + 27 sector.
"""

from dataclasses import dataclass

import numpy as np

from . import multiindex as mi
from .errors import HasSevenComponent, NotPositive, StepLeavesPositiveCone
from .forms import KForm, Sym2Tensor, wedge
from .numdiff import DEFAULT_THIRD_STEP, hessian as fd_hessian, third_symmetric
from .structure import (
    G2Structure,
    ORIENTATION_SIGN,
    decompose,
    form_to_sym2,
    metric_from_phi,
    star_op_matrix,
    sym2_to_form,
    torus_integral,
    volume_scalar,
)

SEVEN_DIR_TOL = 1e-8


def wedge_pairing_34() -> np.ndarray:
    """Matrix Q with integral(a ^ b) = a.coeffs @ Q @ b.coeffs for a in
    degree 3, b in degree 4, on the oriented unit torus."""
    Q = np.zeros((35, 35))
    for p, p_c, s in mi.complement_table(7, 3):
        Q[p, p_c] = s * ORIENTATION_SIGN
    return Q


_Q34 = wedge_pairing_34()


class FlatChart:
    """Coordinates on the positive cone adapted to a center structure.

    Basis vector 0 is the center 3-form itself; vectors 1..7 span the
    7-type subspace and 8..34 the 27-type subspace at the center, each
    orthonormal for the integrated inner product there.
    """

    def __init__(self, center: G2Structure):
        center = center.to_float()
        self.center = center
        G = center.gram(3) * center.norm_factor
        P = center.projectors(3)
        cols = [np.asarray(center.phi.coeffs, dtype=float)]
        for typ, rank in ((7, 7), (27, 27)):
            span = _range_basis(np.asarray(P[typ], float), rank)
            cols.extend(list(_g_orthonormalize(span, G).T))
        B = np.stack(cols, axis=1)
        self.basis_matrix = B  # 35 x 35, column i = coefficients of eta_i
        self.basis = [KForm(3, B[:, i].copy()) for i in range(35)]
        self.center_coords = np.linalg.solve(B, np.asarray(center.phi.coeffs, float))

    def phi_coeffs(self, coords: np.ndarray) -> np.ndarray:
        return self.basis_matrix @ np.asarray(coords, dtype=float)

    def form(self, coords: np.ndarray) -> KForm:
        return KForm(3, self.phi_coeffs(coords))

    def coords_of(self, form: KForm) -> np.ndarray:
        return np.linalg.solve(self.basis_matrix, np.asarray(form.coeffs, float))

    def point(self, coords: np.ndarray) -> "ModuliPoint":
        return ModuliPoint(self, np.asarray(coords, dtype=float))


def _range_basis(P: np.ndarray, rank: int) -> np.ndarray:
    U, s, _ = np.linalg.svd(P)
    if not (s[rank - 1] > 0.5 and (len(s) == rank or s[rank] < 0.5)):
        raise ValueError("projector rank mismatch")
    return U[:, :rank]


def _g_orthonormalize(span: np.ndarray, G: np.ndarray) -> np.ndarray:
    M = span.T @ G @ span
    C = np.linalg.cholesky(M)
    return span @ np.linalg.inv(C).T


class ModuliPoint:
    """A positive point of the chart; construction validates positivity."""

    def __init__(self, chart: FlatChart, coords: np.ndarray):
        self.chart = chart
        self.coords = np.asarray(coords, dtype=float)
        self.phi = chart.form(self.coords)
        self._structure = None
        # fails with NotPositive when the cone is left
        self.volume = volume_scalar(self.phi)

    @property
    def structure(self) -> G2Structure:
        if self._structure is None:
            self._structure = metric_from_phi(self.phi)
        return self._structure


def standard_chart() -> FlatChart:
    from .structure import standard_phi

    return FlatChart(metric_from_phi(standard_phi()))


def random_positive_point(
    chart: FlatChart, rng: np.random.Generator, radius: float = 0.25
) -> ModuliPoint:
    """Rejection-sample a positive point near the chart center."""
    for _ in range(100):
        delta = rng.normal(size=35)
        delta *= radius / np.linalg.norm(delta)
        try:
            return chart.point(chart.center_coords + delta)
        except NotPositive:
            continue
    raise NotPositive("no positive point found at this radius")


# -- superpotential and derivatives -------------------------------------


def superpotential(p: ModuliPoint) -> float:
    """Three times the total volume; cross-checked against the pairing
    expression (3/7) integral(phi ^ dual) in the agreement report."""
    return 3.0 * p.volume


def superpotential_pairing(p: ModuliPoint) -> float:
    fs = p.structure
    return (3.0 / 7.0) * float(torus_integral(wedge(fs.phi, fs.psi)))


def _f_of_coords(chart: FlatChart, coords: np.ndarray) -> float:
    try:
        return 3.0 * volume_scalar(chart.form(coords))
    except NotPositive as e:
        raise StepLeavesPositiveCone(str(e))


def gradient_f(chart: FlatChart, p: ModuliPoint) -> np.ndarray:
    """Closed-form gradient: component j is integral(eta_j ^ psi)."""
    psi = np.asarray(p.structure.psi.coeffs, float)
    return chart.basis_matrix.T @ (_Q34 @ psi)


def gradient_f_fd(chart: FlatChart, p: ModuliPoint, h: float = 1e-5) -> np.ndarray:
    from .numdiff import gradient

    return gradient(lambda x: _f_of_coords(chart, x), p.coords, h=h)


@dataclass
class HessianData:
    gradient: np.ndarray
    hessian: np.ndarray
    eigenvalues: np.ndarray
    signature: tuple

    @property
    def n_plus(self) -> int:
        return self.signature[0]

    @property
    def n_minus(self) -> int:
        return self.signature[1]


def _signature(H: np.ndarray, tol: float = 1e-8) -> tuple:
    ev = np.linalg.eigvalsh(H)
    scale = max(np.abs(ev).max(), 1.0)
    n_plus = int((ev > tol * scale).sum())
    n_minus = int((ev < -tol * scale).sum())
    return (n_plus, n_minus), ev


def hessian_matrix(chart: FlatChart, p: ModuliPoint) -> np.ndarray:
    """Moduli metric in chart coordinates via the duality pairing
    integral(eta_i ^ star_op eta_j) at the point."""
    fs = p.structure
    S = star_op_matrix(fs, 3)
    return chart.basis_matrix.T @ _Q34 @ S @ chart.basis_matrix


def hessian_projection_form(chart: FlatChart, p: ModuliPoint) -> np.ndarray:
    """Same metric through the (4/3, 1, -1) weighted projections."""
    fs = p.structure
    P = fs.projectors(3)
    G = fs.gram(3) * fs.norm_factor
    B = chart.basis_matrix
    out = np.zeros((35, 35))
    for w, typ in ((4.0 / 3.0, 1), (1.0, 7), (-1.0, 27)):
        PB = np.asarray(P[typ], float) @ B
        out += w * PB.T @ G @ PB
    return out


def hessian_fd(chart: FlatChart, p: ModuliPoint, h: float = 1e-3) -> np.ndarray:
    return fd_hessian(lambda x: _f_of_coords(chart, x), p.coords, h=h)


def hessian_G(chart: FlatChart, p: ModuliPoint, fd_step: float = 1e-3) -> HessianData:
    H = hessian_matrix(chart, p)
    sig, ev = _signature(H)
    return HessianData(
        gradient=gradient_f(chart, p), hessian=H, eigenvalues=ev, signature=sig
    )


# -- Yukawa coupling -----------------------------------------------------


def _raised_avatar(fs: G2Structure, eta: KForm) -> np.ndarray:
    h = form_to_sym2(fs, eta)
    g_inv = np.asarray(fs.inverse_metric, float)
    return g_inv @ np.asarray(h.entries, float) @ g_inv


def yukawa(fs: G2Structure, eta_i: KForm, eta_j: KForm, eta_k: KForm) -> float:
    """Cubic coupling of three 1 + 27 classes through the double 3-form
    contraction of their symmetric-tensor avatars."""
    fs = fs.to_float()
    phiT = np.asarray(fs.phi.full_tensor(), float)
    hs = [_raised_avatar(fs, e.to_float()) for e in (eta_i, eta_j, eta_k)]
    val = np.einsum("abc,xyz,ax,by,cz->", phiT, phiT, *hs, optimize=True)
    return float(val) * fs.norm_factor


def yukawa_from_tensors(
    fs: G2Structure, h1: Sym2Tensor, h2: Sym2Tensor, h3: Sym2Tensor
) -> float:
    fs = fs.to_float()
    phiT = np.asarray(fs.phi.full_tensor(), float)
    g_inv = np.asarray(fs.inverse_metric, float)
    hs = [g_inv @ np.asarray(h.entries, float) @ g_inv for h in (h1, h2, h3)]
    val = np.einsum("abc,xyz,ax,by,cz->", phiT, phiT, *hs, optimize=True)
    return float(val) * fs.norm_factor


def require_no_seven_part(fs: G2Structure, eta: KForm, tol: float = SEVEN_DIR_TOL):
    p7 = decompose(fs, eta.to_float()).p7
    if p7.norm_max() > tol * max(eta.to_float().norm_max(), 1.0):
        raise HasSevenComponent(f"7-part of size {p7.norm_max():.3e}")


def check_third_derivative(
    chart: FlatChart,
    p: ModuliPoint,
    directions,
    h: float = DEFAULT_THIRD_STEP,
    richardson: bool = True,
):
    """Triple finite difference of the superpotential along 1 + 27
    directions against twice the Yukawa coupling; returns
    (fd_value, 2*yukawa, relative_error)."""
    fs = p.structure
    u, v, w = directions
    for d in (u, v, w):
        require_no_seven_part(fs, d)
    cu, cv, cw = (chart.coords_of(d) for d in (u, v, w))

    def f3(s, t, r):
        return _f_of_coords(chart, p.coords + s * cu + t * cv + r * cw)

    scale = max(np.linalg.norm(p.coords), 1.0)
    fd = third_symmetric(
        f3,
        h=h * scale / max(max(np.linalg.norm(c) for c in (cu, cv, cw)), 1e-12),
        richardson=richardson,
    )
    target = 2.0 * yukawa(fs, u, v, w)
    rel = abs(fd - target) / max(abs(target), 1.0)
    return fd, target, rel


def log_potential_checks(chart: FlatChart, p: ModuliPoint, n_sample: int = 6,
                         rng: np.random.Generator | None = None,
                         h: float = 1e-3):
    """Hessian of -log f on the 1 + 27 sector against the normalized L2
    pairing (1/f) <<eta_i, eta_j>>; returns (max_rel_err, min_eigenvalue).
    """
    from .identities import l2_pairing

    fs = p.structure
    f0 = superpotential(p)
    rng = rng or np.random.default_rng(0)
    dirs = [fs.phi]
    P27 = np.asarray(fs.projectors(3)[27], float)
    for _ in range(n_sample - 1):
        v = P27 @ rng.normal(size=35)
        dirs.append(KForm(3, v / np.linalg.norm(v)))
    cds = [chart.coords_of(d) for d in dirs]

    def F(x):
        return -np.log(_f_of_coords(chart, x))

    m = len(dirs)
    H = np.zeros((m, m))
    for a in range(m):
        for b in range(a, m):
            def Fab(s, t, a=a, b=b):
                return F(p.coords + s * cds[a] + t * cds[b])
            from .numdiff import mixed_second
            H[a, b] = H[b, a] = mixed_second(Fab, h=h)
    target = np.array(
        [[l2_pairing(fs, di, dj) / f0 for dj in dirs] for di in dirs]
    )
    rel = np.abs(H - target).max() / max(np.abs(target).max(), 1.0)
    min_eig = float(np.linalg.eigvalsh(target).min())
    return rel, min_eig, H, target


def check_trace_cubic_lemma(
    fs: G2Structure, h1: Sym2Tensor, h2: Sym2Tensor, h3: Sym2Tensor
):
    """Contraction of two 1 + 27 forms against a raised symmetric tensor,
    compared with 2 Y plus the cyclic trace corrections; returns
    (lhs, rhs, residual)."""
    fs = fs.to_float()
    eta1 = sym2_to_form(fs, h1).full_tensor()
    eta2 = sym2_to_form(fs, h2).full_tensor()
    g_inv = np.asarray(fs.inverse_metric, float)
    h3u = g_inv @ np.asarray(h3.entries, float) @ g_inv
    lhs = (
        np.einsum(
            "ijk,abc,ia,jb,kc->",
            np.asarray(eta1, float),
            np.asarray(eta2, float),
            h3u,
            g_inv,
            g_inv,
            optimize=True,
        )
        * fs.norm_factor
    )
    y = yukawa_from_tensors(fs, h1, h2, h3)
    ms = [np.asarray(h.entries, float) for h in (h1, h2, h3)]
    tr = [float((m * g_inv.T).sum()) for m in ms]
    tr_pair = lambda a, b: float(np.trace(ms[a] @ g_inv @ ms[b] @ g_inv))
    corr = (
        tr[0] * tr_pair(1, 2) + tr[1] * tr_pair(2, 0) + tr[2] * tr_pair(0, 1)
    ) * fs.norm_factor
    rhs = 2.0 * y + 2.0 * corr
    return float(lhs), float(rhs), abs(float(lhs) - float(rhs))
