"""Pseudo-Kahler linear algebra of the universal torus fibration over
the flat chart.

Tangent vectors to the total space are pairs: (degree-3, degree-4) in
the cotangent-type model and (degree-3, degree-3) in the tangent-type
model.  Both carry a symplectic form, a compatible complex structure
squaring to -1, and a metric of signature (16, 54); the two models are
exchanged by applying the rescaled duality operator on the fiber slot.
The fiber lattice is the image of the integer degree-3 classes under
that operator, and the base geometry is governed by the Legendre
transform of the superpotential.
"""

from dataclasses import dataclass

import numpy as np

from . import multiindex as mi
from .errors import DegenerateHessian, StepLeavesPositiveCone
from .forms import KForm, basis_form, wedge
from .moduli import (
    FlatChart,
    ModuliPoint,
    _Q34,
    _f_of_coords,
    gradient_f,
    hessian_matrix,
    superpotential,
    yukawa,
)
from .numdiff import central, mixed_second
from .structure import G2Structure, star_op, star_op_matrix, torus_integral


@dataclass(frozen=True)
class JacobianVector:
    """Tangent vector in the cotangent-type model: base + degree-4 fiber."""

    eta: KForm
    theta: KForm

    def __post_init__(self):
        assert self.eta.degree == 3 and self.theta.degree == 4


@dataclass(frozen=True)
class TildeJacobianVector:
    """Tangent vector in the tangent-type model: base + degree-3 fiber."""

    eta: KForm
    mu: KForm

    def __post_init__(self):
        assert self.eta.degree == 3 and self.mu.degree == 3


# -- cotangent-type structures -------------------------------------------


def omega(v1: JacobianVector, v2: JacobianVector) -> float:
    """Canonical symplectic pairing integral(eta1 ^ theta2 - eta2 ^ theta1)."""
    return float(
        torus_integral(wedge(v1.eta, v2.theta)) - torus_integral(wedge(v2.eta, v1.theta))
    )


def alpha_primitive(basepoint, v: JacobianVector) -> float:
    """Value of the canonical primitive of omega at (phi, D):
    (1/2) integral(phi ^ theta) - (1/2) integral(D ^ eta)."""
    phi, D = basepoint
    return 0.5 * float(torus_integral(wedge(phi, v.theta))) - 0.5 * float(
        torus_integral(wedge(v.eta, D))
    )


def gJ(fs: G2Structure, v1: JacobianVector, v2: JacobianVector) -> float:
    """Fiberwise metric integral(eta1 ^ star eta2) + integral(theta1 ^ star theta2)."""
    return float(
        torus_integral(wedge(v1.eta, star_op(fs, v2.eta)))
        + torus_integral(wedge(star_op(fs, v2.theta), v1.theta))
    )


def Jop(fs: G2Structure, v: JacobianVector) -> JacobianVector:
    """Complex structure (eta, theta) -> (-star theta, star eta)."""
    return JacobianVector(eta=-1.0 * star_op(fs, v.theta), theta=star_op(fs, v.eta))


def omega_matrix() -> np.ndarray:
    """The 70 x 70 matrix of omega on the ascending-index product basis."""
    W = np.zeros((70, 70))
    W[:35, 35:] = _Q34
    W[35:, :35] = -_Q34.T
    return W


def gJ_matrix(fs: G2Structure) -> np.ndarray:
    M3 = _Q34 @ star_op_matrix(fs, 3)
    M4 = _Q34.T @ star_op_matrix(fs, 4)
    out = np.zeros((70, 70))
    out[:35, :35] = M3
    out[35:, 35:] = M4
    return out


# -- tangent-type structures ----------------------------------------------


def tilde_omega(fs: G2Structure, v1: TildeJacobianVector, v2: TildeJacobianVector) -> float:
    return float(
        torus_integral(wedge(v1.eta, star_op(fs, v2.mu)))
        - torus_integral(wedge(v2.eta, star_op(fs, v1.mu)))
    )


def tilde_gJ(fs: G2Structure, v1: TildeJacobianVector, v2: TildeJacobianVector) -> float:
    return float(
        torus_integral(wedge(v1.eta, star_op(fs, v2.eta)))
        + torus_integral(wedge(v1.mu, star_op(fs, v2.mu)))
    )


def tilde_Jop(v: TildeJacobianVector) -> TildeJacobianVector:
    return TildeJacobianVector(eta=-1.0 * v.mu, mu=v.eta)


def alpha_tilde(fs: G2Structure, C: KForm, v: TildeJacobianVector) -> float:
    """Primitive of the tangent-model symplectic form at (phi, C):

        (1/2) integral(mu ^ psi_phi) - (1/2) integral(C ^ star_op eta).

    The first term pairs the fiber direction against the dual 4-form
    itself (not star_op phi, which would overcount by 4/3); with this
    normalization the finite-difference exterior derivative reproduces
    the symplectic form exactly.
    """
    return 0.5 * float(torus_integral(wedge(v.mu, fs.psi))) - 0.5 * float(
        torus_integral(wedge(C, star_op(fs, v.eta)))
    )


def tilde_to_cotangent(fs: G2Structure, v: TildeJacobianVector) -> JacobianVector:
    """Fiberwise duality theta = star_op(mu) matching the two models."""
    return JacobianVector(eta=v.eta, theta=star_op(fs, v.mu))


# -- Legendre transform ----------------------------------------------------


@dataclass
class LegendreChart:
    """Dual coordinates x_k = f_k at a base point, with the transform value."""

    chart: FlatChart
    point: ModuliPoint
    dual_coords: np.ndarray
    fhat: float
    hessian: np.ndarray

    def dual_of(self, coords: np.ndarray) -> np.ndarray:
        return gradient_f(self.chart, self.chart.point(coords))

    def primal_of(self, dual: np.ndarray, max_iter: int = 50, tol: float = 1e-12):
        """Invert the gradient map by Newton from the chart base point."""
        x = self.point.coords.copy()
        for _ in range(max_iter):
            p = self.chart.point(x)
            r = np.asarray(dual) - gradient_f(self.chart, p)
            if np.abs(r).max() < tol:
                return x
            H = hessian_matrix(self.chart, p)
            x = x + np.linalg.solve(H, r)
        return x

    def fhat_of_dual(self, dual: np.ndarray) -> float:
        x = self.primal_of(dual)
        return float(np.asarray(dual) @ x - _f_of_coords(self.chart, x))


def legendre(chart: FlatChart, p: ModuliPoint, eig_tol: float = 1e-10) -> LegendreChart:
    """Dual coordinates, Legendre transform and nondegeneracy data at p.

    The transform value always equals 4/3 of the superpotential; the
    returned object also carries the Hessian for inverse-map checks.
    """
    H = hessian_matrix(chart, p)
    ev = np.abs(np.linalg.eigvalsh(H))
    if ev.min() < eig_tol * ev.max():
        raise DegenerateHessian(f"eigenvalue ratio {ev.min() / ev.max():.3e}")
    x_dual = gradient_f(chart, p)
    fhat = float(x_dual @ p.coords - superpotential(p))
    return LegendreChart(chart=chart, point=p, dual_coords=x_dual, fhat=fhat, hessian=H)


def dual_hessian_fd(lc: LegendreChart, h: float = 1e-4, directions=None) -> np.ndarray:
    """Finite-difference Hessian of the transform in dual coordinates.

    Differentiates the exact dual gradient (the primal coordinates) by
    central differences; equals the inverse primal Hessian.
    """
    n = 35
    dirs = directions if directions is not None else range(n)
    scale = max(np.abs(lc.dual_coords).max(), 1.0)
    cols = np.zeros((n, len(list(dirs))))
    for out_col, k in enumerate(dirs):
        e = np.zeros(n)
        e[k] = h * scale
        xp = lc.primal_of(lc.dual_coords + e)
        xm = lc.primal_of(lc.dual_coords - e)
        cols[:, out_col] = (xp - xm) / (2.0 * h * scale)
    return cols


def dual_hessian_fd_values(lc: LegendreChart, sub: np.ndarray, h: float = 3e-4) -> np.ndarray:
    """Value-based second differences of fhat on a coordinate subset."""
    m = len(sub)
    out = np.zeros((m, m))
    scale = max(np.abs(lc.dual_coords).max(), 1.0)

    def fhat_at(delta):
        return lc.fhat_of_dual(lc.dual_coords + delta)

    for a in range(m):
        for b in range(a, m):
            ea = np.zeros(35)
            eb = np.zeros(35)
            ea[sub[a]] = h * scale
            eb[sub[b]] = h * scale
            v = (
                fhat_at(ea + eb) - fhat_at(ea - eb) - fhat_at(-ea + eb) + fhat_at(-ea - eb)
            ) / (4.0 * (h * scale) ** 2)
            out[a, b] = out[b, a] = v
    return out


# -- structural checks ------------------------------------------------------


def check_lagrangian_graph(chart: FlatChart, p: ModuliPoint, eta1: KForm, eta2: KForm):
    """The graph direction pairs (eta, star_op eta) are omega-isotropic,
    and the graph tangency matches the finite-difference derivative of
    the dual form along each direction.  Returns (omega_value, fd_defect).
    """
    fs = p.structure
    v1 = JacobianVector(eta1, star_op(fs, eta1))
    v2 = JacobianVector(eta2, star_op(fs, eta2))
    om = omega(v1, v2)

    from .structure import metric_from_phi

    def psi_c(t, eta=eta1):
        try:
            return metric_from_phi(KForm(3, fs.phi.coeffs + t * eta.coeffs)).psi.coeffs
        except Exception as e:
            raise StepLeavesPositiveCone(str(e))

    step = 1e-4 * max(fs.phi.norm_max(), 1.0) / max(eta1.norm_max(), 1e-30)
    fd = central(psi_c, 0.0, step)
    defect = float(np.abs(fd - v1.theta.coeffs).max())
    return om, defect


def closedness_and_integrability(
    chart: FlatChart,
    p: ModuliPoint,
    triples,
    h: float = 1e-3,
):
    """Finite-difference symmetry of the metric derivative in the base
    slot: d_l G_ij must equal d_i G_lj.  Returns the max asymmetry over
    the supplied (i, j, l) index triples.
    """
    needed = sorted({t[0] for t in triples} | {t[2] for t in triples})
    dG = {}
    scale = max(np.abs(p.coords).max(), 1.0)
    for l in needed:
        e = np.zeros(35)
        e[l] = h * scale
        try:
            Hp = hessian_matrix(chart, chart.point(p.coords + e))
            Hm = hessian_matrix(chart, chart.point(p.coords - e))
        except Exception as err:
            raise StepLeavesPositiveCone(str(err))
        dG[l] = (Hp - Hm) / (2.0 * h * scale)
    worst = 0.0
    for i, j, l in triples:
        worst = max(worst, abs(dG[l][i, j] - dG[i][l, j]))
    return worst


def cubic_form_check(
    chart: FlatChart,
    p: ModuliPoint,
    eta1: KForm,
    eta2: KForm,
    eta3: KForm,
    h: float = 1e-3,
):
    """Derivative of the metric pairing of eta1, eta2 along eta3 against
    twice the Yukawa coupling; returns (fd, 2*yukawa, relative_error)."""
    from .moduli import require_no_seven_part
    from .structure import metric_from_phi

    fs = p.structure
    for d in (eta1, eta2, eta3):
        require_no_seven_part(fs, d)
    c1 = np.asarray(eta1.coeffs, float)
    c2 = np.asarray(eta2.coeffs, float)

    def G12(t):
        try:
            fst = metric_from_phi(KForm(3, fs.phi.coeffs + t * eta3.coeffs))
        except Exception as e:
            raise StepLeavesPositiveCone(str(e))
        return float(c1 @ _Q34 @ star_op_matrix(fst, 3) @ c2)

    step = h * max(fs.phi.norm_max(), 1.0) / max(eta3.norm_max(), 1e-30)
    fd = central(G12, 0.0, step, richardson=True)
    target = 2.0 * yukawa(fs, eta1, eta2, eta3)
    rel = abs(fd - target) / max(abs(target), 1.0)
    return fd, target, rel


# -- the fiber lattice ------------------------------------------------------


@dataclass
class JacobianLattice:
    """A full-rank lattice of constant forms given by generator columns."""

    degree: int
    generators: np.ndarray  # (dim, dim) columns in the ascending-index basis
    covolume: float

    def coordinates(self, form: KForm) -> np.ndarray:
        return np.linalg.solve(self.generators, np.asarray(form.coeffs, float))

    def reduce(self, form: KForm, tol: float = 1e-9) -> KForm:
        """Representative with generator coordinates in [0, 1).

        Coordinates within tol of an integer snap to zero so that lattice
        vectors reduce exactly."""
        c = self.coordinates(form)
        r = c - np.floor(c)
        r = np.where(r > 1.0 - tol, r - 1.0, r)
        r = np.where(np.abs(r) < tol, 0.0, r)
        return KForm(self.degree, self.generators @ r)

    def integral_defect(self, form: KForm) -> float:
        """Distance of the generator coordinates from the integer lattice."""
        c = self.coordinates(form)
        return float(np.abs(c - np.round(c)).max())


def jacobian_lattice(fs: G2Structure) -> JacobianLattice:
    """Image of the integer degree-3 classes under the duality operator:
    the fiber lattice of the cotangent-type model in degree 4."""
    S = star_op_matrix(fs, 3)
    return JacobianLattice(degree=4, generators=S.copy(), covolume=abs(float(np.linalg.det(S))))


def integer_lattice(degree: int) -> JacobianLattice:
    """The plain integer lattice on ascending-index coefficients."""
    n = mi.dim(7, degree)
    return JacobianLattice(degree=degree, generators=np.eye(n), covolume=1.0)
