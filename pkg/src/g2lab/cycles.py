"""Affine subtori of the 7-torus with abelian connections: calibration
tests, swept Chern-Simons-type functionals, first variations, the
deformed flux equation, and Abel-Jacobi classes.

Conventions.  A subtorus is spanned by integer columns extendable to a
lattice basis, with real offset; its orientation is the order of the
spanning set.  Connections are rank 1 and stored in normalized units:
``holonomy`` per spanning cycle (mod 1) and ``curvature`` as the real
2-form (i/2pi)F on the parameter torus, integral for honest bundles.
With these units the critical-point equation for the full-torus
functional reads  kappa ^ psi + kappa^3 / 6 = 0.

Paths move offsets, holonomies and (as formula-only directions
transverse to the configuration space) curvature coefficients, by
straight legs; every swept integral is evaluated in closed form.
"""

from dataclasses import dataclass, field, replace
from math import gcd
from itertools import combinations

import numpy as np

from . import multiindex as mi
from .errors import (
    DimensionMismatch,
    FamilyLeavesModuli,
    NewtonDiverged,
    NonIntegralCurvature,
    SingularLinearization,
)
from .forms import KForm, basis_form, interior, pullback, wedge, zero_form
from .structure import G2Structure, star_op, torus_integral

INTEGRALITY_TOL = 1e-9


# -- configuration data ------------------------------------------------------


@dataclass(frozen=True)
class AffineSubtorus:
    """A flat d-torus inside T^7: integer spanning columns plus offset."""

    spanning: tuple  # tuple of d tuples, each an integer 7-vector
    offset: tuple = (0.0,) * 7

    def __post_init__(self):
        U = np.array(self.spanning, dtype=int).T  # 7 x d
        d = U.shape[1]
        if U.shape[0] != 7 or d not in (3, 4, 7):
            raise DimensionMismatch("spanning set must be 3, 4 or 7 vectors in Z^7")
        if np.linalg.matrix_rank(U.astype(float)) != d:
            raise ValueError("spanning vectors are linearly dependent")
        for col in U.T:
            g = 0
            for x in col:
                g = gcd(g, int(x))
            if g != 1:
                raise ValueError("spanning vectors must be gcd-primitive")
        if _minor_gcd(U) != 1:
            raise ValueError("spanning set does not extend to a lattice basis")
        object.__setattr__(self, "spanning", tuple(tuple(int(x) for x in v) for v in self.spanning))
        object.__setattr__(self, "offset", tuple(float(x) % 1.0 for x in self.offset))

    @property
    def dim(self) -> int:
        return len(self.spanning)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.spanning, dtype=float).T  # 7 x d

    def translate(self, v) -> "AffineSubtorus":
        off = tuple((np.asarray(self.offset) + np.asarray(v, dtype=float)) % 1.0)
        return AffineSubtorus(self.spanning, off)

    def reorder_first_two(self) -> "AffineSubtorus":
        s = list(self.spanning)
        s[0], s[1] = s[1], s[0]
        return AffineSubtorus(tuple(s), self.offset)


def _minor_gcd(U: np.ndarray) -> int:
    d = U.shape[1]
    g = 0
    for rows in combinations(range(7), d):
        m = int(round(np.linalg.det(U[list(rows), :].astype(float))))
        g = gcd(g, abs(m))
        if g == 1:
            return 1
    return g


def full_torus() -> AffineSubtorus:
    return AffineSubtorus(tuple(tuple(1 if j == i else 0 for j in range(7)) for i in range(7)))


@dataclass(frozen=True)
class U1Connection:
    """Flat holonomies plus constant normalized curvature on a d-torus."""

    holonomy: tuple
    curvature: KForm  # degree 2 on the parameter torus, units (i/2pi)F
    c2_negative: bool | None = None
    rank: int = 1

    def __post_init__(self):
        if self.curvature.degree != 2:
            raise DimensionMismatch("curvature must be a 2-form")
        if len(self.holonomy) != self.curvature.n:
            raise DimensionMismatch("holonomy length must match torus dimension")
        object.__setattr__(self, "holonomy", tuple(float(h) for h in self.holonomy))

    @property
    def dim(self) -> int:
        return self.curvature.n

    def integrality_defect(self) -> float:
        c = np.asarray(self.curvature.coeffs, dtype=float)
        return float(np.abs(c - np.round(c)).max()) if len(c) else 0.0

    def is_integral(self, tol: float = INTEGRALITY_TOL) -> bool:
        return self.integrality_defect() <= tol

    def shift_holonomy(self, dh) -> "U1Connection":
        h = tuple((np.asarray(self.holonomy) + np.asarray(dh, dtype=float)) % 1.0)
        return replace(self, holonomy=h)


def flat_connection(dim: int, holonomy=None) -> U1Connection:
    h = tuple(holonomy) if holonomy is not None else (0.0,) * dim
    return U1Connection(h, zero_form(2, dim))


# -- path legs ---------------------------------------------------------------


@dataclass(frozen=True)
class Leg:
    kind: str  # "translation" | "holonomy" | "curvature"
    data: np.ndarray
    scale: float = 1.0


@dataclass(frozen=True)
class CyclePath:
    """A piecewise-straight path of configurations at fixed topology.

    Legs act in order on (offset, holonomy, curvature); curvature legs
    are formula directions transverse to the configuration space and are
    rejected by period-sensitive consumers unless explicitly allowed.
    """

    start_sub: AffineSubtorus
    start_conn: U1Connection
    legs: tuple

    @property
    def dim(self) -> int:
        return self.start_sub.dim

    @property
    def kind(self) -> str:
        kinds = {leg.kind for leg in self.legs}
        if kinds <= {"translation"}:
            return "translation"
        if kinds <= {"holonomy", "curvature"}:
            return "connection"
        return "combined"

    def endpoint(self):
        sub, conn = self.start_sub, self.start_conn
        for leg in self.legs:
            if leg.kind == "translation":
                sub = sub.translate(leg.scale * leg.data)
            elif leg.kind == "holonomy":
                conn = conn.shift_holonomy(leg.scale * leg.data)
            else:
                kap = KForm(2, conn.curvature.coeffs + leg.scale * leg.data, conn.dim)
                conn = replace(conn, curvature=kap)
        return sub, conn

    def has_curvature_leg(self) -> bool:
        return any(leg.kind == "curvature" for leg in self.legs)


def straight_path(start_sub, start_conn, translation=None, holonomy=None,
                  curvature=None) -> CyclePath:
    legs = []
    if translation is not None:
        legs.append(Leg("translation", np.asarray(translation, dtype=float)))
    if holonomy is not None:
        legs.append(Leg("holonomy", np.asarray(holonomy, dtype=float)))
    if curvature is not None:
        legs.append(Leg("curvature", np.asarray(curvature, dtype=float)))
    return CyclePath(start_sub, start_conn, tuple(legs))


# -- geometric context -------------------------------------------------------


class CycleContext:
    """Cached pullbacks and induced metric data for one (structure, subtorus)."""

    def __init__(self, fs: G2Structure, sub: AffineSubtorus):
        self.fs = fs.to_float()
        self.sub = sub
        self.U = sub.matrix
        d = sub.dim
        g = np.asarray(self.fs.metric, float)
        self.induced_metric = self.U.T @ g @ self.U
        self.volume = float(np.sqrt(np.linalg.det(self.induced_metric)))
        phi, psi = self.fs.phi, self.fs.psi
        self.p_phi = pullback(phi, self.U)
        self.p_psi = pullback(psi, self.U)
        self.phi_psi = wedge(phi, psi)
        # ambient inhomogeneous factor 1 + phi + psi + phi^psi
        one = KForm(0, np.array([1.0]), 7)
        self.ambient = {0: one, 3: phi, 4: psi, 7: self.phi_psi}

    def normal_basis(self) -> np.ndarray:
        """Columns: a g-orthonormal basis of the metric normal space."""
        g = np.asarray(self.fs.metric, float)
        A = self.U.T @ g  # d x 7; kernel = normal space
        _, s, Vt = np.linalg.svd(A)
        null = Vt[self.sub.dim :].T  # 7 x (7-d)
        M = null.T @ g @ null
        C = np.linalg.cholesky(M)
        return null @ np.linalg.inv(C).T

    def pull(self, a: KForm) -> KForm:
        return pullback(a, self.U)


def _exp_powers(kappa: KForm) -> list:
    """kappa^j / j! for j = 0.. up to the torus dimension."""
    d = kappa.n
    out = [KForm(0, np.array([1.0]), d)]
    acc = out[0]
    fact = 1
    j = 0
    while 2 * (j + 1) <= d:
        j += 1
        fact *= j
        acc = wedge(acc, kappa)
        out.append((1.0 / fact) * acc)
    return out


def _top_after_exp(kappa: KForm, tail: dict) -> float:
    """Top coefficient of exp(kappa) ^ (sum of the tail forms by degree)."""
    d = kappa.n
    total = 0.0
    for ek in _exp_powers(kappa):
        for deg, form in tail.items():
            if form is None:
                continue
            if ek.degree + deg == d:
                total += float(torus_integral(wedge(ek, form)))
    return total


def _ambient_times_alpha(ctx: CycleContext, alpha: KForm | None) -> dict:
    """(1 + phi + psi + phi^psi) ^ alpha as ambient forms keyed by degree."""
    if alpha is None:
        return dict(ctx.ambient)
    out = {}
    for deg, form in ctx.ambient.items():
        if deg + alpha.degree <= 7:
            w = wedge(form, alpha)
            out[w.degree] = w if w.degree not in out else out[w.degree] + w
    return out


def _interior_then_pull(ctx: CycleContext, w: np.ndarray, ambient: dict) -> dict:
    out = {}
    for deg, form in ambient.items():
        if deg == 0:
            continue
        cut = interior(w, form)
        if cut.degree <= ctx.sub.dim:
            p = ctx.pull(cut)
            out[p.degree] = p if p.degree not in out else out[p.degree] + p
    return out


def _pull_all(ctx: CycleContext, ambient: dict) -> dict:
    out = {}
    for deg, form in ambient.items():
        if deg <= ctx.sub.dim:
            p = ctx.pull(form)
            out[p.degree] = p if p.degree not in out else out[p.degree] + p
    return out


def translation_rate(ctx: CycleContext, conn: U1Connection, w: np.ndarray,
                     alpha: KForm | None = None) -> float:
    """d/dt of the swept integral under translation at velocity w."""
    amb = _ambient_times_alpha(ctx, alpha)
    tail = _interior_then_pull(ctx, np.asarray(w, dtype=float), amb)
    return _top_after_exp(conn.curvature, tail)


def holonomy_rate(ctx: CycleContext, conn: U1Connection, dh: np.ndarray,
                  alpha: KForm | None = None) -> float:
    """d/dt of the swept integral under the flat shift dh . ds."""
    d = ctx.sub.dim
    lam = KForm(1, np.asarray(dh, dtype=float), d)
    amb = _ambient_times_alpha(ctx, alpha)
    tail0 = _pull_all(ctx, amb)
    tail = {}
    for deg, form in tail0.items():
        if deg + 1 <= d:
            w = wedge(lam, form)
            tail[w.degree] = w if w.degree not in tail else tail[w.degree] + w
    return _top_after_exp(conn.curvature, tail)


_GAUSS3 = (
    (0.5 - np.sqrt(15) / 10, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.5 + np.sqrt(15) / 10, 5.0 / 18.0),
)


def curvature_leg_value(ctx: CycleContext, conn: U1Connection, dkappa: np.ndarray,
                        alpha: KForm | None = None) -> float:
    """Swept integral along the straight curvature segment kappa + t dkappa.

    Uses the primitive convention a = sum_{a<b} c_ab s_a ds^b, which
    fixes the transverse formula direction; exact Gauss quadrature in t.
    """
    d = ctx.sub.dim
    amb = _ambient_times_alpha(ctx, alpha)
    tail0 = _pull_all(ctx, amb)
    dk = np.asarray(dkappa, dtype=float)
    pos2 = mi.indices(d, 2)

    def integrand(t):
        kap = KForm(2, np.asarray(conn.curvature.coeffs, float) + t * dk, d)
        total = 0.0
        # assemble the degree-(d-1) part of exp(kappa) ^ tail
        acc = np.zeros(mi.dim(d, d - 1))
        for ek in _exp_powers(kap):
            for deg, form in tail0.items():
                if ek.degree + deg == d - 1:
                    acc += wedge(ek, form).coeffs
        G = KForm(d - 1, acc, d)
        for p2, (a, b) in enumerate(pos2):
            c_ab = dk[p2]
            if c_ab == 0.0:
                continue
            # integral of s_a ds^b ^ G over the unit torus
            rest = tuple(sorted(set(range(d)) - {b}))
            sgn = mi.merge_sign((b,), rest)
            total += c_ab * 0.5 * sgn * G.coeffs[mi.index_position(d, d - 1)[rest]]
        return total

    return sum(wt * integrand(t) for t, wt in _GAUSS3)


def curvature_rate(ctx, conn, dkappa, alpha=None) -> float:
    """First variation in the transverse curvature direction at t = 0."""
    d = ctx.sub.dim
    amb = _ambient_times_alpha(ctx, alpha)
    tail0 = _pull_all(ctx, amb)
    dk = np.asarray(dkappa, dtype=float)
    acc = np.zeros(mi.dim(d, d - 1))
    for ek in _exp_powers(conn.curvature):
        for deg, form in tail0.items():
            if ek.degree + deg == d - 1:
                acc += wedge(ek, form).coeffs
    total = 0.0
    for p2, (a, b) in enumerate(mi.indices(d, 2)):
        if dk[p2] == 0.0:
            continue
        rest = tuple(sorted(set(range(d)) - {b}))
        sgn = mi.merge_sign((b,), rest)
        total += dk[p2] * 0.5 * sgn * acc[mi.index_position(d, d - 1)[rest]]
    return total


# -- calibration tests -------------------------------------------------------


@dataclass
class CalibrationReport:
    calibrated: bool
    pairing: float
    volume: float
    normal_defect: float
    anti_aligned: bool


def is_associative(N: AffineSubtorus, fs: G2Structure) -> CalibrationReport:
    """Calibration test phi(u1, u2, u3) = +vol against the normal-form
    criterion max |(X int psi)|_N| over a metric-orthonormal normal basis.
    """
    if N.dim != 3:
        raise DimensionMismatch("associative test needs a 3-torus")
    ctx = CycleContext(fs, N)
    pairing = float(torus_integral(ctx.p_phi))
    defect = 0.0
    for X in ctx.normal_basis().T:
        cut = ctx.pull(interior(X, ctx.fs.psi))
        defect = max(defect, cut.norm_max())
    calibrated = abs(pairing - ctx.volume) < 1e-10
    anti = abs(pairing + ctx.volume) < 1e-10
    return CalibrationReport(calibrated, pairing, ctx.volume, defect, anti)


def is_coassociative(L: AffineSubtorus, fs: G2Structure) -> CalibrationReport:
    """Vanishing of the 3-form on the span, with the dual-calibration
    defect |psi(u) - vol| (orientation per spanning order) as diagnostic."""
    if L.dim != 4:
        raise DimensionMismatch("coassociative test needs a 4-torus")
    ctx = CycleContext(fs, L)
    restriction = ctx.p_phi.norm_max()
    pairing = float(torus_integral(ctx.p_psi))
    coassoc = restriction < 1e-10
    anti = abs(pairing + ctx.volume) < 1e-10
    return CalibrationReport(coassoc, pairing, ctx.volume, restriction, anti)


# -- the swept functional ----------------------------------------------------


def phi_functional(k: int, path: CyclePath, fs: G2Structure,
                   allow_nonintegral: bool = False) -> float:
    """Value of the degree-k swept functional along the path.

    Translation and holonomy legs move inside the configuration space;
    curvature legs are transverse formula directions and require
    allow_nonintegral (the class of an honest bundle cannot move).
    """
    if path.dim != k:
        raise DimensionMismatch(f"k = {k} but path lives on a {path.dim}-torus")
    if not allow_nonintegral:
        if not path.start_conn.is_integral():
            raise NonIntegralCurvature(
                f"curvature defect {path.start_conn.integrality_defect():.2e}"
            )
        if path.has_curvature_leg():
            raise NonIntegralCurvature(
                "curvature legs are transverse formula directions; "
                "pass allow_nonintegral=True to evaluate them"
            )
    total = 0.0
    sub, conn = path.start_sub, path.start_conn
    for leg in path.legs:
        ctx = CycleContext(fs, sub)
        if leg.kind == "translation":
            total += leg.scale * translation_rate(ctx, conn, leg.data)
            sub = sub.translate(leg.scale * leg.data)
        elif leg.kind == "holonomy":
            total += leg.scale * holonomy_rate(ctx, conn, leg.data)
            conn = conn.shift_holonomy(leg.scale * leg.data)
        else:
            total += curvature_leg_value(ctx, conn, leg.scale * leg.data)
            kap = KForm(2, conn.curvature.coeffs + leg.scale * leg.data, conn.dim)
            conn = replace(conn, curvature=kap)
    return total


# -- first variation ---------------------------------------------------------


@dataclass
class VariationReport:
    translation: np.ndarray
    holonomy: np.ndarray
    curvature: np.ndarray
    characterization_holds: bool

    @property
    def max_component(self) -> float:
        vals = [np.abs(self.translation).max() if len(self.translation) else 0.0,
                np.abs(self.holonomy).max() if len(self.holonomy) else 0.0]
        return float(max(vals))

    def is_critical(self, tol: float = 1e-10) -> bool:
        return self.max_component < tol

    def witness_direction(self, floor: float = 1e-3):
        """(slot, index) of a component exceeding the floor, or None."""
        for name, arr in (("translation", self.translation), ("holonomy", self.holonomy)):
            if len(arr) and np.abs(arr).max() >= floor:
                return name, int(np.abs(arr).argmax())
        return None


def d_phi(k: int, point, fs: G2Structure) -> VariationReport:
    """All first-variation components of the degree-k functional at
    (N, A): translations along a metric-orthonormal normal basis,
    flat shifts along each cycle, and the transverse curvature
    directions as diagnostics.
    """
    sub, conn = point
    if sub.dim != k:
        raise DimensionMismatch(f"k = {k} but the torus has dimension {sub.dim}")
    ctx = CycleContext(fs, sub)
    trans = np.array(
        [translation_rate(ctx, conn, X) for X in ctx.normal_basis().T]
    ) if k < 7 else np.zeros(0)
    d = sub.dim
    hol = np.array([holonomy_rate(ctx, conn, e) for e in np.eye(d)])
    curv = np.array(
        [curvature_rate(ctx, conn, e) for e in np.eye(mi.dim(d, 2))]
    )
    characterization = _characterization(k, ctx, conn)
    return VariationReport(trans, hol, curv, characterization)


def _characterization(k: int, ctx: CycleContext, conn: U1Connection,
                      tol: float = 1e-10) -> bool:
    if k == 3:
        assoc = is_associative(ctx.sub, ctx.fs)
        flat = conn.curvature.norm_max() < tol
        return (assoc.calibrated or assoc.anti_aligned) and flat
    if k == 4:
        co = is_coassociative(ctx.sub, ctx.fs)
        sd = curvature_antiselfdual_defect(ctx, conn) < max(
            tol, 1e-10 * max(conn.curvature.norm_max(), 1.0)
        )
        return co.calibrated and sd
    if k == 7:
        res = ddt_residual(conn.curvature, ctx.fs)
        return res.norm_max() < tol
    raise DimensionMismatch(f"k must be 3, 4 or 7, got {k}")


def curvature_antiselfdual_defect(ctx: CycleContext, conn: U1Connection) -> float:
    """Norm of the curvature component pairing nontrivially with the
    normal contractions (X int phi)|_L; zero exactly at critical points.

    On a calibrated 4-torus this is the anti-self-dual part with respect
    to the calibration-aligned orientation (self-dual for the reversed
    convention; the sign is a known convention split and is reported,
    not hidden).
    """
    if ctx.sub.dim != 4:
        raise DimensionMismatch("self-duality lives on 4-dimensional cycles")
    from .forms import gram_matrix

    cols = []
    for X in ctx.normal_basis().T:
        cols.append(ctx.pull(interior(X, ctx.fs.phi)).coeffs)
    S = np.stack(cols, axis=1)  # 6 x 3
    G2 = gram_matrix(np.linalg.inv(ctx.induced_metric), 2, 4)
    M = S.T @ G2 @ S
    proj = S @ np.linalg.solve(M, S.T @ G2 @ np.asarray(conn.curvature.coeffs, float))
    return float(np.abs(proj).max())


def critical_curvature_space(ctx: CycleContext) -> np.ndarray:
    """Orthonormal columns spanning the curvature directions with vanishing
    translation pairing on a coassociative 4-torus (3-dimensional)."""
    from .forms import gram_matrix

    cols = [ctx.pull(interior(X, ctx.fs.phi)).coeffs for X in ctx.normal_basis().T]
    S = np.stack(cols, axis=1)
    G2 = gram_matrix(np.linalg.inv(ctx.induced_metric), 2, 4)
    A = S.T @ G2  # 3 x 6
    _, s, Vt = np.linalg.svd(A)
    return Vt[3:].T  # 6 x 3, orthonormal in coefficient coordinates


# -- deformed flux equation --------------------------------------------------


def ddt_residual(kappa: KForm, fs: G2Structure) -> KForm:
    """Degree-6 residual kappa ^ psi + kappa^3 / 6 of the deformed
    critical-point equation in normalized curvature units."""
    if kappa.degree != 2 or kappa.n != 7:
        raise DimensionMismatch("residual needs an ambient 2-form")
    k2 = wedge(kappa, kappa)
    return wedge(kappa, fs.psi) + (1.0 / 6.0) * wedge(k2, kappa)


def dt_residual(kappa: KForm, fs: G2Structure) -> KForm:
    """Linear flux equation kappa ^ psi; solutions are exactly the
    21 - 7 dimensional subspace killed by the 7-type projection."""
    return wedge(kappa, fs.psi)


def ddt_newton(seed: KForm, fs: G2Structure, tol: float = 1e-10,
               max_iter: int = 25, truncated: bool = False):
    """Gauss-Newton with minimum-norm steps for the deformed equation.

    Returns (solution 2-form, iteration trace).  ``truncated`` solves
    the linear equation instead.
    """
    fs = fs.to_float()
    kappa = np.asarray(seed.coeffs, dtype=float).copy()
    basis2 = np.eye(21)
    trace = []
    resid_fn = dt_residual if truncated else ddt_residual
    for it in range(max_iter):
        kf = KForm(2, kappa)
        r = np.asarray(resid_fn(kf, fs).coeffs, float)
        rnorm = float(np.abs(r).max())
        trace.append(rnorm)
        if rnorm < tol:
            return kf, trace
        J = np.zeros((7, 21))
        for j in range(21):
            dk = KForm(2, basis2[j])
            lin = wedge(dk, fs.psi)
            if not truncated:
                lin = lin + 0.5 * wedge(wedge(kf, kf), dk)
            J[:, j] = lin.coeffs
        s = np.linalg.svd(J, compute_uv=False)
        if s[-1] < 1e-10 * s[0]:
            raise SingularLinearization(f"singular values {s[0]:.2e}..{s[-1]:.2e}")
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        kappa = kappa - step
    raise NewtonDiverged(f"residual {trace[-1]:.3e} after {max_iter} iterations")


# -- Abel-Jacobi classes ------------------------------------------------------


_AJ_L = {3: 4, 4: 3, 7: 4}


@dataclass
class AJClass:
    """A constant-form representative, well defined modulo its lattice."""

    value: KForm
    modulus: object  # JacobianLattice

    def integral_defect(self) -> float:
        return self.modulus.integral_defect(self.value)


def abel_jacobi(k: int, path: CyclePath, fs: G2Structure,
                allow_nonintegral: bool = False) -> AJClass:
    """Solve the pairing equation for the swept Chern character against
    every degree-l basis class; the representative is the constant form
    of degree 7 - l determined by the path (l = 4 for k = 3, 7 and
    l = 3 for k = 4).
    """
    from .jacobian import integer_lattice
    from .structure import ORIENTATION_SIGN

    if path.dim != k:
        raise DimensionMismatch(f"k = {k} but path lives on a {path.dim}-torus")
    if not allow_nonintegral and not path.start_conn.is_integral():
        raise NonIntegralCurvature("integral curvature required for class paths")
    l = _AJ_L[k]
    nl = mi.dim(7, l)
    rates = np.zeros(nl)
    sub, conn = path.start_sub, path.start_conn
    for leg in path.legs:
        ctx = CycleContext(fs, sub)
        for p, idx in enumerate(mi.indices(7, l)):
            alpha = basis_form(idx)
            if leg.kind == "translation":
                rates[p] += leg.scale * translation_rate(ctx, conn, leg.data, alpha)
            elif leg.kind == "holonomy":
                rates[p] += leg.scale * holonomy_rate(ctx, conn, leg.data, alpha)
            else:
                rates[p] += curvature_leg_value(
                    ctx, conn, leg.scale * leg.data, alpha
                )
        if leg.kind == "translation":
            sub = sub.translate(leg.scale * leg.data)
        elif leg.kind == "holonomy":
            conn = conn.shift_holonomy(leg.scale * leg.data)
        else:
            kap = KForm(2, conn.curvature.coeffs + leg.scale * leg.data, conn.dim)
            conn = replace(conn, curvature=kap)
    beta = np.zeros(mi.dim(7, 7 - l))
    posl = mi.index_position(7, l)
    for pj, J in enumerate(mi.indices(7, 7 - l)):
        comp = tuple(sorted(set(range(7)) - set(J)))
        beta[pj] = ORIENTATION_SIGN * mi.merge_sign(J, comp) * rates[posl[comp]]
    return AJClass(KForm(7 - l, beta), integer_lattice(7 - l))


# -- topological number and size bound ---------------------------------------


@dataclass
class PsiReport:
    psi: float
    volume: float
    yang_mills: float
    c2_negative: bool | None

    @property
    def size(self) -> float:
        return self.volume + self.yang_mills

    @property
    def slack(self) -> float:
        return self.size - self.psi

    def equality(self, tol: float = 1e-10) -> bool:
        return abs(self.slack) < tol


def yang_mills(ctx: CycleContext, conn: U1Connection) -> float:
    """(1/2) ||kappa||^2 vol in the induced metric and normalized units."""
    from .forms import inner_product

    kap = conn.curvature
    if kap.n != ctx.sub.dim:
        raise DimensionMismatch("curvature dimension mismatch")
    if ctx.sub.dim == 7:
        g_inv = np.asarray(ctx.fs.inverse_metric, float)
        vol = ctx.fs.norm_factor
    else:
        g_inv = np.linalg.inv(ctx.induced_metric)
        vol = ctx.volume
    val = inner_product(g_inv, kap, kap)
    return 0.5 * float(val) * vol


def psi_functional(k: int, point, fs: G2Structure) -> PsiReport:
    """The topological pairing and the size bound vol + YM.

    For k = 3 and 4 this is the fixed-cycle Chern character pairing; for
    k = 7 the calibration term is the volume form itself, with the
    quadratic flux term entering with the sign that makes the bound
    sharp exactly on the linear-flux solutions.
    """
    sub, conn = point
    if sub.dim != k:
        raise DimensionMismatch(f"k = {k} but torus has dimension {sub.dim}")
    ctx = CycleContext(fs, sub)
    ym = yang_mills(ctx, conn)
    if k == 7:
        # calibration term: the volume form itself; flux term quadratic,
        # with the sign that makes vol + YM - psi = (3/2)|7-part|^2
        kap = conn.curvature
        quad = wedge(wedge(kap, kap), ctx.fs.phi)
        psi_val = ctx.fs.norm_factor + 0.5 * float(torus_integral(quad))
        return PsiReport(psi_val, ctx.fs.norm_factor, ym, conn.c2_negative)
    tail = _pull_all(ctx, dict(ctx.ambient))
    psi_val = _top_after_exp(conn.curvature, tail)
    return PsiReport(psi_val, ctx.volume, ym, conn.c2_negative)
