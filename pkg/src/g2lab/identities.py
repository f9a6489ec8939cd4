"""Pointwise identity suite for the 3-form calculus.

Each check returns a small report object carrying the measured residual
and the inputs' provenance, so the command-line verifier can surface
exact certificates (rational mode) next to float tolerances.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DegreeMismatch, StepLeavesPositiveCone
from .forms import KForm, Sym2Tensor, inner_product, wedge
from .numdiff import DEFAULT_STEP, central
from .structure import (
    G2Structure,
    decompose,
    metric_from_phi,
    phi_from_psi,
    star_op,
    sym2_to_form,
    torus_integral,
)


@dataclass
class CheckReport:
    name: str
    max_residual: float
    exact: bool = False
    details: dict = field(default_factory=dict)

    @property
    def certified_zero(self) -> bool:
        return self.exact and self.max_residual == 0


def check_contraction_identity(fs: G2Structure, exact: bool | None = None) -> CheckReport:
    """Verify phi_ijk phi_abc g^kc = g_ia g_jb - g_ib g_ja - psi_ijab
    over all 7^4 index tuples.

    In exact mode (rational structure) a zero max-residual is a
    certificate; in float mode the max |residual| is reported.
    """
    if exact is None:
        exact = fs.exact
    if exact and not fs.exact:
        raise ValueError("exact certification needs a rational structure")
    phiT = fs.phi.full_tensor()
    psiT = fs.psi.full_tensor()
    g = np.asarray(fs.metric)
    g_inv = np.asarray(fs.inverse_metric)
    if not exact:
        phiT = np.asarray(phiT, dtype=float)
        psiT = np.asarray(psiT, dtype=float)
        lhs = np.einsum("ijk,abc,kc->ijab", phiT, phiT, g_inv)
        rhs = (
            np.einsum("ia,jb->ijab", g, g)
            - np.einsum("ib,ja->ijab", g, g)
            - psiT
        )
        return CheckReport("contraction-identity", float(np.abs(lhs - rhs).max()))
    worst = Fraction(0)
    # contract phi's last index against g^{-1} once
    phi_up = np.empty((7, 7, 7), dtype=object)
    for i in range(7):
        for j in range(7):
            for c in range(7):
                phi_up[i, j, c] = sum(phiT[i, j, k] * g_inv[k, c] for k in range(7))
    for i in range(7):
        for j in range(7):
            for a in range(7):
                for b in range(7):
                    lhs = sum(phi_up[i, j, c] * phiT[a, b, c] for c in range(7))
                    rhs = g[i, a] * g[j, b] - g[i, b] * g[j, a] - psiT[i, j, a, b]
                    r = abs(lhs - rhs)
                    if r > worst:
                        worst = r
    return CheckReport(
        "contraction-identity", float(worst), exact=True, details={"residual": worst}
    )


def check_star_derivative(
    fs: G2Structure,
    eta: KForm,
    h: float = DEFAULT_STEP,
    richardson: bool = False,
) -> CheckReport:
    """Finite-difference derivative of the dual 4-form along eta against
    the closed form with weights (4/3, 1, -1); also the degree-4 family
    along theta = star_op(eta) against the (3/4, 1, -1) formula.
    """
    fs = fs.to_float()
    eta = eta.to_float()
    scale = max(eta.norm_max(), 1e-30)
    step = h * max(fs.phi.norm_max(), 1.0) / scale

    def psi_of(t):
        try:
            return metric_from_phi(fs.phi + t * eta).psi.coeffs
        except Exception as e:
            raise StepLeavesPositiveCone(str(e))

    fd = central(psi_of, 0.0, step, richardson=richardson)
    closed = star_op(fs, eta)
    denom = max(np.abs(np.asarray(closed.coeffs, float)).max(), 1.0)
    res3 = float(np.abs(fd - closed.coeffs).max()) / denom

    theta = closed  # a degree-4 variation with known closed-form derivative

    def phi_of(t):
        target = KForm(4, fs.psi.coeffs + t * theta.coeffs)
        try:
            return phi_from_psi(target, fs).phi.coeffs
        except Exception as e:
            raise StepLeavesPositiveCone(str(e))

    fd4 = central(phi_of, 0.0, step, richardson=richardson)
    closed4 = star_op(fs, theta)
    denom4 = max(np.abs(np.asarray(closed4.coeffs, float)).max(), 1.0)
    res4 = float(np.abs(fd4 - closed4.coeffs).max()) / denom4
    return CheckReport(
        "star-derivative",
        max(res3, res4),
        details={"degree3": res3, "degree4": res4},
    )


def check_metric_volume_variation(
    fs: G2Structure, h_k: Sym2Tensor, h: float = DEFAULT_STEP
) -> CheckReport:
    """Variation of the inverse metric and volume along a 1 + 27 direction:
    d g^{ab} = -2 h^{ab} and d vol = Tr(h) vol.
    """
    fs = fs.to_float()
    eta = sym2_to_form(fs, h_k)
    scale = max(eta.norm_max(), 1e-30)
    step = h * max(fs.phi.norm_max(), 1.0) / scale

    def structure_of(t):
        try:
            return metric_from_phi(fs.phi + t * eta)
        except Exception as e:
            raise StepLeavesPositiveCone(str(e))

    fd_ginv = central(lambda t: structure_of(t).inverse_metric, 0.0, step)
    fd_vol = central(lambda t: structure_of(t).norm_factor, 0.0, step)
    g_inv = np.asarray(fs.inverse_metric, float)
    h_up = g_inv @ np.asarray(h_k.entries, float) @ g_inv
    res_g = float(np.abs(fd_ginv + 2.0 * h_up).max()) / max(np.abs(h_up).max(), 1.0)
    trace = float(h_k.trace(fs.inverse_metric))
    res_v = abs(fd_vol - trace * fs.norm_factor) / max(abs(trace * fs.norm_factor), 1.0)
    return CheckReport(
        "metric-volume-variation",
        max(res_g, res_v),
        details={"inverse_metric": res_g, "volume": res_v},
    )


def l2_pairing(fs: G2Structure, a: KForm, b: KForm):
    """Integrated inner product over the unit-covolume torus."""
    if a.degree != b.degree:
        raise DegreeMismatch(f"degree {a.degree} vs {b.degree}")
    return inner_product(fs.inverse_metric, a, b) * fs.norm_factor


def check_trace_formula(fs: G2Structure, h1: Sym2Tensor, h2: Sym2Tensor) -> CheckReport:
    """L2 pairing of 1 + 27 forms against Tr(h1)Tr(h2) + 2 Tr(h1 h2)."""
    eta1 = sym2_to_form(fs, h1)
    eta2 = sym2_to_form(fs, h2)
    lhs = l2_pairing(fs, eta1, eta2)
    g_inv = np.asarray(fs.inverse_metric)
    m1 = np.asarray(h1.entries)
    m2 = np.asarray(h2.entries)
    tr12 = np.trace(m1 @ g_inv @ m2 @ g_inv)
    rhs = (h1.trace(g_inv) * h2.trace(g_inv) + 2 * tr12) * fs.norm_factor
    resid = abs(float(lhs - rhs))
    exact = fs.exact and h1.exact and h2.exact
    return CheckReport(
        "l2-trace-formula",
        resid / max(abs(float(rhs)), 1.0),
        exact=exact,
        details={"lhs": float(lhs), "rhs": float(rhs)},
    )
