"""Central finite-difference stencils used by the verification suites.

Defaults follow the workbench conventions: step 1e-4 relative to the
base point for first derivatives, 1e-2 with Richardson extrapolation
for third derivatives (third differences lose about two thirds of the
float mantissa).
"""

import numpy as np

DEFAULT_STEP = 1e-4
DEFAULT_THIRD_STEP = 1e-2


def central(f, t0: float = 0.0, h: float = DEFAULT_STEP, richardson: bool = False):
    """Central first derivative of a scalar- or array-valued map."""

    def d(step):
        fp = f(t0 + step)
        fm = f(t0 - step)
        return (fp - fm) / (2.0 * step)

    if not richardson:
        return d(h)
    d1, d2 = d(h), d(h / 2.0)
    return (4.0 * d2 - d1) / 3.0


def second(f, t0: float = 0.0, h: float = DEFAULT_STEP):
    """Central second derivative along one direction."""
    return (f(t0 + h) - 2.0 * f(t0) + f(t0 - h)) / (h * h)


def mixed_second(f, h: float = DEFAULT_STEP):
    """d^2/dsdt at (0,0) of a two-parameter scalar map f(s, t)."""
    return (
        f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)
    ) / (4.0 * h * h)


def third_symmetric(f, h: float = DEFAULT_THIRD_STEP, richardson: bool = True):
    """d^3/ds dt du at 0 of a three-parameter scalar map f(s, t, u).

    Eight-point symmetric stencil; optional Richardson halving removes
    the leading h^2 error term.
    """

    def d(step):
        acc = 0.0
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                for s3 in (1.0, -1.0):
                    acc += s1 * s2 * s3 * f(s1 * step, s2 * step, s3 * step)
        return acc / (8.0 * step**3)

    if not richardson:
        return d(h)
    d1, d2 = d(h), d(h / 2.0)
    return (4.0 * d2 - d1) / 3.0


def gradient(f, x0: np.ndarray, h: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar map on R^n."""
    x0 = np.asarray(x0, dtype=float)
    out = np.zeros_like(x0)
    for i in range(len(x0)):
        e = np.zeros_like(x0)
        e[i] = h
        out[i] = (f(x0 + e) - f(x0 - e)) / (2.0 * h)
    return out


def hessian(f, x0: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central-difference Hessian of a scalar map on R^n (symmetrized)."""
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    H = np.zeros((n, n))
    f0 = f(x0)
    E = np.eye(n) * h
    for i in range(n):
        H[i, i] = (f(x0 + 2 * E[i]) - 2 * f0 + f(x0 - 2 * E[i])) / (4 * h * h)
        for j in range(i + 1, n):
            v = (
                f(x0 + E[i] + E[j])
                - f(x0 + E[i] - E[j])
                - f(x0 - E[i] + E[j])
                + f(x0 - E[i] - E[j])
            ) / (4 * h * h)
            H[i, j] = v
            H[j, i] = v
    return H
