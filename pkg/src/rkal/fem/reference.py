"""Reference-square shape functions and the 3x3 Gauss rule.

Local numbering is tensor-product with the x index running fastest:
``k = b * n1d + a`` for the 1D indices ``a`` (x) and ``b`` (y).
"""

import numpy as np

_g = np.sqrt(3.0 / 5.0)
GAUSS_POINTS_1D = np.array([-_g, 0.0, _g])
GAUSS_WEIGHTS_1D = np.array([5.0, 8.0, 5.0]) / 9.0


def _quadratic(x):
    x = np.asarray(x, dtype=float)
    val = np.stack([0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)], axis=-1)
    der = np.stack([x - 0.5, -2.0 * x, x + 0.5], axis=-1)
    sec = np.broadcast_to(np.array([1.0, -2.0, 1.0]), val.shape).copy()
    return val, der, sec


def _linear(x):
    x = np.asarray(x, dtype=float)
    val = np.stack([0.5 * (1.0 - x), 0.5 * (1.0 + x)], axis=-1)
    der = np.broadcast_to(np.array([-0.5, 0.5]), val.shape).copy()
    return val, der


def _tensor(vx, vy):
    # vx[..., a], vy[..., b] -> out[..., b * n + a]
    return (vy[..., :, None] * vx[..., None, :]).reshape(vx.shape[:-1] + (-1,))


def q2_basis(xi, eta):
    """Values, first and second reference derivatives of the 9 Q2 shape functions.

    Returns a dict of arrays shaped ``xi.shape + (9,)`` with keys
    ``v, dx, dy, dxx, dyy``.
    """
    vx, dx, sx = _quadratic(xi)
    vy, dy, sy = _quadratic(eta)
    return {
        "v": _tensor(vx, vy),
        "dx": _tensor(dx, vy),
        "dy": _tensor(vx, dy),
        "dxx": _tensor(sx, vy),
        "dyy": _tensor(vx, sy),
    }


def q1_basis(xi, eta):
    vx, dx = _linear(xi)
    vy, dy = _linear(eta)
    return {"v": _tensor(vx, vy), "dx": _tensor(dx, vy), "dy": _tensor(vx, dy)}


class ReferenceData:
    """Shape functions tabulated at the 9 tensor Gauss points."""

    def __init__(self):
        xi, eta = np.meshgrid(GAUSS_POINTS_1D, GAUSS_POINTS_1D, indexing="xy")
        self.xi = xi.ravel()
        self.eta = eta.ravel()
        wx, wy = np.meshgrid(GAUSS_WEIGHTS_1D, GAUSS_WEIGHTS_1D, indexing="xy")
        self.weights = (wx * wy).ravel()
        self.q2 = q2_basis(self.xi, self.eta)
        self.q1 = q1_basis(self.xi, self.eta)


REFERENCE = ReferenceData()
