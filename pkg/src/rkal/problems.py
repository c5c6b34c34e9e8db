"""Problem definitions: the manufactured accuracy test and the lid-driven cavity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

Field = Callable  # (x, y, t) -> (fx, fy)


@dataclass
class ProblemSpec:
    """Data of one incompressible flow run.

    ``boundary_rate(x, y, t, t_mid)`` is the time derivative of the Dirichlet
    data at stage time ``t``; ``t_mid`` is the midpoint of the current step and
    selects the branch of piecewise data so that a kink on a step boundary is
    never sampled from the wrong side.  ``pressure_source(x, y)`` optionally
    gives ``f + nu Lap u0 - (u0 . grad) u0`` at ``t0`` in closed form.
    """

    name: str
    nu: float
    T: float
    n_t: int
    domain: tuple = ((0.0, 1.0), (0.0, 1.0))
    forcing: Optional[Field] = None
    boundary: Optional[Field] = None
    boundary_rate: Optional[Callable] = None
    u0: Optional[Callable] = None
    exact_u: Optional[Field] = None
    exact_p: Optional[Callable] = None
    pressure_source: Optional[Callable] = None
    lps: bool = False
    convection: bool = True
    t0: float = 0.0

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.n_t < 0:
            raise ValueError("n_t must be non-negative")

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n_t if self.n_t else 0.0


def steps_for_level(T: float, level: int, order: int, q_fe: int = 2, even: bool = False) -> int:
    """Smallest ``n_t`` with ``T / n_t <= h^(q_fe / order)`` for ``h = 2^(-1-level)``."""
    h = 2.0 ** (-1 - level)
    n = int(np.ceil(T / h ** (q_fe / order) - 1e-12))
    n = max(n, 1)
    if even and n % 2:
        n += 1
    return n


def _zero(x, y, t=0.0):
    z = np.zeros_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float))
    return z, z


def manufactured(nu: float = 1.0 / 50.0, T: float = 2.0, n_t: int = 8, lps: bool = False, convection: bool = True):
    """Unit-square problem with ``u = e^(T-t)/2 [sin px cos py, -cos px sin py]`` and constant pressure.

    The forcing ``f = u_t - nu Lap u + (u . grad) u`` is written out by hand:
    ``u_t = -u``, ``Lap u = -2 pi^2 u`` and ``(u . grad) u = a^2 pi/2 [sin 2px, sin 2py]``
    with ``a = e^(T-t)/2``.
    """
    pi = np.pi

    def amp(t):
        return 0.5 * np.exp(T - t)

    def u(x, y, t):
        a = amp(t)
        return a * np.sin(pi * x) * np.cos(pi * y), -a * np.cos(pi * x) * np.sin(pi * y)

    def rate(x, y, t, t_mid=None):
        ux, uy = u(x, y, t)
        return -ux, -uy

    def f(x, y, t):
        ux, uy = u(x, y, t)
        c = -1.0 + 2.0 * nu * pi**2
        fx, fy = c * ux, c * uy
        if convection:
            a = amp(t)
            fx = fx + 0.5 * pi * a * a * np.sin(2 * pi * x)
            fy = fy + 0.5 * pi * a * a * np.sin(2 * pi * y)
        return fx, fy

    def source(x, y):
        # f + nu Lap u - (u . grad) u = u_t at t0
        return rate(x, y, 0.0)

    return ProblemSpec(
        name="accuracy",
        nu=nu,
        T=T,
        n_t=n_t,
        domain=((0.0, 1.0), (0.0, 1.0)),
        forcing=f,
        boundary=u,
        boundary_rate=rate,
        u0=lambda x, y: u(x, y, 0.0),
        exact_u=u,
        exact_p=lambda x, y, t=0.0: np.zeros_like(np.asarray(x, dtype=float)),
        pressure_source=source,
        lps=lps,
        convection=convection,
    )


def manufactured_residual_check(problem: ProblemSpec, n_points: int = 10, seed: int = 0, eps: float = 1e-5):
    """Max abs residual of ``u_t - nu Lap u + (u . grad) u - f`` at random space-time points.

    Derivatives are central differences of ``exact_u``, independent of the
    hand-written forcing.
    """
    rng = np.random.default_rng(seed)
    (ax, bx), (ay, by) = problem.domain
    x = rng.uniform(ax, bx, n_points)
    y = rng.uniform(ay, by, n_points)
    t = rng.uniform(problem.t0, problem.T, n_points)
    u = problem.exact_u
    U = np.array(u(x, y, t))
    ut = (np.array(u(x, y, t + eps)) - np.array(u(x, y, t - eps))) / (2 * eps)
    ux = (np.array(u(x + eps, y, t)) - np.array(u(x - eps, y, t))) / (2 * eps)
    uy = (np.array(u(x, y + eps, t)) - np.array(u(x, y - eps, t))) / (2 * eps)
    h = 1e-4
    lap = (
        np.array(u(x + h, y, t)) + np.array(u(x - h, y, t)) + np.array(u(x, y + h, t)) + np.array(u(x, y - h, t)) - 4 * U
    ) / h**2
    res = ut - problem.nu * lap - np.array(problem.forcing(x, y, t))
    if problem.convection:
        res += U[0] * ux + U[1] * uy
    return float(np.abs(res).max())


def cavity(nu: float = 1.0 / 100.0, T: float = 2.0, n_t: int = 8, lps: Optional[bool] = None, convection: bool = True):
    """Lid-driven cavity on ``(-1, 1)^2``: lid speed ``t`` until ``t = 1``, then 1.

    LPS defaults to on for ``nu <= 1/100``.
    """
    if lps is None:
        lps = nu <= 1.0 / 100.0 + 1e-15

    def on_lid(y):
        return np.isclose(np.asarray(y, dtype=float), 1.0)

    def g(x, y, t):
        lid = on_lid(y) & (np.abs(np.asarray(x)) < 1.0)
        return np.where(lid, min(t, 1.0), 0.0), np.zeros_like(np.asarray(x, dtype=float))

    def rate(x, y, t, t_mid=None):
        ref = t if t_mid is None else t_mid
        lid = on_lid(y) & (np.abs(np.asarray(x)) < 1.0)
        return np.where(lid, 1.0 if ref < 1.0 else 0.0, 0.0), np.zeros_like(np.asarray(x, dtype=float))

    return ProblemSpec(
        name="cavity",
        nu=nu,
        T=T,
        n_t=n_t,
        domain=((-1.0, 1.0), (-1.0, 1.0)),
        forcing=_zero,
        boundary=g,
        boundary_rate=rate,
        u0=lambda x, y: _zero(x, y),
        pressure_source=lambda x, y: _zero(x, y),
        lps=lps,
        convection=convection,
    )
