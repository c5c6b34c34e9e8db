"""Flexible GMRES with right preconditioning."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

# Kahan's "twice is enough" criterion for a second Gram-Schmidt pass
_REORTH_RATIO = 0.7


@dataclass
class KrylovConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-10
    max_iters: int = 500
    restart: int | None = None

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.restart is not None and self.restart < 1:
            raise ValueError("restart must be >= 1")


@dataclass
class KrylovResult:
    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)
    converged: bool = False
    status: str = "max_iters"  # "converged", "breakdown" or "max_iters"

    @property
    def final_residual(self):
        return self.residuals[-1]


def _identity(v):
    return v


def fgmres(apply_A, apply_P, b, x0=None, cfg: KrylovConfig | None = None, callback=None) -> KrylovResult:
    """Solve ``A x = b`` by flexible GMRES.

    ``apply_P`` approximates ``A^{-1}`` and may change from one call to the next;
    the preconditioned directions are stored, so the iterate is always
    ``x0 + Z y`` with ``Z`` the actual preconditioner outputs.  Stops when the
    residual drops below ``max(rel_tol * ||r0||, abs_tol)``.
    """
    cfg = cfg or KrylovConfig()
    apply_P = apply_P or _identity
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)

    r = b - apply_A(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    history = [beta]
    target = max(cfg.rel_tol * beta, cfg.abs_tol)
    if beta <= target:
        return KrylovResult(x, 0, history, True, "converged")

    m = cfg.restart or cfg.max_iters
    total = 0
    status = "max_iters"
    while True:
        m_cycle = min(m, cfg.max_iters - total)
        V = np.zeros((m_cycle + 1, n))
        Z = np.zeros((m_cycle, n))
        H = np.zeros((m_cycle + 1, m_cycle))
        cs = np.zeros(m_cycle)
        sn = np.zeros(m_cycle)
        g = np.zeros(m_cycle + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        done = False
        for j in range(m_cycle):
            Z[j] = apply_P(V[j])
            # copy: an operator may hand back its input, which Gram-Schmidt would overwrite
            w = np.array(apply_A(Z[j]), dtype=float)
            w_norm0 = np.linalg.norm(w)
            for i in range(j + 1):
                h = V[i] @ w
                H[i, j] = h
                w -= h * V[i]
            w_norm = np.linalg.norm(w)
            if w_norm < _REORTH_RATIO * w_norm0:
                for i in range(j + 1):
                    h = V[i] @ w
                    H[i, j] += h
                    w -= h * V[i]
                w_norm = np.linalg.norm(w)
            H[j + 1, j] = w_norm
            breakdown = w_norm <= 1e-14 * max(w_norm0, np.finfo(float).tiny)
            if not breakdown:
                V[j + 1] = w / w_norm

            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            k = j + 1
            total += 1
            res = abs(g[j + 1])
            history.append(res)
            log.debug("fgmres it %d residual %.3e", total, res)
            if callback is not None:
                callback(total, res)
            if res <= target:
                status, done = "converged", True
                break
            if breakdown:
                status, done = "breakdown", True
                break

        y = _back_substitute(H[:k, :k], g[:k])
        x = x + Z[:k].T @ y
        if done or total >= cfg.max_iters:
            break
        r = b - apply_A(x)
        beta = np.linalg.norm(r)
        if beta <= target:
            history[-1] = min(history[-1], beta)
            status = "converged"
            break

    return KrylovResult(x, total, history, status == "converged", status)


def _back_substitute(R, g):
    k = len(g)
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        if R[i, i] == 0.0:
            y[i] = 0.0
            continue
        y[i] = (g[i] - R[i, i + 1 :] @ y[i + 1 :]) / R[i, i]
    return y
