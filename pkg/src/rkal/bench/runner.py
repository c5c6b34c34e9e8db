"""Run configurations, error evaluation and result files."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import subprocess
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from .. import _kernels
from ..al_precond import DiagSolve, GSConfig, WMode
from ..errors import ConfigError
from ..fem import interpolate_pressure, interpolate_velocity, mean_free
from ..krylov import KrylovConfig
from ..problems import cavity, manufactured, manufactured_residual_check, steps_for_level
from ..stage_system import Discretization, LinearSolverConfig, NewtonConfig, TimeState, time_loop
from ..tableau import Family, make_tableau

PROBLEMS = ("accuracy", "cavity")


@dataclass
class RunConfig:
    problem: str = "accuracy"
    family: str = "RadauIIA"
    s: int = 2
    level: int = 3
    nu: Optional[float] = None
    gamma: float = 1.0
    T: float = 2.0
    n_t: Optional[int] = None
    w_mode: str = "diag"
    diag_solve: str = "exact"
    lps: Optional[bool] = None
    rel_tol: float = 1e-6
    abs_tol: float = 1e-10
    newton_rel_tol: float = 1e-5
    max_iters: int = 500
    seed: int = 0
    timing: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        try:
            self.family = Family.parse(self.family).value
            self.w_mode = WMode.parse(self.w_mode).value
            self.diag_solve = DiagSolve.parse(self.diag_solve).value
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.s < 1 or (self.family == Family.LOBATTO_IIIC.value and self.s < 2):
            raise ConfigError(f"unsupported stage count {self.s} for {self.family}")
        if self.level < 1:
            raise ConfigError("level must be >= 1")
        if self.nu is not None and not self.nu > 0:
            raise ConfigError("nu must be positive")
        if not self.gamma >= 0:
            raise ConfigError("gamma must be non-negative")
        if self.n_t is not None and self.n_t < 0:
            raise ConfigError("nt must be non-negative")
        if self.T <= 0:
            raise ConfigError("T must be positive")

    @property
    def viscosity(self) -> float:
        if self.nu is not None:
            return float(self.nu)
        return 1.0 / 50.0 if self.problem == "accuracy" else 1.0 / 100.0

    @property
    def lps_enabled(self) -> bool:
        if self.lps is not None:
            return bool(self.lps)
        return self.problem == "cavity" and self.viscosity <= 1.0 / 100.0 + 1e-15

    def steps(self, order: int) -> int:
        if self.n_t is not None:
            return self.n_t
        # the cavity lid kink at t = 1 must fall on a step boundary
        return steps_for_level(self.T, self.level, order, even=self.problem == "cavity")

    def linear_config(self) -> LinearSolverConfig:
        return LinearSolverConfig(
            gamma=self.gamma,
            w_mode=self.w_mode,
            gs=GSConfig(mode=self.diag_solve),
            krylov=KrylovConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol, max_iters=self.max_iters),
        )


COLUMNS = (
    "problem", "family", "s", "l", "nu", "gamma", "T", "n_t", "w_mode", "diag_solve", "lps",
    "dof", "it", "nit", "cpu_per_it", "cpu_per_step", "u_error", "p_error",
)


@dataclass
class ResultRow:
    problem: str
    family: str
    s: int
    l: int
    nu: float
    gamma: float
    T: float
    n_t: int
    w_mode: str
    diag_solve: str
    lps: bool
    dof: int
    it: float
    nit: float
    cpu_per_it: float
    cpu_per_step: float
    u_error: Optional[float] = None
    p_error: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    def sort_key(self):
        return (self.s, self.l, self.nu, self.gamma)

    def formatted(self):
        out = []
        for name in COLUMNS:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, bool):
                out.append("on" if v else "off")
            elif isinstance(v, (int, np.integer)):
                out.append(str(int(v)))
            elif isinstance(v, float):
                out.append("%.6e" % v)
            else:
                out.append(str(v))
        return out


class ErrorTracker:
    """Observer accumulating ``max_n |u_n - u(t_n)|_{K_u}`` and the mean-free ``M_p`` pressure error."""

    def __init__(self, disc: Discretization, exact_u, exact_p=None):
        self.disc = disc
        self.exact_u = exact_u
        self.exact_p = exact_p
        self.u_error = 0.0
        self.p_error = 0.0
        self.history = []

    def __call__(self, state: TimeState):
        u_err, p_err = compute_errors(self.disc, [state], self.exact_u, self.exact_p)
        self.history.append((state.t, u_err, p_err))
        self.u_error = max(self.u_error, u_err)
        self.p_error = max(self.p_error, p_err)


def compute_errors(disc: Discretization, snapshots, exact_u, exact_p=None):
    """``(max_n sqrt(e_u^T K_u e_u), max_n sqrt(e_p^T M_p e_p))`` over the snapshots.

    The exact fields are nodal interpolants; pressures are compared after
    shifting both to zero mean.
    """
    ops = disc.ops
    u_err = p_err = 0.0
    for st in snapshots:
        e = st.u - interpolate_velocity(disc.spaces, exact_u, st.t)
        u_err = max(u_err, math.sqrt(max(e @ (ops.K_u @ e), 0.0)))
        if exact_p is not None:
            p_ex = interpolate_pressure(disc.spaces, lambda x, y: exact_p(x, y, st.t))
            ep = mean_free(ops.M_p, st.p) - mean_free(ops.M_p, p_ex)
            p_err = max(p_err, math.sqrt(max(ep @ (ops.M_p @ ep), 0.0)))
    return u_err, p_err


def _row(cfg: RunConfig, tab, prob, disc, stats, u_error=None, p_error=None):
    nan = float("nan")
    return ResultRow(
        problem=cfg.problem,
        family=cfg.family,
        s=cfg.s,
        l=cfg.level,
        nu=cfg.viscosity,
        gamma=float(cfg.gamma),
        T=float(cfg.T),
        n_t=prob.n_t,
        w_mode=cfg.w_mode,
        diag_solve=cfg.diag_solve,
        lps=prob.lps,
        dof=disc.dof_count(tab.s),
        it=stats.avg_linear_iterations,
        nit=stats.avg_newton_iterations,
        cpu_per_it=stats.cpu_per_linear_iteration if cfg.timing else nan,
        cpu_per_step=stats.cpu_per_step if cfg.timing else nan,
        u_error=u_error,
        p_error=p_error,
        extra={
            "linear_iterations": list(stats.linear_iterations),
            "newton_iterations": list(stats.newton_iterations),
            "max_divergence": stats.max_divergence,
            "pressure_residual": stats.pressure_residual,
            "unconverged_solves": stats.unconverged_solves,
        },
    )


def run_accuracy(cfg: RunConfig) -> ResultRow:
    if cfg.problem != "accuracy":
        raise ConfigError("run_accuracy needs problem = accuracy")
    tab = make_tableau(cfg.family, cfg.s)
    prob = manufactured(nu=cfg.viscosity, T=cfg.T, n_t=cfg.steps(tab.order), lps=cfg.lps_enabled)
    check = manufactured_residual_check(prob, seed=cfg.seed)
    if check > 1e-6:
        raise RuntimeError(f"manufactured forcing inconsistent with the exact solution ({check:.2e})")
    disc = Discretization(prob, cfg.level)
    tracker = ErrorTracker(disc, prob.exact_u, prob.exact_p)
    traj = time_loop(disc, prob, tab, NewtonConfig(rel_tol=cfg.newton_rel_tol), cfg.linear_config(), observer=tracker)
    row = _row(cfg, tab, prob, disc, traj.stats, tracker.u_error, tracker.p_error)
    row.extra["error_history"] = tracker.history
    return row


def run_cavity(cfg: RunConfig) -> ResultRow:
    if cfg.problem != "cavity":
        raise ConfigError("run_cavity needs problem = cavity")
    tab = make_tableau(cfg.family, cfg.s)
    n_t = cfg.steps(tab.order)
    prob = cavity(nu=cfg.viscosity, T=cfg.T, n_t=n_t, lps=cfg.lps_enabled)
    disc = Discretization(prob, cfg.level)
    traj = time_loop(disc, prob, tab, NewtonConfig(rel_tol=cfg.newton_rel_tol), cfg.linear_config())
    return _row(cfg, tab, prob, disc, traj.stats)


def run(cfg: RunConfig) -> ResultRow:
    return run_accuracy(cfg) if cfg.problem == "accuracy" else run_cavity(cfg)


def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in sorted(rows, key=ResultRow.sort_key):
        w.writerow(r.formatted())
    return buf.getvalue()


def git_revision(cwd=None) -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"], cwd=cwd or Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5, check=True,
        )
        return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def environment_info() -> dict:
    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "machine": platform.machine(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": _kernels.BACKEND,
    }


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating,)):
        return _jsonable(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def summary(rows) -> dict:
    return {
        "git_revision": git_revision(),
        "environment": environment_info(),
        "rows": [_jsonable(asdict(r)) for r in sorted(rows, key=ResultRow.sort_key)],
    }


def emit_results(rows, out=None, fmt="both"):
    """Write ``<out>.csv`` and/or ``<out>.json``; with ``out=None`` return the CSV text only."""
    rows = list(rows)
    if not rows:
        raise ValueError("no result rows to write")
    text = csv_text(rows)
    if out is None:
        return text
    out = Path(out)
    if out.suffix in (".csv", ".json"):
        out = out.with_suffix("")
    out.parent.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        p = out.with_suffix(".csv")
        p.write_text(text)
        written.append(p)
    if fmt in ("json", "both"):
        p = out.with_suffix(".json")
        p.write_text(json.dumps(summary(rows), indent=2, sort_keys=True) + "\n")
        written.append(p)
    return written


CONFIG_KEYS = {
    "problem": ("problem", str),
    "tableau": ("family", str),
    "family": ("family", str),
    "stages": ("s", int),
    "s": ("s", int),
    "level": ("level", int),
    "l": ("level", int),
    "nu": ("nu", "fraction"),
    "gamma": ("gamma", float),
    "t": ("T", float),
    "nt": ("n_t", int),
    "w-mode": ("w_mode", str),
    "diag-solve": ("diag_solve", str),
    "lps": ("lps", "onoff"),
    "rel-tol": ("rel_tol", float),
    "abs-tol": ("abs_tol", float),
    "seed": ("seed", int),
}


def parse_value(kind, text):
    text = text.strip()
    if kind == "fraction":
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    if kind == "onoff":
        low = text.lower()
        if low in ("on", "true", "yes", "1"):
            return True
        if low in ("off", "false", "no", "0"):
            return False
        if low == "auto":
            return None
        raise ValueError(f"expected on/off, got {text!r}")
    return kind(text)


def parse_config(text: str, base: RunConfig | None = None):
    """Parse ``[run]`` blocks of ``key = value`` lines into RunConfigs."""
    base_kw = {f.name: getattr(base, f.name) for f in fields(RunConfig)} if base else {}
    runs, current = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            if line[1:-1].strip().lower() != "run":
                raise ConfigError(f"line {lineno}: unknown section {line}")
            current = {}
            runs.append(current)
            continue
        if current is None:
            raise ConfigError(f"line {lineno}: key outside a [run] block")
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        key = key.strip().lower().replace("_", "-")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name, kind = CONFIG_KEYS[key]
        try:
            current[name] = parse_value(kind, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    if not runs:
        raise ConfigError("no [run] blocks found")
    return [RunConfig(**{**base_kw, **kw}) for kw in runs]


__all__ = [
    "COLUMNS",
    "ErrorTracker",
    "ResultRow",
    "RunConfig",
    "compute_errors",
    "csv_text",
    "emit_results",
    "parse_config",
    "run",
    "run_accuracy",
    "run_cavity",
]
