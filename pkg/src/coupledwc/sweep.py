"""Two-parameter grid sweeps and one-parameter path scans.

A sweep varies two named quantities over a rectangular grid.  Names are
weight slots (``w_E1E2``), scheme aliases, the basal-ganglia magnitudes
``W_GS, W_SG, W_CS, W_SC, W_CC`` (sign conventions applied), or the raw
coordinates ``alpha`` and ``beta`` (which bypass the circuit entirely).

Each cell runs equilibrium -> (alpha, beta) -> region -> critical delays ->
onset frequency.  Cells whose equilibrium cannot be found are kept and
marked ``EquilibriumFailed``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import SolverOpts, find_equilibria
from .exceptions import ConfigError, NumericalError
from .model import KernelKind, NetworkSpec, resolve_parameter
from .spectrum import band_classify, onset_frequency
from .stability import (
    DelayIndependentClass,
    critical_delays,
    delay_independent_class,
    gamma_zone_classify,
    no_delay_stable,
)

RAW_AXES = ("alpha", "beta")
CSV_COLUMNS = ("p1", "p2", "alpha", "beta", "region", "zone", "kernel",
               "tstar_ms", "tminus_ms", "tplus_ms", "f_hz", "band")
OUTPUTS = ("region", "tau_star", "window", "band")
FAILED = "EquilibriumFailed"
UNSTABLE_NO_DELAY = "UnstableNoDelay"


@dataclass(frozen=True)
class SweepAxis:
    name: str
    lo: float
    hi: float
    steps: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ConfigError(f"axis {self.name}: bounds must be finite")
        if self.steps < 1 or (self.steps == 1 and self.lo != self.hi):
            raise ConfigError(f"axis {self.name}: need steps >= 2 (or steps = 1 with min == max)")
        if self.hi < self.lo:
            raise ConfigError(f"axis {self.name}: max < min")

    @classmethod
    def parse(cls, text: str) -> "SweepAxis":
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigError(f"axis spec must be name:min:max:steps, got {text!r}")
        try:
            return cls(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise ConfigError(f"bad axis spec {text!r}: {exc}") from None

    @classmethod
    def fixed(cls, name: str, value: float) -> "SweepAxis":
        return cls(name, float(value), float(value), 1)

    @property
    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.lo])
        # i/(n-1) is correctly rounded, so refined grids reproduce coarse nodes exactly
        frac = np.arange(self.steps) / (self.steps - 1)
        return self.lo + (self.hi - self.lo) * frac

    def to_dict(self) -> dict:
        return {"name": self.name, "min": self.lo, "max": self.hi, "steps": self.steps}

    @classmethod
    def from_dict(cls, d) -> "SweepAxis":
        return cls(d["name"], float(d["min"]), float(d["max"]), int(d["steps"]))


@dataclass(frozen=True)
class SweepConfig:
    """``base`` is a :class:`NetworkSpec`, or ``None`` for raw (alpha, beta) sweeps.

    Delays are converted to ms with ``tau_bar`` (the circuit's by default,
    1 ms in raw mode).
    """

    axis1: SweepAxis
    axis2: SweepAxis
    base: NetworkSpec | None = None
    kernels: tuple = (KernelKind.DIRAC,)
    outputs: tuple = OUTPUTS
    tau_bar: float | None = None
    k_max: int = 0
    solver: SolverOpts = field(default_factory=SolverOpts)

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(KernelKind.parse(k) for k in self.kernels))
        if not self.kernels:
            raise ConfigError("at least one kernel is required")
        if len(set(self.kernels)) != len(self.kernels):
            raise ConfigError("kernels must be distinct")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise ConfigError(f"unknown output flag(s): {sorted(bad)}")
        if self.axis1.name == self.axis2.name:
            raise ConfigError("sweep axes must be distinct")
        raw = [a.name in RAW_AXES for a in (self.axis1, self.axis2)]
        if self.base is None:
            if not all(raw):
                raise ConfigError("raw sweeps need axes alpha and beta (no circuit given)")
        else:
            if any(raw):
                raise ConfigError("alpha/beta axes are only allowed without a circuit")
            # fail early on unknown names and on two names driving the same slot
            slots = [set(s for s, _ in resolve_parameter(self.base.scheme, a.name))
                     for a in (self.axis1, self.axis2)]
            if slots[0] & slots[1]:
                raise ConfigError("sweep axes address the same weight slot")
        if self.tau_bar is not None and not self.tau_bar > 0:
            raise ConfigError("tau_bar must be positive")

    @property
    def raw(self) -> bool:
        return self.base is None

    @property
    def delay_unit(self) -> float:
        if self.tau_bar is not None:
            return self.tau_bar
        return 1.0 if self.base is None else self.base.tau_bar

    def to_dict(self) -> dict:
        return {
            "axis1": self.axis1.to_dict(),
            "axis2": self.axis2.to_dict(),
            "base": None if self.base is None else self.base.to_dict(),
            "kernels": [k.value for k in self.kernels],
            "outputs": list(self.outputs),
            "tau_bar": self.tau_bar,
            "k_max": self.k_max,
        }

    @classmethod
    def from_dict(cls, d) -> "SweepConfig":
        base = d.get("base")
        return cls(
            SweepAxis.from_dict(d["axis1"]),
            SweepAxis.from_dict(d["axis2"]),
            None if base is None else NetworkSpec.from_dict(base),
            tuple(d.get("kernels", ("dirac",))),
            tuple(d.get("outputs", OUTPUTS)),
            d.get("tau_bar"),
            int(d.get("k_max", 0)),
        )


@dataclass(frozen=True)
class KernelResult:
    kernel: KernelKind
    status: str
    tstar_ms: float | None = None
    tminus_ms: float | None = None
    tplus_ms: float | None = None
    f_hz: float | None = None
    band: str | None = None

    def to_dict(self) -> dict:
        return {"kernel": self.kernel.value, "status": self.status, "tstar_ms": self.tstar_ms,
                "tminus_ms": self.tminus_ms, "tplus_ms": self.tplus_ms, "f_hz": self.f_hz,
                "band": self.band}

    @classmethod
    def from_dict(cls, d) -> "KernelResult":
        return cls(KernelKind.parse(d["kernel"]), d["status"], d["tstar_ms"], d["tminus_ms"],
                   d["tplus_ms"], d["f_hz"], d["band"])


@dataclass(frozen=True)
class SweepCell:
    p1: float
    p2: float
    alpha: float | None
    beta: float | None
    region: str
    zone: str | None
    results: tuple = ()
    n_equilibria: int | None = None
    branch_jump: bool = False

    def result(self, kernel) -> KernelResult | None:
        kind = KernelKind.parse(kernel)
        for r in self.results:
            if r.kernel is kind:
                return r
        return None

    def to_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "alpha": self.alpha, "beta": self.beta,
                "region": self.region, "zone": self.zone,
                "results": [r.to_dict() for r in self.results],
                "n_equilibria": self.n_equilibria, "branch_jump": self.branch_jump}

    @classmethod
    def from_dict(cls, d) -> "SweepCell":
        return cls(d["p1"], d["p2"], d["alpha"], d["beta"], d["region"], d["zone"],
                   tuple(KernelResult.from_dict(r) for r in d["results"]),
                   d.get("n_equilibria"), bool(d.get("branch_jump", False)))


@dataclass(frozen=True)
class SweepGrid:
    config: SweepConfig
    cells: tuple  # row-major: axis1 outer, axis2 inner

    @property
    def shape(self) -> tuple[int, int]:
        return self.config.axis1.steps, self.config.axis2.steps

    def cell(self, i: int, j: int) -> SweepCell:
        return self.cells[i * self.shape[1] + j]

    def field(self, name: str, kernel=None) -> np.ndarray:
        """2-D array of a numeric cell or kernel-result attribute (NaN where absent)."""
        out = np.full(self.shape, np.nan)
        for idx, c in enumerate(self.cells):
            src = c if kernel is None else c.result(kernel)
            v = None if src is None else getattr(src, name)
            if v is not None:
                out.flat[idx] = v
        return out

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "cells": [c.to_dict() for c in self.cells]}

    @classmethod
    def from_dict(cls, d) -> "SweepGrid":
        return cls(SweepConfig.from_dict(d["config"]),
                   tuple(SweepCell.from_dict(c) for c in d["cells"]))

    def __eq__(self, other):
        if not isinstance(other, SweepGrid):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


# ---------------------------------------------------------------------------
# per-cell pipeline


def _region_label(alpha: float, beta: float) -> str:
    di = delay_independent_class(alpha, beta)
    if di is DelayIndependentClass.CONDITIONAL and not no_delay_stable(alpha, beta):
        return UNSTABLE_NO_DELAY
    return di.value


def _kernel_result(alpha, beta, kind, unit, cfg) -> KernelResult:
    if beta < alpha - 1:
        return KernelResult(kind, DelayIndependentClass.UNSTABLE_SADDLE.value)
    cd = critical_delays(alpha, beta, kind, k_max=cfg.k_max)
    onset = cd.onset
    tstar = tminus = tplus = f = band = None
    if onset is not None:
        if "tau_star" in cfg.outputs:
            tstar = onset.tau_tilde * unit
        if "band" in cfg.outputs:
            f = onset_frequency(onset.omega, onset.tau_tilde * unit)
            band = band_classify(f).value
    if cd.window is not None and "window" in cfg.outputs:
        tminus, tplus = cd.window[0] * unit, cd.window[1] * unit
    return KernelResult(kind, cd.status.value, tstar, tminus, tplus, f, band)


def analyse_point(alpha: float, beta: float, cfg: SweepConfig, p1=None, p2=None, **extra) -> SweepCell:
    """Region, zone and per-kernel results at one (alpha, beta)."""
    region = _region_label(alpha, beta)
    zone = None if beta < alpha - 1 else gamma_zone_classify(alpha, beta).value
    unit = cfg.delay_unit
    results = tuple(_kernel_result(alpha, beta, k, unit, cfg) for k in cfg.kernels)
    if "region" not in cfg.outputs:
        region, zone = "", None
    return SweepCell(p1, p2, float(alpha), float(beta), region, zone, results, **extra)


def _pick(eqs, prev_x):
    if prev_x is None or len(eqs) == 1:
        return eqs[0]
    return min(eqs, key=lambda e: float(np.max(np.abs(e.x_star - prev_x))))


def _circuit_cell(cfg: SweepConfig, v1, v2, prev):
    net = cfg.base.with_weights(**{cfg.axis1.name: v1, cfg.axis2.name: v2})
    prev_x, prev_n = prev if prev is not None else (None, None)
    try:
        eqs = find_equilibria(net, cfg.solver, starts=None if prev_x is None else prev_x[None, :])
    except NumericalError:
        cell = SweepCell(float(v1), float(v2), None, None, FAILED, None, (), 0, False)
        return cell, prev
    eq = _pick(eqs, prev_x)
    jump = prev_n is not None and prev_n != len(eqs)
    cell = analyse_point(eq.alpha, eq.beta, cfg, float(v1), float(v2),
                         n_equilibria=len(eqs), branch_jump=jump)
    return cell, (np.asarray(eq.x_star), len(eqs))


def _run_row(cfg: SweepConfig, i: int) -> list[SweepCell]:
    v1 = cfg.axis1.values[i]
    cells = []
    prev = None
    for v2 in cfg.axis2.values:
        if cfg.raw:
            vals = {cfg.axis1.name: v1, cfg.axis2.name: v2}
            cells.append(analyse_point(vals["alpha"], vals["beta"], cfg, float(v1), float(v2)))
        else:
            cell, prev = _circuit_cell(cfg, v1, v2, prev)
            cells.append(cell)
    return cells


def _run_rows(args):
    cfg, rows = args
    return [(i, _run_row(cfg, i)) for i in rows]


def run_sweep(cfg: SweepConfig, workers: int = 1) -> SweepGrid:
    """Evaluate every cell; rows are independent and may run in parallel.

    Within a row, each cell's equilibrium search also starts from the left
    neighbour's equilibrium, and that neighbour breaks ties when several
    equilibria exist.  The output does not depend on ``workers``.
    """
    n_rows = cfg.axis1.steps
    if workers is None or workers <= 1 or n_rows == 1:
        rows = [_run_row(cfg, i) for i in range(n_rows)]
    else:
        chunks = [list(range(w, n_rows, workers)) for w in range(workers)]
        rows = [None] * n_rows
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_rows, [(cfg, c) for c in chunks if c]):
                for i, cells in part:
                    rows[i] = cells
    return SweepGrid(cfg, tuple(c for row in rows for c in row))


# ---------------------------------------------------------------------------
# export


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return f"{v:.9g}"


def grid_rows(grid: SweepGrid):
    """CSV rows (one per cell and kernel) in row-major order."""
    for c in grid.cells:
        results = c.results or tuple(KernelResult(k, c.region) for k in grid.config.kernels)
        for r in results:
            yield [_fmt(c.p1), _fmt(c.p2), _fmt(c.alpha), _fmt(c.beta), c.region, c.zone or "",
                   r.kernel.value, _fmt(r.tstar_ms), _fmt(r.tminus_ms), _fmt(r.tplus_ms),
                   _fmt(r.f_hz), r.band or ""]


def grid_to_csv(grid: SweepGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(grid_rows(grid))
    return buf.getvalue()


def grid_to_json(grid: SweepGrid) -> str:
    return json.dumps(grid.to_dict(), indent=1, sort_keys=True)


def export_grid(grid: SweepGrid, fmt: str = "csv", path=None) -> str | None:
    """Write the grid as CSV or JSON; returns the text when ``path`` is None."""
    if fmt == "csv":
        text = grid_to_csv(grid)
    elif fmt == "json":
        text = grid_to_json(grid)
    else:
        raise ConfigError(f"unknown format {fmt!r} (expected csv or json)")
    if path is None:
        return text
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return None


def load_grid(path) -> SweepGrid:
    with open(path) as fh:
        return SweepGrid.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# one-parameter paths at a fixed delay


@dataclass(frozen=True)
class PathCrossing:
    value: float
    direction: str  # "enter" (stable -> oscillatory) or "exit"


def path_stable(net: NetworkSpec, name: str, value: float, T_ms: float, kernel, prev_x=None):
    """Whether the equilibrium (continued from ``prev_x``) is stable at delay ``T_ms``."""
    from .stability import stable_at_delay

    net_v = net.with_weights(**{name: value})
    starts = None if prev_x is None else np.atleast_2d(prev_x)
    eq = _pick(find_equilibria(net_v, starts=starts), prev_x)
    return stable_at_delay(eq.alpha, eq.beta, kernel, T_ms / net.tau_bar), eq.x_star


def path_scan(net: NetworkSpec, name: str, lo: float, hi: float, steps: int, T_ms: float,
              kernel="dirac", fixed: dict | None = None):
    """Stability flags along ``name`` in ``[lo, hi]`` at delay ``T_ms`` with other weights ``fixed``."""
    if fixed:
        net = net.with_weights(**fixed)
    values = SweepAxis(name, lo, hi, steps).values
    flags, xs = [], []
    prev = None
    for v in values:
        ok, prev = path_stable(net, name, v, T_ms, kernel, prev)
        flags.append(ok)
        xs.append(prev)
    return values, np.array(flags), xs


def path_crossings(net: NetworkSpec, name: str, lo: float, hi: float, steps: int, T_ms: float,
                   kernel="dirac", fixed: dict | None = None, tol: float = 1e-6) -> list[PathCrossing]:
    """Locate stability changes along a path by scanning then bisecting each bracket."""
    if fixed:
        net = net.with_weights(**fixed)
    values, flags, xs = path_scan(net, name, lo, hi, steps, T_ms, kernel)
    out = []
    for i in np.flatnonzero(flags[1:] != flags[:-1]):
        a, b = values[i], values[i + 1]
        fa, xa = flags[i], xs[i]
        while b - a > tol:
            m = 0.5 * (a + b)
            fm, xm = path_stable(net, name, m, T_ms, kernel, xa)
            if fm == fa:
                a, xa = m, xm
            else:
                b = m
        out.append(PathCrossing(0.5 * (a + b), "enter" if fa else "exit"))
    return out
