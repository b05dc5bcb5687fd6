"""Time integration of the delayed network and long-term classification.

Three integrators share the fixed-step classical RK4 scheme:

* :func:`simulate_dirac` for the discrete delay (method of steps with
  cubic-Hermite reads of the stored history, constant pre-history);
* :func:`simulate_weak_gamma` for the exponential kernel, reduced to an
  8-dimensional ODE by the linear chain trick (``T Y' = X - Y``);
* :func:`convolution_oracle`, a slow reference that evaluates the kernel
  convolution over the whole stored history at every stage.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.signal import find_peaks, lfilter
from scipy.special import expit

from .exceptions import ConfigError, HorizonTooLong, IntegrationOverflow, StepTooLarge
from .model import NODES, NetworkSpec

OVERFLOW_LIMIT = 1e6
MAX_ORACLE_OPS = 10**6


@dataclass(eq=False)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    def to_csv(self, path=None, include_y: bool = False) -> str | None:
        """Write ``t_ms,E1,I1,E2,I2`` (plus ``Y_*`` columns) with 9 significant digits."""
        header = ["t_ms", *NODES]
        cols = [self.t[:, None], self.x]
        if include_y:
            if self.y is None:
                raise ConfigError("trajectory has no auxiliary Y block")
            header += [f"Y_{n}" for n in NODES]
            cols.append(self.y)
        data = np.hstack(cols)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in data:
            w.writerow([f"{v:.9g}" for v in row])
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None

    def to_dict(self) -> dict:
        d = {"meta": self.meta, "t_ms": self.t.tolist(), "x": self.x.tolist()}
        if self.y is not None:
            d["y"] = self.y.tolist()
        return d


def _steps(horizon_ms: float, dt_ms: float) -> int:
    if not (dt_ms > 0 and horizon_ms > 0):
        raise ConfigError(f"need dt > 0 and horizon > 0, got dt={dt_ms}, horizon={horizon_ms}")
    # horizons that are not a whole number of steps are rounded up
    return int(math.ceil(horizon_ms / dt_ms * (1 - 1e-12)))


def _init4(init) -> np.ndarray:
    x0 = np.asarray(init, dtype=float).reshape(-1)
    if x0.shape != (4,) or not np.all(np.isfinite(x0)):
        raise ConfigError(f"initial state must be 4 finite reals, got {init!r}")
    return x0


def _check_overflow(arr, t):
    if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > OVERFLOW_LIMIT:
        raise IntegrationOverflow(f"state left |x| <= {OVERFLOW_LIMIT:g} near t = {t:.6g} ms")


def _hermite(x, d, dt, idx, frac):
    """Cubic Hermite interpolation on interval ``idx`` at fraction ``frac`` in [0, 1]."""
    s = frac[:, None]
    s2, s3 = s * s, s * s * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * x[idx] + h10 * dt * d[idx] + h01 * x[idx + 1] + h11 * dt * d[idx + 1]


def simulate_dirac(net: NetworkSpec, T_ms: float, history=(0, 0, 0, 0), horizon_ms: float | None = None,
                   dt_ms: float | None = None) -> Trajectory:
    """``tau_bar X' = -X + F(C X(t - T) + P)`` with ``X = history`` for ``t <= 0``.

    Defaults: ``dt = T/50``, ``horizon = max(20 tau_bar, 10 T)`` rounded up to a
    whole number of steps.

    Delayed reads at the RK4 stage times never reach past the current step
    (``dt <= T/20``), so each block of ``floor(T/dt)`` steps sees a known
    forcing and the linear recursion for the block is solved in one pass.
    """
    if not T_ms > 0:
        raise ConfigError(f"delay must be positive, got T={T_ms}")
    dt = T_ms / 50 if dt_ms is None else float(dt_ms)
    if not 0 < dt <= T_ms / 20 * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} ms exceeds T/20 = {T_ms / 20} ms")
    if horizon_ms is None:
        horizon_ms = math.ceil(max(20 * net.tau_bar, 10 * T_ms) / dt) * dt
    if horizon_ms < 10 * T_ms * (1 - 1e-12):
        raise ConfigError(f"horizon must be at least 10 T = {10 * T_ms} ms")
    n = _steps(horizon_ms, dt)
    x0 = _init4(history)
    tau = net.tau_bar

    X = np.empty((n + 1, 4))
    D = np.empty((n + 1, 4))
    X[0] = x0

    def delayed(times):
        # state at times <= current known time; constant history before 0
        out = np.empty((len(times), 4))
        neg = (times <= 0) | (known == 0)
        out[neg] = x0
        pos = ~neg
        if pos.any():
            u = times[pos] / dt
            idx = np.clip(np.floor(u).astype(int), 0, known - 1)
            out[pos] = _hermite(X, D, dt, idx, u - idx)
        return out

    mu = -dt / tau
    a = 1 + mu + mu**2 / 2 + mu**3 / 6 + mu**4 / 24
    c0 = dt / 6 * (1 + mu + mu**2 / 2 + mu**3 / 4) / tau
    ch = dt / 6 * (4 + 2 * mu + mu**2 / 2) / tau
    c1 = dt / 6 / tau

    def forcing(times):
        return net.rates(net.drive(delayed(times)))

    known = 0
    D[0] = (-x0 + forcing(np.array([-T_ms]))[0]) / tau
    block = max(1, int(math.floor(T_ms / dt * (1 + 1e-12))))
    while known < n:
        m = min(block, n - known)
        tk = (known + np.arange(m)) * dt
        g0 = forcing(tk - T_ms)
        gh = forcing(tk + dt / 2 - T_ms)
        g1 = forcing(tk + dt - T_ms)
        u = c0 * g0 + ch * gh + c1 * g1
        new, _ = lfilter([1.0], [1.0, -a], u, axis=0, zi=(a * X[known])[None, :])
        _check_overflow(new, (known + m) * dt)
        X[known + 1 : known + m + 1] = new
        D[known + 1 : known + m + 1] = (-new + g1) / tau
        known += m
    t = np.arange(n + 1) * dt
    meta = {"kernel": "dirac", "T_ms": T_ms, "dt_ms": dt, "horizon_ms": n * dt,
            "init": x0.tolist(), "tau_bar_ms": tau}
    return Trajectory(t, X, None, meta)


def _init8(init):
    v = np.asarray(init, dtype=float).reshape(-1)
    if v.shape == (4,):
        v = np.concatenate([v, v])
    if v.shape != (8,) or not np.all(np.isfinite(v)):
        raise ConfigError(f"initial state must be 4 or 8 finite reals, got {init!r}")
    return v


def simulate_weak_gamma(net: NetworkSpec, T_ms: float, init=(0, 0, 0, 0), horizon_ms: float | None = None,
                        dt_ms: float | None = None) -> Trajectory:
    """Chain-trick system ``tau_bar X' = -X + F(C Y + P)``, ``T Y' = X - Y``.

    ``init`` holds 4 values (``Y(0) = X(0)``) or 8 values ``(X, Y)``.
    Defaults: ``dt = min(tau_bar, T)/50``, ``horizon = max(20 tau_bar, 10 T)``.
    """
    if not T_ms > 0:
        raise ConfigError(f"mean delay must be positive, got T={T_ms}")
    tau = net.tau_bar
    limit = min(tau, T_ms) / 20
    dt = min(tau, T_ms) / 50 if dt_ms is None else float(dt_ms)
    if not 0 < dt <= limit * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} ms exceeds min(tau_bar, T)/20 = {limit} ms")
    if horizon_ms is None:
        horizon_ms = math.ceil(max(20 * tau, 10 * T_ms) / dt) * dt
    n = _steps(horizon_ms, dt)
    s = _init8(init)
    A, k, c, D = net.bank
    # F(C y + P) = A expit(kC y + (kP - c)) - D, folded once outside the loop
    kC = k[:, None] * net.weights
    shift = k * net.inputs - c
    a_tau, d_tau = A / tau, D / tau
    inv_tau, inv_T = 1.0 / tau, 1.0 / T_ms
    h2, h6 = dt / 2, dt / 6

    def rhs(x, y):
        return a_tau * expit(kC @ y + shift) - d_tau - x * inv_tau, (x - y) * inv_T

    out = np.empty((n + 1, 8))
    out[0] = s
    x, y = s[:4].copy(), s[4:].copy()
    for i in range(n):
        k1x, k1y = rhs(x, y)
        k2x, k2y = rhs(x + h2 * k1x, y + h2 * k1y)
        k3x, k3y = rhs(x + h2 * k2x, y + h2 * k2y)
        k4x, k4y = rhs(x + dt * k3x, y + dt * k3y)
        x = x + h6 * (k1x + 2 * (k2x + k3x) + k4x)
        y = y + h6 * (k1y + 2 * (k2y + k3y) + k4y)
        out[i + 1, :4] = x
        out[i + 1, 4:] = y
        if i % 256 == 255:
            _check_overflow(out[i - 255 : i + 2], (i + 1) * dt)
    _check_overflow(out, n * dt)
    t = np.arange(n + 1) * dt
    meta = {"kernel": "weak-gamma", "T_ms": T_ms, "dt_ms": dt, "horizon_ms": n * dt,
            "init": out[0].tolist(), "tau_bar_ms": tau}
    return Trajectory(t, out[:, :4].copy(), out[:, 4:].copy(), meta)


def _interval_weights(T):
    """Exact weights of ``int_0^L (1/T) exp(-(L - s)/T) H(s) ds`` for a cubic Hermite ``H``.

    ``H`` interpolates values and slopes ``(x0, d0, x1, d1)`` at the ends of
    ``[0, L]``; the weights are returned for that basis.
    """

    def moments(L):
        # m_k = int_0^L (1/T) exp(-(L - s)/T) (s/L)**k ds, k = 0..3
        r = L / T
        if r < 1.0:
            # smooth integrand: Gauss-Legendre is exact to round-off here
            nodes, gw = np.polynomial.legendre.leggauss(16)
            sv = 0.5 * (nodes + 1)
            kern = np.exp(-r * (1 - sv)) * r * (0.5 * gw)
            return np.array([kern @ sv**k for k in range(4)])
        # substitute s = L - T v: m_k = int_0^r e^{-v} (1 - v/r)**k dv
        e = math.exp(-r)
        J = np.empty(4)  # J_j = int_0^r v^j e^{-v} dv
        J[0] = 1 - e
        for j in range(1, 4):
            J[j] = j * J[j - 1] - r**j * e
        return np.array([
            sum(math.comb(k, j) * (-1 / r) ** j * J[j] for j in range(k + 1)) for k in range(4)
        ])

    def weights(L):
        m0, m1, m2, m3 = moments(L)
        return np.array([
            2 * m3 - 3 * m2 + m0,
            L * (m3 - 2 * m2 + m1),
            -2 * m3 + 3 * m2,
            L * (m3 - m2),
        ])

    return weights


def convolution_oracle(net: NetworkSpec, T_ms: float, init=(0, 0, 0, 0), horizon_ms: float = 150.0,
                       dt_ms: float | None = None, max_iterations: int = 8) -> Trajectory:
    """Reference integrator evaluating ``Y(t) = int_{-inf}^t h(t - s) X(s) ds`` directly.

    The stored history is a cubic-Hermite interpolant of the grid values
    and slopes; its product with the exponential kernel is integrated
    exactly on each interval and summed over the full history (quadratic
    cost).  ``X = init`` before ``t = 0``.  Within a step the end state is
    found by fixed-point iteration.
    """
    if not T_ms > 0:
        raise ConfigError(f"mean delay must be positive, got T={T_ms}")
    tau = net.tau_bar
    dt = min(tau, T_ms) / 100 if dt_ms is None else float(dt_ms)
    if not 0 < dt <= tau / 20 * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} ms exceeds tau_bar/20 = {tau / 20} ms")
    n = _steps(horizon_ms, dt)
    if 4 * n > MAX_ORACLE_OPS:
        raise HorizonTooLong(f"{n} steps need more than {MAX_ORACLE_OPS} quadrature ops per step")
    x0 = _init4(init)
    C, P = net.weights, net.inputs

    weights = _interval_weights(T_ms)
    w_full = weights(dt)
    w_half = weights(dt / 2)

    X = np.empty((n + 1, 4))
    D = np.empty((n + 1, 4))
    contrib = np.empty((n, 4))  # full-interval integrals, each seen from its own right end
    X[0] = x0

    def history_sum(k, offset):
        # Y(t_k + offset) from the pre-history and completed intervals 0..k-1
        t = k * dt + offset
        y = math.exp(-t / T_ms) * x0
        if k:
            lags = (k - 1 - np.arange(k)) * dt + offset
            y = y + np.exp(-lags / T_ms) @ contrib[:k]
        return y

    def interval(xa, da, xb, db, w):
        return w[0] * xa + w[1] * da + w[2] * xb + w[3] * db

    def f(x, y):
        return (net.rates(C @ y + P) - x) / tau

    D[0] = f(x0, x0)
    for k in range(n):
        xk, dk = X[k], D[k]
        y0 = history_sum(k, 0.0)
        base_half = history_sum(k, dt / 2)
        base_full = history_sum(k, dt)
        x1, d1 = xk + dt * dk, dk
        for _ in range(max_iterations):
            # Hermite on [t_k, t_k + dt]; partial integral to the midpoint uses
            # the interpolant restricted to [0, dt/2]
            xm = 0.5 * (xk + x1) + dt / 8 * (dk - d1)
            dm = 1.5 * (x1 - xk) / dt - 0.25 * (dk + d1)
            yh = base_half + interval(xk, dk, xm, dm, w_half)
            y1 = base_full + interval(xk, dk, x1, d1, w_full)
            k1 = f(xk, y0)
            k2 = f(xk + dt / 2 * k1, yh)
            k3 = f(xk + dt / 2 * k2, yh)
            k4 = f(xk + dt * k3, y1)
            x_new = xk + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            d_new = f(x_new, y1)
            change = max(np.max(np.abs(x_new - x1)), dt * np.max(np.abs(d_new - d1)))
            x1, d1 = x_new, d_new
            if change <= 1e-14 * (1 + np.max(np.abs(x1))):
                break
        _check_overflow(x1, (k + 1) * dt)
        X[k + 1], D[k + 1] = x1, d1
        contrib[k] = interval(xk, dk, x1, d1, w_full)
    t = np.arange(n + 1) * dt
    meta = {"kernel": "weak-gamma", "method": "convolution", "T_ms": T_ms, "dt_ms": dt,
            "horizon_ms": n * dt, "init": x0.tolist(), "tau_bar_ms": tau}
    return Trajectory(t, X, None, meta)


class Behavior(str, Enum):
    CONVERGES = "ConvergesToEquilibrium"
    LIMIT_CYCLE = "LimitCycle"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class LongTerm:
    behavior: Behavior
    distance: float
    amplitude: float | None = None
    period_ms: float | None = None

    def to_dict(self) -> dict:
        return {"behavior": self.behavior.value, "distance": self.distance,
                "amplitude": self.amplitude, "period_ms": self.period_ms}


def classify_longterm(traj: Trajectory, eq, atol: float = 1e-5, envelope_tol: float = 0.02,
                      window: float = 0.4) -> LongTerm:
    """Classify the last ``window`` fraction of a trajectory.

    * converges: sup distance to ``eq`` in the final cycle-free stretch is
      below ``atol`` and shrinking across the window;
    * limit cycle: at least four E1 peaks, peak-to-trough amplitude of every
      cycle within ``envelope_tol`` of the mean; period from mean peak spacing;
    * otherwise undetermined.
    """
    x_star = np.asarray(getattr(eq, "x_star", eq), dtype=float)
    start = int(len(traj) * (1 - window))
    seg = traj.x[start:]
    t = traj.t[start:]
    dist = np.max(np.abs(seg - x_star), axis=1)
    final = float(dist[-1])
    half = len(dist) // 2
    if final < atol and np.max(dist[half:]) <= np.max(dist[:half]) + 1e-15:
        return LongTerm(Behavior.CONVERGES, final)
    sig = seg[:, 0]
    peaks, _ = find_peaks(sig)
    troughs, _ = find_peaks(-sig)
    if len(peaks) >= 4 and len(troughs) >= 3:
        amps = []
        for a, b in zip(peaks[:-1], peaks[1:]):
            inside = troughs[(troughs > a) & (troughs < b)]
            if len(inside):
                amps.append(0.5 * (sig[a] + sig[b]) - sig[inside].min())
        amps = np.array(amps)
        mean_amp = float(np.mean(amps)) if len(amps) else 0.0
        if mean_amp > 10 * atol and np.max(np.abs(amps - mean_amp)) <= envelope_tol * mean_amp:
            period = float(np.mean(np.diff(t[peaks])))
            return LongTerm(Behavior.LIMIT_CYCLE, final, mean_amp, period)
    return LongTerm(Behavior.UNDETERMINED, final)
