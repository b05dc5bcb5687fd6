"""Fixed points, linearisation gains and the reduced coefficients (alpha, beta)."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, NoConvergence
from .model import NetworkSpec, Scheme, check_scheme, slot_index


@dataclass(frozen=True)
class SolverOpts:
    tolerance: float = 1e-10
    max_iterations: int = 100
    lattice_points: int = 3
    damping: float = 0.2
    fallback_iterations: int = 5000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError(f"solver tolerance must be positive, got {self.tolerance}")
        if not self.max_iterations > 0:
            raise ConfigError(f"max_iterations must be positive, got {self.max_iterations}")
        if not 0 < self.damping <= 1:
            raise ConfigError(f"damping must lie in (0, 1], got {self.damping}")


@dataclass(frozen=True, eq=False)
class Equilibrium:
    """A fixed point ``x_star`` with its gains ``phi`` and coefficients ``alpha``, ``beta``."""

    x_star: np.ndarray
    phi: np.ndarray
    residual: float
    alpha: float
    beta: float

    def to_dict(self) -> dict:
        return {
            "x_star": [float(v) for v in self.x_star],
            "phi": [float(v) for v in self.phi],
            "alpha": float(self.alpha),
            "beta": float(self.beta),
            "residual": float(self.residual),
        }

    @classmethod
    def from_dict(cls, d) -> "Equilibrium":
        return cls(
            np.asarray(d["x_star"], dtype=float),
            np.asarray(d["phi"], dtype=float),
            float(d["residual"]),
            float(d["alpha"]),
            float(d["beta"]),
        )


def _w(C, name):
    return C[slot_index(name)]


def coefficients(scheme, C: np.ndarray, phi) -> tuple[float, float]:
    """(alpha, beta) of the reduced characteristic equation for gains ``phi``.

    Raises :class:`~coupledwc.exceptions.SchemeMismatch` when ``C`` has
    entries outside the scheme's slots.
    """
    scheme = Scheme.parse(scheme)
    check_scheme(scheme, C)
    p1, p2, p3, p4 = (float(v) for v in phi)
    loop1 = p1 * p2 * _w(C, "w_E1I1") * _w(C, "w_I1E1")
    loop2 = p3 * p4 * _w(C, "w_E2I2") * _w(C, "w_I2E2")
    if scheme is Scheme.EE:
        alpha = loop2 + p1 * p3 * _w(C, "w_E1E2") * _w(C, "w_E2E1") + loop1
        beta = loop1 * loop2
    elif scheme is Scheme.II:
        alpha = loop2 + p2 * p4 * _w(C, "w_I1I2") * _w(C, "w_I2I1") + loop1
        beta = loop1 * loop2
    elif scheme is Scheme.EtoI:
        alpha = loop2 + loop1
        beta = (
            p1 * p2 * p3 * p4 * _w(C, "w_E2I2") * _w(C, "w_E1I1")
            * (_w(C, "w_I1E1") * _w(C, "w_I2E2") - _w(C, "w_I1E2") * _w(C, "w_I2E1"))
        )
    else:
        alpha = loop2 + loop1
        beta = (
            p1 * p2 * p3 * p4 * _w(C, "w_I2E2") * _w(C, "w_I1E1")
            * (_w(C, "w_E1I1") * _w(C, "w_E2I2") - _w(C, "w_E2I1") * _w(C, "w_E1I2"))
        )
    return float(alpha), float(beta)


def gains_at(net: NetworkSpec, x) -> np.ndarray:
    return net.gains(net.drive(np.asarray(x, dtype=float)))


def alpha_beta(net: NetworkSpec, eq_point) -> tuple[float, float]:
    """(alpha, beta) at an equilibrium of ``net``; gains come from the sigmoid derivatives."""
    return coefficients(net.scheme, net.weights, gains_at(net, eq_point))


def fixed_point_residual(net: NetworkSpec, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.max(np.abs(net.rates(net.drive(x)) - x)))


def no_delay_jacobian(net: NetworkSpec, x) -> np.ndarray:
    """Jacobian of the undelayed vector field at ``x`` (units 1/ms)."""
    phi = gains_at(net, x)
    return (-np.eye(4) + phi[:, None] * net.weights) / net.tau_bar


def start_lattice(net: NetworkSpec, points: int = 3) -> np.ndarray:
    """Multi-start points: a ``points**4`` lattice inside each node's output range, plus the origin."""
    fractions = (np.arange(points) + 0.5) / points
    axes = []
    for s in net.sigmoids:
        lo, hi = s.bounds
        axes.append(lo + (hi - lo) * fractions)
    grid = np.array(list(itertools.product(*axes)))
    return np.vstack([np.zeros(4), grid])


_LAMBDAS = 0.5 ** np.arange(13)


def _newton_batch(net: NetworkSpec, X, opts: SolverOpts):
    """Vectorised Newton on G(x) = F(Cx + P) - x for a batch of starts."""
    X = np.array(X, dtype=float)
    eye = np.eye(4)
    C = net.weights
    prev = np.full(len(X), np.inf)
    for _ in range(opts.max_iterations):
        U = net.drive(X)
        G = net.rates(U) - X
        res = np.max(np.abs(G), axis=1)
        # polish past the tolerance until the residual stalls at round-off
        done = (res <= 1e-3 * opts.tolerance) | ((res <= opts.tolerance) & (res >= 0.5 * prev))
        prev = np.where(done, prev, res)
        active = ~done & np.all(np.isfinite(X), axis=1)
        if not active.any():
            break
        phi = net.gains(U[active])
        J = phi[:, :, None] * C[None, :, :] - eye
        try:
            step = np.linalg.solve(J, -G[active][:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(j, -g, rcond=None)[0] for j, g in zip(J, G[active])])
        # cap the step at the size of the node ranges to keep far starts sane
        scale = np.max(np.abs(step), axis=1, keepdims=True)
        limit = 10.0 * (1.0 + np.max(np.abs(X[active]), axis=1, keepdims=True))
        step = np.where(scale > limit, step * limit / scale, step)
        # backtracking on the residual: full steps first, then the longest of
        # 1/2, ..., 2**-12 that decreases it for the rows that need one
        Xa = X[active]
        full = Xa + step
        r_full = np.max(np.abs(net.rates(net.drive(full)) - full), axis=1)
        res_a = res[active]
        retry = ~(r_full < (1 - 1e-4) * res_a)
        if retry.any():
            lam = _LAMBDAS[1:, None, None]
            trials = Xa[retry][None] + lam * step[retry][None]
            r_trial = np.max(np.abs(net.rates(net.drive(trials)) - trials), axis=2)
            ok = r_trial < (1 - 1e-4 * lam[:, :, 0]) * res_a[retry][None, :]
            pick = np.where(ok.any(axis=0), ok.argmax(axis=0), len(lam) - 1)
            full[retry] = trials[pick, np.arange(retry.sum())]
        X[active] = full
    U = net.drive(X)
    res = np.max(np.abs(net.rates(U) - X), axis=1)
    return X, res


def _damped_iteration(net: NetworkSpec, X, opts: SolverOpts):
    """Damped fixed-point iteration ``x <- (1 - lam) x + lam F(Cx + P)`` on a batch."""
    lam = opts.damping
    X = np.array(X, dtype=float)
    for _ in range(opts.fallback_iterations):
        X_new = (1 - lam) * X + lam * net.rates(net.drive(X))
        if np.max(np.abs(X_new - X)) <= opts.tolerance:
            return X_new
        X = X_new
    return X


def make_equilibrium(net: NetworkSpec, x, residual=None) -> Equilibrium:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    phi = gains_at(net, x)
    phi.setflags(write=False)
    alpha, beta = coefficients(net.scheme, net.weights, phi)
    if residual is None:
        residual = fixed_point_residual(net, x)
    return Equilibrium(x, phi, float(residual), alpha, beta)


def find_equilibria(net: NetworkSpec, opts: SolverOpts | None = None, starts=None) -> list[Equilibrium]:
    """All equilibria reachable from the multi-start lattice.

    Newton's method with the analytic Jacobian ``-I + diag(phi) C`` is run
    from every start (plus any extra ``starts``); starts that fail fall back
    to a damped fixed-point iteration followed by another Newton pass.
    Results are de-duplicated (sup distance ``<= 10 * tolerance``) and
    sorted by Euclidean norm.
    """
    opts = opts or SolverOpts()
    X0 = start_lattice(net, opts.lattice_points)
    if starts is not None:
        # extra starts go last so lattice-found copies win the de-duplication
        X0 = np.vstack([X0, np.atleast_2d(np.asarray(starts, dtype=float))])
    X, res = _newton_batch(net, X0, opts)
    bad = ~(res <= opts.tolerance)
    if bad.any():
        retry = _damped_iteration(net, X0[bad], opts)
        Xr, rr = _newton_batch(net, retry, opts)
        X[bad], res[bad] = Xr, rr
    ok = res <= opts.tolerance
    if not ok.any():
        diagnostics = [
            {"start": X0[i].tolist(), "end": X[i].tolist(), "residual": float(res[i])}
            for i in range(len(X0))
        ]
        raise NoConvergence("no start converged to an equilibrium", diagnostics)
    found: list[np.ndarray] = []
    residuals: list[float] = []
    radius = 10 * opts.tolerance
    for x, r in zip(X[ok], res[ok]):
        if not found or np.min(np.max(np.abs(np.asarray(found) - x), axis=1)) > radius:
            found.append(x)
            residuals.append(r)
    order = sorted(range(len(found)), key=lambda i: (float(np.linalg.norm(found[i])), tuple(found[i])))
    return [make_equilibrium(net, found[i], residuals[i]) for i in order]


def equilibrium(net: NetworkSpec, index: int = 0, opts: SolverOpts | None = None) -> Equilibrium:
    """The ``index``-th equilibrium by norm (default: the smallest)."""
    eqs = find_equilibria(net, opts)
    try:
        return eqs[index]
    except IndexError:
        raise ConfigError(f"equilibrium index {index} out of range ({len(eqs)} found)") from None
