"""Stability regions and Hopf critical delays in the (alpha, beta) plane.

The equilibrium is assumed stable without delay (region S); the functions
here locate the delays ``tau_tilde`` at which a pair of roots of the
characteristic function crosses the imaginary axis at ``z = +-i*omega``.

Two kernels are supported:

* Dirac: ``rho = 1``, ``theta = omega``.  Crossings form an infinite ladder
  and all are destabilising, so only the first one matters for stability.
* weak Gamma: ``rho = 1/sqrt(1 + omega**2)``, ``theta = arctan(omega)``.
  Crossings come in pairs and open a finite window of oscillation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import chareq
from .exceptions import ConfigError, NumericalError, OnSignBoundary, ZoneMismatch
from .model import KernelKind, NetworkSpec

RESIDUAL_TOL = 1e-8
SIGN_TOL = 1e-10


class DelayIndependentClass(str, Enum):
    STABLE_R = "StableR"
    UNSTABLE_SADDLE = "UnstableSaddle"
    CONDITIONAL = "Conditional"


class KernelClass(str, Enum):
    STABLE = "StableAllDelays"
    WINDOW = "HopfWindow"
    PERSISTENT = "HopfPersistent"
    UNSTABLE = "Unstable"


class GammaZone(str, Enum):
    STABLE = "StableAllDelays"
    GRAY = "Gray"
    PINK = "Pink"
    CYAN = "Cyan"
    UNSTABLE = "Unstable"


class SaddleNode(str, Enum):
    BIFURCATES = "Bifurcates"
    DEGENERATE = "Degenerate"


class Case(str, Enum):
    COMPLEX = "Case1"  # beta >= alpha**2 / 4: Q(i omega) is complex
    REAL = "Case2"  # beta < alpha**2 / 4: Q(i omega) is a negative real root


@dataclass(frozen=True)
class CriticalPoint:
    omega: float
    tau_tilde: float
    transversality: int
    case: Case
    label: str
    residual: float

    def to_dict(self, tau_bar=None) -> dict:
        d = {
            "label": self.label,
            "omega": self.omega,
            "tau_tilde": self.tau_tilde,
            "transversality": self.transversality,
            "case": self.case.value,
            "residual": self.residual,
        }
        if tau_bar is not None:
            d["T_ms"] = self.tau_tilde * tau_bar
        return d


@dataclass(frozen=True)
class CriticalDelaySet:
    """Imaginary-axis crossings for one kernel, sorted by ``tau_tilde``.

    ``window`` is ``(tau_minus, tau_plus)`` for the weak-Gamma kernel, where
    the equilibrium is unstable exactly for delays strictly inside it.
    """

    alpha: float
    beta: float
    kernel: KernelKind
    status: KernelClass
    entries: tuple = ()
    window: tuple | None = None
    zone: GammaZone | None = None

    @property
    def first(self) -> CriticalPoint | None:
        return self.entries[0] if self.entries else None

    @property
    def onset(self) -> CriticalPoint | None:
        """The destabilising crossing with the smallest delay."""
        for e in self.entries:
            if e.transversality > 0:
                return e
        return None

    def is_empty(self) -> bool:
        return not self.entries

    def stable_at(self, tau_tilde: float) -> bool:
        if self.status is KernelClass.UNSTABLE:
            return False
        if not self.entries:
            return True
        if self.window is not None:
            lo, hi = self.window
            return not (lo < tau_tilde < hi)
        return tau_tilde < self.entries[0].tau_tilde

    def to_dict(self, tau_bar=None) -> dict:
        d = {
            "alpha": self.alpha,
            "beta": self.beta,
            "kernel": self.kernel.value,
            "status": self.status.value,
            "zone": self.zone.value if self.zone else None,
            "entries": [e.to_dict(tau_bar) for e in self.entries],
            "window": list(self.window) if self.window else None,
        }
        if tau_bar is not None:
            d["window_ms"] = [w * tau_bar for w in self.window] if self.window else None
        return d


@dataclass(frozen=True)
class RegionClass:
    no_delay_stable: bool
    delay_independent: DelayIndependentClass
    kernel_class: dict = field(default_factory=dict)
    gamma_zone: GammaZone | None = None


# ---------------------------------------------------------------------------
# delay-independent regions


def no_delay_stable(alpha: float, beta: float) -> bool:
    """Stability without delay: ``alpha < 2`` and ``alpha - 1 < beta < (alpha - 4)**2 / 4``."""
    return alpha < 2 and alpha - 1 < beta < (alpha - 4) ** 2 / 4


def delay_independent_class(alpha: float, beta: float) -> DelayIndependentClass:
    if beta < alpha - 1:
        return DelayIndependentClass.UNSTABLE_SADDLE
    if abs(alpha) - 1 < beta < 1:
        return DelayIndependentClass.STABLE_R
    return DelayIndependentClass.CONDITIONAL


@dataclass(frozen=True)
class SaddleNodeResult:
    status: SaddleNode
    dz_dbeta: float | None


def saddle_node_check(alpha: float, tau_tilde: float = 1.0) -> SaddleNodeResult:
    """Transversality of the zero root on the line ``beta = alpha - 1``."""
    if abs(alpha - 2.0) <= 1e-12:
        return SaddleNodeResult(SaddleNode.DEGENERATE, None)
    return SaddleNodeResult(
        SaddleNode.BIFURCATES, tau_tilde / (2.0 * (tau_tilde + 1.0) * (alpha - 2.0))
    )


def _require_not_saddle(alpha, beta):
    if beta < alpha - 1:
        raise ConfigError(
            f"(alpha, beta) = ({alpha}, {beta}) lies below the saddle-node line; "
            "the equilibrium is unstable for every kernel"
        )


# ---------------------------------------------------------------------------
# polishing and certification


def _polish(alpha, beta, kernel, omega, tau, steps=3):
    """Newton steps on F(i*omega; tau) = 0 in the two real unknowns (omega, tau)."""
    kind = KernelKind.parse(kernel)
    best = (omega, tau, abs(chareq.char_residual(alpha, beta, tau, 1j * omega, kind)))
    for _ in range(steps):
        if best[2] == 0.0:
            break
        omega, tau = best[0], best[1]
        z = 1j * omega
        q = chareq.q_value(tau, z, kind)
        f = q * q - alpha * q + beta
        dp = 2 * q - alpha
        q_z = 2 * q * (1 / (z + tau) - chareq.h_hat_log_derivative(kind, z))
        q_t = 2 * q * (1 / (z + tau) - 1 / tau)
        f_w = complex(1j * dp * q_z)
        f_t = complex(dp * q_t)
        J = np.array([[f_w.real, f_t.real], [f_w.imag, f_t.imag]])
        try:
            d = np.linalg.solve(J, [-f.real, -f.imag])
        except np.linalg.LinAlgError:
            break
        w_new, t_new = omega + d[0], tau + d[1]
        if not (w_new > 0 and t_new > 0):
            break
        r_new = abs(chareq.char_residual(alpha, beta, t_new, 1j * w_new, kind))
        if r_new < best[2]:
            best = (w_new, t_new, r_new)
        else:
            break
    return best


def _certified(alpha, beta, kind, omega, tau, case, label):
    omega, tau, residual = _polish(alpha, beta, kind, omega, tau)
    if not residual < RESIDUAL_TOL:
        raise NumericalError(
            f"critical point {label} (omega={omega}, tau={tau}) at "
            f"(alpha, beta)=({alpha}, {beta}) has residual {residual:.3e}"
        )
    sign = transversality_sign(alpha, beta, kind, omega, tau)
    return CriticalPoint(float(omega), float(tau), sign, case, label, float(residual))


# ---------------------------------------------------------------------------
# Dirac kernel


def dirac_critical_delays(alpha: float, beta: float, k_max: int = 8) -> CriticalDelaySet:
    """Critical delays for the discrete delay, ladders ``k = 0 .. k_max``.

    Case 1 (``beta >= alpha**2/4``) uses
    ``omega_k = +-arccos(alpha / (2 sqrt(beta))) / 2 + k*pi - arctan(sqrt(sqrt(beta) - 1))``
    with ``tau = omega / sqrt(sqrt(beta) - 1)``; Case 2 uses
    ``omega_k = arcsin(sqrt(-1/r)) + k*pi`` with ``tau = omega * tan(omega)``
    for each real root ``r < -1`` of ``x**2 - alpha*x + beta``.
    An empty result means no crossing on the searched ladders.
    """
    _require_not_saddle(alpha, beta)
    if k_max < 0:
        raise ConfigError("k_max must be non-negative")
    kind = KernelKind.DIRAC
    if not no_delay_stable(alpha, beta):
        return CriticalDelaySet(alpha, beta, kind, KernelClass.UNSTABLE)
    points = []
    if beta >= alpha * alpha / 4:
        if beta > 1:
            half = 0.5 * math.acos(max(-1.0, min(1.0, alpha / (2 * math.sqrt(beta)))))
            slope = math.sqrt(math.sqrt(beta) - 1)
            shift = math.atan(slope)
            for k in range(k_max + 1):
                for sign, tag in ((-1, "-"), (1, "+")):
                    omega = sign * half + k * math.pi - shift
                    if omega > 0:
                        points.append((omega, omega / slope, Case.COMPLEX, f"omega_{k}{tag}"))
    else:
        disc = math.sqrt(alpha * alpha - 4 * beta)
        for root, name in (((alpha - disc) / 2, "r1"), ((alpha + disc) / 2, "r2")):
            if root < -1:
                s = math.sqrt(-1.0 / root)
                a = math.asin(s)
                tan_a = s / math.sqrt(1 - s * s)
                for k in range(k_max + 1):
                    omega = a + k * math.pi
                    label = f"omega_{k}+" if name == "r1" else f"omega_{k}+[r2]"
                    points.append((omega, omega * tan_a, Case.REAL, label))
    entries = [_certified(alpha, beta, kind, *p) for p in points]
    entries.sort(key=lambda e: e.tau_tilde)
    status = KernelClass.PERSISTENT if entries else KernelClass.STABLE
    return CriticalDelaySet(alpha, beta, kind, status, tuple(entries))


# ---------------------------------------------------------------------------
# weak Gamma kernel


def crossing_curve(omega, beta):
    """Right-hand side ``alpha = f(omega)`` of the complex-case crossing condition (weak Gamma)."""
    omega = np.asarray(omega, dtype=float)
    sb = math.sqrt(beta)
    s = np.sqrt(np.maximum((sb - 1 - omega**2) / (1 + omega**2), 0.0))
    return -(sb * (-2 + 4 / (1 + omega**2)) + 4 * (-1 + omega**2 + 2 * omega * s))


def f_min_curve(beta):
    """``f(u2) = 2 (8 - 8 beta**(1/4) + sqrt(beta))``: boundary of the weak-Gamma stable region above the parabola."""
    beta = np.asarray(beta, dtype=float)
    return 2 * (8 - 8 * beta**0.25 + np.sqrt(beta))


def critical_frequencies(beta: float):
    """Stationary points ``(u1, u2, u3)`` of ``f`` on ``[0, sqrt(sqrt(beta) - 1)]``.

    ``u2 = sqrt(beta**(1/4) - 1)``; ``u1 < u2 < u3`` are the points where
    ``f = -2 sqrt(beta)``, real only for ``beta >= 16`` (``None`` otherwise).
    """
    if beta <= 1:
        raise ConfigError("critical frequencies need beta > 1")
    sb = math.sqrt(beta)
    u2 = math.sqrt(beta**0.25 - 1)
    if beta < 16:
        return None, u2, None
    root = math.sqrt(max(beta - 4 * sb, 0.0))
    u1 = math.sqrt((sb - 2 - root) / 2)
    u3 = math.sqrt((sb - 2 + root) / 2)
    return u1, u2, u3


def gamma_zone_classify(alpha: float, beta: float) -> GammaZone:
    """Zone of the weak-Gamma crossing structure.

    * ``StableAllDelays``: no crossing for any delay;
    * ``Gray``: two crossings, complex case;
    * ``Pink``: four crossings, complex case (``beta > 16``);
    * ``Cyan``: real case, two crossings (four when both roots lie below -4);
    * ``Unstable``: outside the no-delay stability region.
    """
    _require_not_saddle(alpha, beta)
    if not no_delay_stable(alpha, beta):
        return GammaZone.UNSTABLE
    if beta >= alpha * alpha / 4:
        if beta <= 1:
            return GammaZone.STABLE
        boundary = float(f_min_curve(beta))
        if alpha > boundary:
            return GammaZone.GRAY
        if beta > 16 and alpha < boundary:
            return GammaZone.PINK
        return GammaZone.STABLE
    r = abs(alpha - math.sqrt(alpha * alpha - 4 * beta))
    return GammaZone.CYAN if r > 8 else GammaZone.STABLE


def _gray_roots(alpha, beta):
    sb = math.sqrt(beta)
    q = math.sqrt(alpha + 2 * sb)
    inner = math.sqrt(max((alpha - 2 * sb) * (16 + alpha - 8 * q - 2 * sb), 0.0))
    base = -8 - alpha + 4 * q + 2 * sb
    return tuple(math.sqrt(max(base + s * inner, 0.0)) / (2 * math.sqrt(2)) for s in (-1, 1))


def _pink_roots(alpha, beta):
    sb = math.sqrt(beta)
    q = math.sqrt(alpha + 2 * sb)
    inner = math.sqrt(max((alpha - 2 * sb) * (16 + alpha + 8 * q - 2 * sb), 0.0))
    base = -8 - alpha - 4 * q + 2 * sb
    return tuple(math.sqrt(max(base + s * inner, 0.0)) / (2 * math.sqrt(2)) for s in (-1, 1))


def _cyan_roots(r):
    return tuple((s * math.sqrt(r - 8) + math.sqrt(r)) / (2 * math.sqrt(2)) for s in (-1, 1))


def _case1_tau(beta, omega):
    return omega / math.sqrt(math.sqrt(beta) / (1 + omega * omega) - 1)


def gamma_critical_window(alpha: float, beta: float) -> CriticalDelaySet:
    """Hopf window ``(tau(omega_-), tau(omega_+))`` for the weak-Gamma kernel.

    Raises :class:`ZoneMismatch` when the point has no crossings.
    """
    zone = gamma_zone_classify(alpha, beta)
    kind = KernelKind.WEAK_GAMMA
    if zone not in (GammaZone.GRAY, GammaZone.PINK, GammaZone.CYAN):
        raise ZoneMismatch(f"(alpha, beta) = ({alpha}, {beta}) is in zone {zone.value}")
    points = []
    if zone is GammaZone.CYAN:
        disc = math.sqrt(alpha * alpha - 4 * beta)
        w_lo, w_hi = _cyan_roots(abs(alpha - disc))
        points += [(w_lo, w_lo**2, Case.REAL, "omega-"), (w_hi, w_hi**2, Case.REAL, "omega+")]
        r2 = abs(alpha + disc)
        if alpha + disc < 0 and r2 > 8:
            v_lo, v_hi = _cyan_roots(r2)
            points += [(v_lo, v_lo**2, Case.REAL, "v-"), (v_hi, v_hi**2, Case.REAL, "v+")]
    else:
        w_lo, w_hi = _gray_roots(alpha, beta)
        points += [
            (w_lo, _case1_tau(beta, w_lo), Case.COMPLEX, "omega-"),
            (w_hi, _case1_tau(beta, w_hi), Case.COMPLEX, "omega+"),
        ]
        if zone is GammaZone.PINK:
            v_lo, v_hi = _pink_roots(alpha, beta)
            points += [
                (v_lo, _case1_tau(beta, v_lo), Case.COMPLEX, "v-"),
                (v_hi, _case1_tau(beta, v_hi), Case.COMPLEX, "v+"),
            ]
    entries = [_certified(alpha, beta, kind, *p) for p in points]
    entries.sort(key=lambda e: e.tau_tilde)
    by_label = {e.label: e for e in entries}
    window = (by_label["omega-"].tau_tilde, by_label["omega+"].tau_tilde)
    return CriticalDelaySet(alpha, beta, kind, KernelClass.WINDOW, tuple(entries), window, zone)


def gamma_critical_delays(alpha: float, beta: float) -> CriticalDelaySet:
    """Like :func:`gamma_critical_window` but returns an empty set in stable zones."""
    _require_not_saddle(alpha, beta)
    zone = gamma_zone_classify(alpha, beta)
    kind = KernelKind.WEAK_GAMMA
    if zone is GammaZone.UNSTABLE:
        return CriticalDelaySet(alpha, beta, kind, KernelClass.UNSTABLE, zone=zone)
    if zone is GammaZone.STABLE:
        return CriticalDelaySet(alpha, beta, kind, KernelClass.STABLE, zone=zone)
    return gamma_critical_window(alpha, beta)


# ---------------------------------------------------------------------------
# transversality


def transversality_sign(alpha: float, beta: float, kernel, omega: float, tau_tilde: float) -> int:
    """Direction (+1 destabilising, -1 stabilising) of a verified crossing.

    Raises :class:`OnSignBoundary` when the sign expression vanishes to
    within 1e-10.
    """
    kind = KernelKind.parse(kernel)
    if kind is KernelKind.DIRAC:
        g = 1 + (1j * omega + tau_tilde)
        value = omega**2 / (tau_tilde * abs(g) ** 2)
    elif beta >= alpha * alpha / 4:
        radicand = math.sqrt(beta) / (omega * omega + 1) - 1
        if radicand <= 0:
            raise OnSignBoundary(f"omega={omega} outside the complex-case domain")
        value = 1 - omega / math.sqrt(radicand)
    else:
        value = 1 - omega * omega
    if abs(value) < SIGN_TOL:
        raise OnSignBoundary(f"transversality vanishes at omega={omega}")
    return 1 if value > 0 else -1


# ---------------------------------------------------------------------------
# dispatch and circuit-level helpers


def critical_delays(alpha: float, beta: float, kernel, k_max: int = 8) -> CriticalDelaySet:
    kind = KernelKind.parse(kernel)
    if kind is KernelKind.DIRAC:
        return dirac_critical_delays(alpha, beta, k_max)
    return gamma_critical_delays(alpha, beta)


def classify_region(alpha: float, beta: float) -> RegionClass:
    di = delay_independent_class(alpha, beta)
    if di is DelayIndependentClass.UNSTABLE_SADDLE:
        return RegionClass(False, di, {}, None)
    stable0 = no_delay_stable(alpha, beta)
    kc = {kind: critical_delays(alpha, beta, kind, k_max=0).status for kind in KernelKind}
    return RegionClass(stable0, di, kc, gamma_zone_classify(alpha, beta))


def stable_at_delay(alpha: float, beta: float, kernel, tau_tilde: float) -> bool:
    """Local stability of the equilibrium at the given scaled mean delay."""
    if beta < alpha - 1:
        return False
    return critical_delays(alpha, beta, kernel, k_max=0).stable_at(tau_tilde)


@dataclass(frozen=True)
class PhysicalCriticalDelays:
    """Critical delays of a circuit in milliseconds."""

    equilibrium: object
    tau_bar: float
    delays: CriticalDelaySet

    @property
    def T_ms(self) -> list[float]:
        return [e.tau_tilde * self.tau_bar for e in self.delays.entries]

    @property
    def first_T_ms(self) -> float | None:
        onset = self.delays.onset
        return None if onset is None else onset.tau_tilde * self.tau_bar

    @property
    def window_ms(self) -> tuple | None:
        w = self.delays.window
        return None if w is None else (w[0] * self.tau_bar, w[1] * self.tau_bar)

    @property
    def onset_hz(self) -> float | None:
        onset = self.delays.onset
        if onset is None:
            return None
        return chareq.frequency_hz(onset.omega, onset.tau_tilde * self.tau_bar)

    def to_dict(self) -> dict:
        d = self.delays.to_dict(self.tau_bar)
        d["tau_bar_ms"] = self.tau_bar
        d["first_T_ms"] = self.first_T_ms
        d["onset_hz"] = self.onset_hz
        return d


def physical_critical_delays(
    net: NetworkSpec, kernel=None, k_max: int = 8, eq_index: int = 0
) -> PhysicalCriticalDelays:
    """Equilibrium -> (alpha, beta) -> critical delays, converted to ms via ``tau_bar``."""
    from .equilibrium import equilibrium

    eq = equilibrium(net, eq_index)
    kind = KernelKind.parse(kernel if kernel is not None else net.kernel.kind)
    if eq.beta < eq.alpha - 1:
        delays = CriticalDelaySet(eq.alpha, eq.beta, kind, KernelClass.UNSTABLE)
    else:
        delays = critical_delays(eq.alpha, eq.beta, kind, k_max)
    return PhysicalCriticalDelays(eq, net.tau_bar, delays)
