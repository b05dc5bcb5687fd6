"""Circuit description: connectivity schemes, sigmoids, kernels and presets.

Node order is ``(E1, I1, E2, I2)`` everywhere.  Weights are stored in a 4x4
matrix whose row is the *target* node and whose column is the *source* node,
so the slot ``w_E1I1`` (inhibition of E1 by I1) lives at ``C[0, 1]``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.special import expit

from .exceptions import (
    ConfigError,
    MissingWeight,
    SchemeMismatch,
    UnknownPreset,
    UnknownWeightName,
)

NODES = ("E1", "I1", "E2", "I2")
_NODE_INDEX = {name: i for i, name in enumerate(NODES)}


class Scheme(str, Enum):
    """The four symmetric coupling schemes between the two E/I pairs."""

    EE = "EE"  # E1 <-> E2
    II = "II"  # I1 <-> I2
    EtoI = "EtoI"  # E1 -> I2 and E2 -> I1
    ItoE = "ItoE"  # I1 -> E2 and I2 -> E1

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ConfigError(f"unknown connectivity scheme {value!r}")


INTRA_SLOTS = ("w_E1I1", "w_I1E1", "w_E2I2", "w_I2E2")

CROSS_SLOTS = {
    Scheme.EE: ("w_E1E2", "w_E2E1"),
    Scheme.II: ("w_I1I2", "w_I2I1"),
    Scheme.EtoI: ("w_I2E1", "w_I1E2"),
    Scheme.ItoE: ("w_E2I1", "w_E1I2"),
}

# The cross weights of the E->I scheme are printed with both subscript orders
# in the literature; accept the source-first spelling as an alias.
SLOT_ALIASES = {
    Scheme.EtoI: {"w_E1I2": "w_I2E1", "w_E2I1": "w_I1E2"},
}


def scheme_slots(scheme) -> tuple[str, ...]:
    scheme = Scheme.parse(scheme)
    return INTRA_SLOTS + CROSS_SLOTS[scheme]


def slot_index(name: str) -> tuple[int, int]:
    """Return ``(row, col)`` of a slot name such as ``"w_E2I2"``."""
    if not name.startswith("w_") or len(name) != 6:
        raise UnknownWeightName(f"malformed weight name {name!r}")
    target, source = name[2:4], name[4:6]
    try:
        return _NODE_INDEX[target], _NODE_INDEX[source]
    except KeyError:
        raise UnknownWeightName(f"malformed weight name {name!r}") from None


def canonical_slot(scheme, name: str) -> str:
    scheme = Scheme.parse(scheme)
    name = SLOT_ALIASES.get(scheme, {}).get(name, name)
    if name not in scheme_slots(scheme):
        raise UnknownWeightName(
            f"{name!r} is not a weight slot of scheme {scheme.value} "
            f"(slots: {', '.join(scheme_slots(scheme))})"
        )
    return name


def build_connectivity(scheme, named_weights: Mapping[str, float]) -> np.ndarray:
    """Place named weights into a 4x4 matrix (row = target, column = source).

    Every slot of the scheme must be given exactly once; aliases count as the
    slot they stand for.
    """
    scheme = Scheme.parse(scheme)
    values = {}
    for raw_name, value in named_weights.items():
        name = canonical_slot(scheme, raw_name)
        if name in values:
            raise ConfigError(f"weight slot {name} given twice (via alias {raw_name!r})")
        values[name] = float(value)
    missing = [s for s in scheme_slots(scheme) if s not in values]
    if missing:
        raise MissingWeight(missing)
    C = np.zeros((4, 4))
    for name, value in values.items():
        C[slot_index(name)] = value
    return C


def read_slots(scheme, C: np.ndarray) -> dict[str, float]:
    return {name: float(C[slot_index(name)]) for name in scheme_slots(scheme)}


def check_scheme(scheme, C: np.ndarray) -> None:
    """Raise :class:`SchemeMismatch` if ``C`` has entries outside the scheme."""
    mask = np.ones((4, 4), dtype=bool)
    for name in scheme_slots(scheme):
        mask[slot_index(name)] = False
    stray = np.argwhere(mask & (np.asarray(C) != 0))
    if stray.size:
        names = [f"w_{NODES[r]}{NODES[c]}" for r, c in stray]
        raise SchemeMismatch(
            f"weights {', '.join(names)} are nonzero but not part of scheme "
            f"{Scheme.parse(scheme).value}"
        )


# --------------------------------------------------------------------------
# sigmoids
#
# Both families are written as  F(u) = A * expit(k*u - c) - D  so a whole
# network can be evaluated with four parameter vectors.


@dataclass(frozen=True)
class WilsonCowanSigmoid:
    """Logistic shifted so that ``F(0) == 0``; ``b`` is the gain, ``theta`` the threshold."""

    b: float
    theta: float
    family = "WilsonCowan"

    def __post_init__(self):
        if not (self.b > 0 and self.theta > 0):
            raise ConfigError(f"WilsonCowan sigmoid needs b > 0 and theta > 0, got {self}")

    def _coeffs(self):
        return 1.0, self.b, self.b * self.theta, float(expit(-self.b * self.theta))

    @property
    def bounds(self) -> tuple[float, float]:
        offset = float(expit(-self.b * self.theta))
        return -offset, 1.0 - offset

    def __call__(self, u):
        return expit(self.b * (np.asarray(u, dtype=float) - self.theta)) - expit(-self.b * self.theta)

    def derivative(self, u):
        x = self.b * (np.asarray(u, dtype=float) - self.theta)
        # expit(x) * expit(-x) keeps the tail instead of rounding 1 - s to zero
        return self.b * expit(x) * expit(-x)

    def to_dict(self):
        return {"family": self.family, "b": self.b, "theta": self.theta}


@dataclass(frozen=True)
class NaturalMaxSigmoid:
    """``M / (1 + (M/B - 1) exp(-4u/M))``: maximal rate ``M``, base rate ``B = F(0)``."""

    M: float
    B: float
    family = "WangNaturalMax"

    def __post_init__(self):
        if not (0 < self.B < self.M):
            raise ConfigError(f"WangNaturalMax sigmoid needs 0 < B < M, got {self}")

    def _coeffs(self):
        return self.M, 4.0 / self.M, math.log(self.M / self.B - 1.0), 0.0

    @property
    def bounds(self) -> tuple[float, float]:
        return 0.0, self.M

    def __call__(self, u):
        _, k, c, _ = self._coeffs()
        return self.M * expit(k * np.asarray(u, dtype=float) - c)

    def derivative(self, u):
        _, k, c, _ = self._coeffs()
        x = k * np.asarray(u, dtype=float) - c
        return 4.0 * expit(x) * expit(-x)

    def to_dict(self):
        return {"family": self.family, "M": self.M, "B": self.B}


SigmoidSpec = Union[WilsonCowanSigmoid, NaturalMaxSigmoid]


def sigmoid_eval(spec: SigmoidSpec, u):
    return spec(u)


def sigmoid_deriv(spec: SigmoidSpec, u):
    return spec.derivative(u)


def sigmoid_from_dict(d: Mapping) -> SigmoidSpec:
    family = str(d.get("family", "")).replace("_", "").lower()
    try:
        if family in ("wilsoncowan", "wc"):
            return WilsonCowanSigmoid(float(d["b"]), float(d["theta"]))
        if family in ("wangnaturalmax", "naturalmax", "wang"):
            return NaturalMaxSigmoid(float(d["M"]), float(d["B"]))
    except KeyError as exc:
        raise ConfigError(f"sigmoid {dict(d)} lacks parameter {exc}") from None
    raise ConfigError(f"unknown sigmoid family {d.get('family')!r}")


# --------------------------------------------------------------------------
# kernels


class KernelKind(str, Enum):
    DIRAC = "dirac"
    WEAK_GAMMA = "weak-gamma"

    @classmethod
    def parse(cls, value) -> "KernelKind":
        if isinstance(value, cls):
            return value
        if isinstance(value, Kernel):
            return value.kind
        key = str(value).replace("_", "").replace("-", "").lower()
        if key in ("dirac", "discrete", "delta"):
            return cls.DIRAC
        if key in ("weakgamma", "gamma"):
            return cls.WEAK_GAMMA
        raise ConfigError(f"unknown kernel {value!r} (expected dirac or weak-gamma)")


@dataclass(frozen=True)
class Kernel:
    """Delay kernel family together with its mean delay ``tau_ms``."""

    kind: KernelKind
    tau_ms: float

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind.parse(self.kind))
        if not self.tau_ms > 0:
            raise ConfigError(f"kernel mean delay must be positive, got {self.tau_ms}")

    def to_dict(self):
        return {"kind": self.kind.value, "tau_ms": self.tau_ms}


# --------------------------------------------------------------------------
# network


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Complete four-node circuit.

    Parameters
    ----------
    scheme : Scheme
    weights : (4, 4) array, row = target, column = source
    sigmoids : four sigmoid specs, one per node
    inputs : external drive P_j added to each sigmoid argument
    tau_bar : membrane time constant (ms), shared by all nodes
    kernel : delay kernel and its mean delay
    """

    scheme: Scheme
    weights: np.ndarray
    sigmoids: tuple
    inputs: np.ndarray
    tau_bar: float
    kernel: Kernel
    _bank: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        weights = _frozen(self.weights)
        inputs = _frozen(self.inputs)
        if weights.shape != (4, 4):
            raise ConfigError(f"weights must be 4x4, got shape {weights.shape}")
        if inputs.shape != (4,):
            raise ConfigError(f"inputs must have 4 entries, got shape {inputs.shape}")
        if len(self.sigmoids) != 4:
            raise ConfigError("exactly four sigmoids are required")
        if not self.tau_bar > 0:
            raise ConfigError(f"tau_bar must be positive, got {self.tau_bar}")
        if not np.all(np.isfinite(weights)) or not np.all(np.isfinite(inputs)):
            raise ConfigError("weights and inputs must be finite")
        check_scheme(self.scheme, weights)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "sigmoids", tuple(self.sigmoids))
        object.__setattr__(self, "tau_bar", float(self.tau_bar))
        coeffs = np.array([s._coeffs() for s in self.sigmoids]).T
        object.__setattr__(self, "_bank", tuple(_frozen(c) for c in coeffs))

    def __eq__(self, other):
        if not isinstance(other, NetworkSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    # vectorised sigmoid bank --------------------------------------------
    @property
    def bank(self):
        """Per-node ``(A, k, c, D)`` with ``F(u) = A expit(k u - c) - D``."""
        return self._bank

    def rates(self, u):
        """Apply the node sigmoids to ``u`` (last axis of length 4)."""
        A, k, c, D = self._bank
        return A * expit(k * u - c) - D

    def gains(self, u):
        A, k, c, _ = self._bank
        x = k * u - c
        return A * k * expit(x) * expit(-x)

    def drive(self, x):
        """Sigmoid arguments ``C x + P`` for states ``x`` (last axis of length 4)."""
        return np.asarray(x) @ self.weights.T + self.inputs

    # convenience ---------------------------------------------------------
    def named_weights(self) -> dict[str, float]:
        return read_slots(self.scheme, self.weights)

    def with_weights(self, **updates) -> "NetworkSpec":
        """Return a copy with some weights replaced.

        Keys may be slot names (``w_E1E2``), scheme aliases, or the
        basal-ganglia magnitudes ``W_GS, W_SG, W_CS, W_SC, W_CC`` (signs are
        applied automatically).
        """
        C = np.array(self.weights)
        for key, value in updates.items():
            for slot, sign in resolve_parameter(self.scheme, key):
                C[slot_index(slot)] = sign * float(value)
        return replace(self, weights=C)

    def with_kernel(self, kind=None, tau_ms=None) -> "NetworkSpec":
        kernel = Kernel(
            self.kernel.kind if kind is None else kind,
            self.kernel.tau_ms if tau_ms is None else tau_ms,
        )
        return replace(self, kernel=kernel)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "weights": self.named_weights(),
            "sigmoids": [s.to_dict() for s in self.sigmoids],
            "inputs": [float(v) for v in self.inputs],
            "tau_bar_ms": self.tau_bar,
            "kernel": self.kernel.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NetworkSpec":
        try:
            scheme = Scheme.parse(d["scheme"])
            weights = build_connectivity(scheme, d["weights"])
            sigmoids = tuple(sigmoid_from_dict(s) for s in d["sigmoids"])
            kernel_d = d.get("kernel", {"kind": "dirac", "tau_ms": 1.0})
            kernel = Kernel(kernel_d["kind"], float(kernel_d["tau_ms"]))
            return cls(scheme, weights, sigmoids, d["inputs"], float(d["tau_bar_ms"]), kernel)
        except KeyError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"configuration lacks field {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed configuration: {exc}") from None


def load_config(path) -> NetworkSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return NetworkSpec.from_dict(data)


def save_config(net: NetworkSpec, path) -> None:
    Path(path).write_text(json.dumps(net.to_dict(), indent=2) + "\n")


# --------------------------------------------------------------------------
# named parameters and presets

# Basal-ganglia names carry magnitudes; inhibitory projections are stored
# with a negative sign in the matrix.
WANG_PARAMETERS = {
    "W_GS": (("w_E1I1", -1.0),),
    "W_SG": (("w_I1E1", 1.0),),
    "W_CS": (("w_E1E2", 1.0),),
    "W_SC": (("w_E2E1", -1.0),),
    "W_CC": (("w_E2I2", -1.0), ("w_I2E2", 1.0)),
}


def resolve_parameter(scheme, name: str) -> tuple[tuple[str, float], ...]:
    """Map a parameter name to ``((slot, sign), ...)`` for the given scheme."""
    upper = name.upper()
    if upper in WANG_PARAMETERS:
        slots = WANG_PARAMETERS[upper]
        for slot, _ in slots:
            canonical_slot(scheme, slot)
        return slots
    return ((canonical_slot(scheme, name), 1.0),)


PRESETS = ("wang-baseline", "pfc-bla-a", "pfc-bla-b")

_WANG_M = (300.0, 400.0, 71.77, 277.39)
_WANG_B = (17.0, 75.0, 3.62, 9.87)
# Striatal drive to GPe is inhibitory: it enters the GPe sigmoid with a
# negative sign (magnitude 40.51 spk/s); the cortical drive CIN is excitatory.
_WANG_INPUTS = (0.0, -40.51, 172.18, 0.0)
WANG_CRITICAL_DELAY_MS = 3.94924

_PFC_E = (1.2, 4.0)
_PFC_I = (1.0, 2.0)
_PFC_TAU_BAR = 10.0


def preset(name: str, **weights) -> NetworkSpec:
    """Named circuits from the basal-ganglia and prefrontal-amygdala applications.

    ``weights`` override individual slots (or ``W_*`` magnitudes for the
    basal-ganglia preset).  The prefrontal-amygdala presets leave both cross
    weights at 0 unless given.
    """
    key = name.lower()
    if key == "wang-baseline":
        C = build_connectivity(
            Scheme.EE,
            {
                "w_E1I1": -4.87,
                "w_I1E1": 2.56,
                "w_E1E2": 6.60,
                "w_E2E1": -2.58,
                "w_E2I2": -1.56,
                "w_I2E2": 1.56,
            },
        )
        net = NetworkSpec(
            Scheme.EE,
            C,
            tuple(NaturalMaxSigmoid(M, B) for M, B in zip(_WANG_M, _WANG_B)),
            _WANG_INPUTS,
            15.0,
            Kernel(KernelKind.DIRAC, WANG_CRITICAL_DELAY_MS),
        )
    elif key in ("pfc-bla-a", "pfc-bla-b"):
        scheme = Scheme.EtoI if key.endswith("a") else Scheme.EE
        named = {"w_I1E1": 2.0, "w_I2E2": 2.0, "w_E1I1": -16.0, "w_E2I2": -16.0}
        named.update({slot: 0.0 for slot in CROSS_SLOTS[scheme]})
        e, i = WilsonCowanSigmoid(*_PFC_E), WilsonCowanSigmoid(*_PFC_I)
        net = NetworkSpec(
            scheme,
            build_connectivity(scheme, named),
            (e, i, e, i),
            (6.0, 0.0, 6.0, 0.0),
            _PFC_TAU_BAR,
            Kernel(KernelKind.DIRAC, _PFC_TAU_BAR),
        )
    else:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if weights:
        net = net.with_weights(**weights)
    return net


def make_network(
    scheme,
    named_weights: Mapping[str, float],
    sigmoids: Sequence[SigmoidSpec],
    inputs: Sequence[float],
    tau_bar: float,
    kernel: Kernel | None = None,
) -> NetworkSpec:
    return NetworkSpec(
        Scheme.parse(scheme),
        build_connectivity(scheme, named_weights),
        tuple(sigmoids),
        inputs,
        tau_bar,
        kernel or Kernel(KernelKind.DIRAC, tau_bar),
    )
