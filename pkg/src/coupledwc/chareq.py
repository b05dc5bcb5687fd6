"""Kernel transforms and the reduced characteristic function.

All quantities here use the nondimensional convention:

* ``tau_tilde = T / tau_bar`` is the mean delay in units of the time constant;
* ``z`` is the eigenvalue scaled by the mean delay ``T`` (the transform is
  ``H_hat(z) = H(z / T)``), so a root ``z = i*omega`` corresponds to a
  physical angular frequency ``omega / T`` (rad/ms).

The characteristic function is ``F(z) = Q(z)**2 - alpha*Q(z) + beta`` with
``Q(z) = ((z + tau_tilde) / (tau_tilde * H_hat(z)))**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, KernelSingularity
from .model import KernelKind


@dataclass(frozen=True)
class KernelTransform:
    """Polar form ``H_hat(i*omega) = rho * exp(-i*theta)``."""

    rho: float
    theta: float


def kernel_transform(kernel, omega: float) -> KernelTransform:
    kind = KernelKind.parse(kernel)
    if omega < 0:
        raise ConfigError(f"omega must be non-negative, got {omega}")
    if kind is KernelKind.DIRAC:
        return KernelTransform(1.0, float(omega))
    return KernelTransform(1.0 / math.sqrt(omega * omega + 1.0), math.atan(omega))


def h_hat(kernel, z):
    """Normalised kernel transform at scaled frequency ``z``."""
    kind = KernelKind.parse(kernel)
    z = np.asarray(z, dtype=complex)
    if kind is KernelKind.DIRAC:
        return np.exp(-z)
    if np.any(z == -1):
        raise KernelSingularity("weak-Gamma transform has a pole at z = -1")
    return 1.0 / (1.0 + z)


def h_hat_log_derivative(kernel, z):
    """``H_hat'(z) / H_hat(z)``."""
    kind = KernelKind.parse(kernel)
    z = np.asarray(z, dtype=complex)
    if kind is KernelKind.DIRAC:
        return -np.ones_like(z)
    if np.any(z == -1):
        raise KernelSingularity("weak-Gamma transform has a pole at z = -1")
    return -1.0 / (1.0 + z)


def q_value(tau_tilde: float, z, kernel):
    """``Q(z) = ((z + tau_tilde) / (tau_tilde * H_hat(z)))**2``; equals 1 at ``z = 0``."""
    if not tau_tilde > 0:
        raise ConfigError(f"tau_tilde must be positive, got {tau_tilde}")
    kind = KernelKind.parse(kernel)
    z = np.asarray(z, dtype=complex)
    if kind is KernelKind.DIRAC:
        inv_h = np.exp(z)
    else:
        if np.any(z == -1):
            raise KernelSingularity("weak-Gamma transform has a pole at z = -1")
        inv_h = 1.0 + z
    # z / tau + 1 keeps Q(0) == 1 exactly
    q = ((z / tau_tilde + 1.0) * inv_h) ** 2
    return q if q.ndim else complex(q)


def char_residual(alpha: float, beta: float, tau_tilde: float, z, kernel):
    """``F(z) = Q**2 - alpha*Q + beta``; a root certifies an eigenvalue ``z``."""
    q = q_value(tau_tilde, z, kernel)
    return q * q - alpha * q + beta


def tau_tilde_from_ms(T_ms: float, tau_bar_ms: float) -> float:
    return T_ms / tau_bar_ms


def delay_ms(tau_tilde: float, tau_bar_ms: float) -> float:
    return tau_tilde * tau_bar_ms


def physical_eigenvalue(z, T_ms: float):
    """Eigenvalue in 1/ms for a scaled root ``z`` at mean delay ``T_ms``."""
    return np.asarray(z) / T_ms


def frequency_hz(omega: float, T_ms: float) -> float:
    """Oscillation frequency (Hz) of a scaled imaginary root ``i*omega`` at delay ``T_ms``."""
    if not (omega > 0 and T_ms > 0):
        raise ConfigError(f"need omega > 0 and T > 0, got omega={omega}, T={T_ms}")
    return 1000.0 * omega / (2.0 * math.pi * T_ms)


def dz_dtau(tau_tilde: float, z, kernel):
    """Root velocity ``dz/d tau_tilde`` along a branch of ``F(z) = 0``.

    Obtained by implicit differentiation of ``Q``; independent of alpha
    and beta.
    """
    z = np.asarray(z, dtype=complex)
    g = 1.0 - (z + tau_tilde) * h_hat_log_derivative(kernel, z)
    return z / (tau_tilde * g)
