"""scikit-learn adapters over the analysis pipeline.

Nothing is learned from data: ``fit`` only validates parameters and
records the input width, so the objects compose with ``Pipeline`` and
``get_params``/``set_params``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .equilibrium import equilibrium
from .exceptions import ConfigError, NumericalError
from .model import KernelKind, NetworkSpec, preset, resolve_parameter
from .stability import critical_delays, stable_at_delay


def _check_ab(X):
    X = check_array(X, dtype=float, ensure_all_finite=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected columns (alpha, beta), got {X.shape[1]} columns")
    return X


class CouplingCoefficients(TransformerMixin, BaseEstimator):
    """Map rows of weight values to the equilibrium's ``(alpha, beta)``.

    Rows whose equilibrium cannot be found give NaN.
    """

    def __init__(self, base="wang-baseline", parameters=("W_GS", "W_SC"), eq_index=0):
        self.base = base
        self.parameters = parameters
        self.eq_index = eq_index

    def _network(self) -> NetworkSpec:
        return preset(self.base) if isinstance(self.base, str) else self.base

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        net = self._network()
        if X.shape[1] != len(self.parameters):
            raise ValueError(f"expected {len(self.parameters)} columns, got {X.shape[1]}")
        for name in self.parameters:
            resolve_parameter(net.scheme, name)
        self.network_ = net
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        out = np.full((len(X), 2), np.nan)
        for i, row in enumerate(X):
            net = self.network_.with_weights(**dict(zip(self.parameters, row)))
            try:
                eq = equilibrium(net, self.eq_index)
            except (NumericalError, ConfigError):
                continue
            out[i] = eq.alpha, eq.beta
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(["alpha", "beta"], dtype=object)


class CriticalDelayTransformer(TransformerMixin, BaseEstimator):
    """``(alpha, beta)`` rows to ``(tau_star, tau_minus, tau_plus)``.

    Delays are scaled by ``tau_bar`` (1 gives ``tau_tilde``); NaN marks
    quantities that do not exist, including points below the saddle-node line.
    """

    def __init__(self, kernel="dirac", tau_bar=1.0):
        self.kernel = kernel
        self.tau_bar = tau_bar

    def fit(self, X, y=None):
        X = _check_ab(X)
        self.kernel_ = KernelKind.parse(self.kernel)
        if not self.tau_bar > 0:
            raise ValueError("tau_bar must be positive")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "kernel_")
        X = _check_ab(X)
        out = np.full((len(X), 3), np.nan)
        for i, (a, b) in enumerate(X):
            if b < a - 1:
                continue
            cd = critical_delays(a, b, self.kernel_, k_max=0)
            if cd.onset is not None:
                out[i, 0] = cd.onset.tau_tilde * self.tau_bar
            if cd.window is not None:
                out[i, 1:] = np.asarray(cd.window) * self.tau_bar
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(["tau_star", "tau_minus", "tau_plus"], dtype=object)


class DelayStabilityClassifier(ClassifierMixin, BaseEstimator):
    """Predict local stability (1) or instability (0) at a fixed scaled delay."""

    def __init__(self, kernel="dirac", tau_tilde=1.0):
        self.kernel = kernel
        self.tau_tilde = tau_tilde

    def fit(self, X, y=None):
        X = _check_ab(X)
        if not self.tau_tilde > 0:
            raise ValueError("tau_tilde must be positive")
        self.kernel_ = KernelKind.parse(self.kernel)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "kernel_")
        X = _check_ab(X)
        return np.array([int(stable_at_delay(a, b, self.kernel_, self.tau_tilde)) for a, b in X])
