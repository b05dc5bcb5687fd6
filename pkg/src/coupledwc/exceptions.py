"""Exception hierarchy.

Configuration problems derive from :class:`ConfigError` (CLI exit code 2),
numerical failures from :class:`NumericalError` (CLI exit code 3).
"""


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


class UnknownWeightName(ConfigError, KeyError):
    def __str__(self):
        return ConfigError.__str__(self)


class MissingWeight(ConfigError, KeyError):
    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__(f"missing weight slot(s): {', '.join(self.missing)}")

    def __str__(self):
        return ConfigError.__str__(self)


class UnknownPreset(ConfigError, KeyError):
    def __str__(self):
        return ConfigError.__str__(self)


class SchemeMismatch(ConfigError):
    pass


class ZoneMismatch(ValueError):
    pass


class StepTooLarge(ConfigError):
    pass


class HorizonTooLong(ConfigError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class KernelSingularity(NumericalError, ZeroDivisionError):
    pass


class OnSignBoundary(NumericalError):
    pass


class IntegrationOverflow(NumericalError, OverflowError):
    pass


class NoPeak(NumericalError):
    pass
