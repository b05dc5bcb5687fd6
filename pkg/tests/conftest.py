import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coupledwc.model import (
    CROSS_SLOTS,
    INTRA_SLOTS,
    NaturalMaxSigmoid,
    Scheme,
    WilsonCowanSigmoid,
    make_network,
)

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


def random_circuit(rng, scheme=Scheme.EE, family="wc", tau_bar=10.0, scale=4.0):
    """A circuit with conventional signs: E->I positive, I->E negative, random cross weights."""
    named = {
        "w_I1E1": rng.uniform(0.5, scale),
        "w_I2E2": rng.uniform(0.5, scale),
        "w_E1I1": -rng.uniform(0.5, scale),
        "w_E2I2": -rng.uniform(0.5, scale),
    }
    for slot in CROSS_SLOTS[scheme]:
        named[slot] = rng.uniform(-scale, scale)
    assert set(named) == set(INTRA_SLOTS) | set(CROSS_SLOTS[scheme])
    if family == "wc":
        sig = tuple(WilsonCowanSigmoid(rng.uniform(0.5, 2.0), rng.uniform(1.0, 4.0)) for _ in range(4))
        inputs = rng.uniform(0, 6, 4)
    else:
        sig = []
        for _ in range(4):
            M = rng.uniform(50, 400)
            sig.append(NaturalMaxSigmoid(M, rng.uniform(0.02, 0.3) * M))
        sig = tuple(sig)
        inputs = rng.uniform(-30, 30, 4)
    return make_network(scheme, named, sig, inputs, tau_bar)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_ACCEPTANCE = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title

    def __enter__(self):
        import time

        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        import time

        elapsed = time.perf_counter() - self._t0
        status = "PASS" if exc_type is None else "FAIL"
        line = f"criterion {self.number:>2}: {status}  {self.title}  ({elapsed:.2f} s)"
        if exc_type is not None:
            line += f"  -- {exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        _ACCEPTANCE[self.number] = line
        print(line)
        return False


@pytest.fixture
def criterion():
    return _Criterion


# every critical point built in this process, re-checked independently at the end
_CRITICAL_POINTS = []


@pytest.fixture(autouse=True, scope="session")
def _audit_critical_points():
    from coupledwc import stability

    original = stability._certified

    def recording(alpha, beta, kind, *rest):
        point = original(alpha, beta, kind, *rest)
        _CRITICAL_POINTS.append((alpha, beta, kind, point.omega, point.tau_tilde))
        return point

    stability._certified = recording
    yield
    stability._certified = original


def _audit_line():
    from coupledwc.chareq import char_residual

    worst = max(
        (abs(char_residual(a, b, t, 1j * w, k)) for a, b, k, w, t in _CRITICAL_POINTS), default=0.0
    )
    status = "PASS" if worst < 1e-8 else "FAIL"
    return f"suite-wide residual audit: {status}  {len(_CRITICAL_POINTS)} critical points, max |F| = {worst:.3g}"


def pytest_terminal_summary(terminalreporter):
    if not (_ACCEPTANCE or _CRITICAL_POINTS):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
    if _CRITICAL_POINTS:
        terminalreporter.write_line(_audit_line())
