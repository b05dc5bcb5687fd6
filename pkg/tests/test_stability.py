import json
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from oracles import dirac_crossings, gamma_crossings, sample_gamma_zone

from coupledwc.chareq import char_residual, dz_dtau
from coupledwc.exceptions import ConfigError, OnSignBoundary, ZoneMismatch
from coupledwc.model import KernelKind, preset
from coupledwc.stability import (
    Case,
    DelayIndependentClass,
    GammaZone,
    KernelClass,
    SaddleNode,
    crossing_curve,
    classify_region,
    critical_delays,
    critical_frequencies,
    delay_independent_class,
    dirac_critical_delays,
    f_min_curve,
    gamma_critical_delays,
    gamma_critical_window,
    gamma_zone_classify,
    no_delay_stable,
    physical_critical_delays,
    saddle_node_check,
    stable_at_delay,
    transversality_sign,
)

DIRAC, GAMMA = KernelKind.DIRAC, KernelKind.WEAK_GAMMA
# closed form plus residual/scan oracle, refined to machine precision
DIRAC_M3_1 = (0.66623943249251525, 0.52376504777031467)
CYAN_M10_2 = ((0.36118799241533689, 0.13045676586502146), (2.7686413197537340, 7.6653747574476981))
WANG_DIRAC = (0.491649765238, 0.263282944548)
WANG_T_STAR = 3.9492441682


def _assert_certified(cd):
    for e in cd.entries:
        r = abs(char_residual(cd.alpha, cd.beta, e.tau_tilde, 1j * e.omega, cd.kernel))
        assert r < 1e-8, (cd.alpha, cd.beta, e)


def _conditional_point(alpha, beta):
    return beta > alpha - 1 + 1e-6 and no_delay_stable(alpha, beta)


# ---------------------------------------------------------------------------
# region classifiers


def test_no_delay_stable_examples():
    assert no_delay_stable(0, 0)
    assert not no_delay_stable(0, 4)
    assert not no_delay_stable(3, 1)


def test_delay_independent_examples():
    assert delay_independent_class(0, 0.5) is DelayIndependentClass.STABLE_R
    assert delay_independent_class(2, 0) is DelayIndependentClass.UNSTABLE_SADDLE
    assert delay_independent_class(-10, 2) is DelayIndependentClass.CONDITIONAL


def test_saddle_node_examples():
    r = saddle_node_check(0.0)
    assert r.status is SaddleNode.BIFURCATES and r.dz_dbeta < 0
    assert saddle_node_check(2.0).status is SaddleNode.DEGENERATE
    assert saddle_node_check(5.0, 1.0).dz_dbeta == pytest.approx(1 / 12, rel=1e-15)


@given(st.floats(-5, 1.99), st.floats(0.05, 10), st.sampled_from(list(KernelKind)))
def test_saddle_node_root_velocity(alpha, tau, kind):
    # perturb beta off the saddle line and track the zero root by Newton
    h = 1e-7
    z = 0.0
    for _ in range(30):
        f = char_residual(alpha, alpha - 1 + h, tau, z, kind).real
        d = (char_residual(alpha, alpha - 1 + h, tau, z + 1e-8, kind).real - f) / 1e-8
        z -= f / d
    expected = saddle_node_check(alpha, tau).dz_dbeta
    assert z / h == pytest.approx(expected, rel=1e-4)


def test_saddle_points_rejected_by_searches():
    with pytest.raises(ConfigError):
        dirac_critical_delays(2.0, 0.0)
    with pytest.raises(ConfigError):
        gamma_zone_classify(2.0, 0.0)
    rc = classify_region(2.0, 0.0)
    assert rc.delay_independent is DelayIndependentClass.UNSTABLE_SADDLE and rc.kernel_class == {}
    assert not stable_at_delay(2.0, 0.0, DIRAC, 1.0)


@given(st.floats(-1, 1), st.floats(0, 1))
def test_region_r_is_stable_for_all_delays(a, t):
    alpha = a * 1.999
    lo = abs(alpha) - 1
    beta = lo + (1 - lo) * (0.001 + 0.998 * t)
    assume(abs(alpha) - 1 < beta < 1)
    rc = classify_region(alpha, beta)
    assert rc.delay_independent is DelayIndependentClass.STABLE_R
    assert rc.kernel_class == {DIRAC: KernelClass.STABLE, GAMMA: KernelClass.STABLE}
    assert rc.gamma_zone is GammaZone.STABLE
    assert dirac_critical_delays(alpha, beta).is_empty()


# ---------------------------------------------------------------------------
# Dirac kernel


def test_dirac_inside_r_is_empty():
    cd = dirac_critical_delays(0, 0.5)
    assert cd.is_empty() and cd.status is KernelClass.STABLE


def test_dirac_case2_example():
    cd = dirac_critical_delays(-3, 1, k_max=4)
    e = cd.entries[0]
    assert e.case is Case.REAL and e.transversality == 1
    assert (e.omega, e.tau_tilde) == pytest.approx(DIRAC_M3_1, rel=1e-12)
    assert e.omega == pytest.approx(math.asin(math.sqrt(2 / (3 + math.sqrt(5)))), rel=1e-12)
    assert abs(char_residual(-3, 1, e.tau_tilde, 1j * e.omega, DIRAC)) < 1e-10
    _assert_certified(cd)


def test_dirac_example_matches_dense_scan():
    # sign changes of Im(e^{iw} (i w + tau) / tau) along the crossing curve
    cd = dirac_critical_delays(-3, 1, k_max=0)
    e = cd.entries[0]
    ws = np.linspace(1e-4, 3.0, 300001)
    s = math.sqrt((3 + math.sqrt(5)) / 2)  # |Q|^(1/2) on the imaginary root
    taus = ws / math.sqrt(s * s - 1)
    resid = np.abs([char_residual(-3, 1, t, 1j * w, DIRAC) for t, w in zip(taus[::100], ws[::100])])
    k = int(np.argmin(resid)) * 100
    assert ws[k] == pytest.approx(e.omega, abs=2e-3)


@given(st.floats(-30, 1.99), st.floats(0, 1))
def test_dirac_matches_independent_crossings(alpha, t):
    beta = (alpha - 1) + ((alpha - 4) ** 2 / 4 - (alpha - 1)) * (0.001 + 0.998 * t)
    assume(_conditional_point(alpha, beta) and abs(beta - alpha * alpha / 4) > 1e-9)
    cd = dirac_critical_delays(alpha, beta, k_max=8)
    ref = dirac_crossings(alpha, beta)
    n = min(5, len(ref))
    assert len(cd.entries) >= n
    for e, (tau, w) in zip(cd.entries[:n], ref[:n]):
        assert e.tau_tilde == pytest.approx(tau, rel=1e-9, abs=1e-12)
        assert e.omega == pytest.approx(w, rel=1e-9, abs=1e-12)
    _assert_certified(cd)


@given(st.floats(-30, 1.99), st.floats(0, 1))
def test_dirac_ladder_strictly_increasing_and_destabilising(alpha, t):
    beta = (alpha - 1) + ((alpha - 4) ** 2 / 4 - (alpha - 1)) * (0.001 + 0.998 * t)
    assume(_conditional_point(alpha, beta))
    cd = dirac_critical_delays(alpha, beta, k_max=8)
    taus = [e.tau_tilde for e in cd.entries]
    assert all(a < b for a, b in zip(taus, taus[1:]))
    assert all(e.omega > 0 and e.tau_tilde > 0 for e in cd.entries)
    assert all(e.transversality == 1 for e in cd.entries)
    # a single ladder has increasing omega as well
    for prefix in ("omega_",):
        main = [e.omega for e in cd.entries if e.label.startswith(prefix) and "[r2]" not in e.label]
        assert all(a < b for a, b in zip(main, main[1:]))


def test_dirac_transversality_matches_root_velocity():
    for a, b in ((-3, 1), (-1, 3), (-20, 50), (1.5, 5.0)):
        for e in dirac_critical_delays(a, b, k_max=3).entries:
            assert complex(dz_dtau(e.tau_tilde, 1j * e.omega, DIRAC)).real > 0


def test_dirac_stable_at_delay():
    cd = dirac_critical_delays(-3, 1)
    t = cd.entries[0].tau_tilde
    assert cd.stable_at(0.99 * t) and not cd.stable_at(1.01 * t)


# ---------------------------------------------------------------------------
# weak-Gamma kernel


def test_gamma_zone_examples():
    # f(u2) at beta = 2 is 2(8 - 8 * 2**0.25 + sqrt 2) = -0.19889..., so alpha = 0 lies beyond it
    boundary = 2 * (8 - 8 * 2**0.25 + math.sqrt(2))
    assert boundary == pytest.approx(-0.198886, abs=1e-6)
    assert float(f_min_curve(2.0)) == pytest.approx(boundary, rel=1e-15)
    assert gamma_zone_classify(0, 2) is GammaZone.GRAY
    assert gamma_zone_classify(-1, 2) is GammaZone.STABLE
    assert gamma_zone_classify(-10, 2) is GammaZone.CYAN
    # just past alpha = -2 sqrt(beta) the point leaves the above-parabola band;
    # it then falls in the below-parabola band, which the oracle confirms is crossing-free
    a, b = -4 - 1e-3, 4.0
    assert a < -2 * math.sqrt(b) and b < a * a / 4
    assert gamma_zone_classify(a, b) is GammaZone.STABLE
    assert gamma_crossings(a, b) == []


def test_cyan_example():
    cd = gamma_critical_window(-10, 2)
    by = {e.label: e for e in cd.entries}
    for label, (w, t) in zip(("omega-", "omega+"), CYAN_M10_2):
        assert (by[label].omega, by[label].tau_tilde) == pytest.approx((w, t), rel=1e-12)
        assert by[label].case is Case.REAL
    r = 10 + math.sqrt(92)
    closed = [(s * math.sqrt(-8 + r) + math.sqrt(r)) / (2 * math.sqrt(2)) for s in (-1, 1)]
    assert [by["omega-"].omega, by["omega+"].omega] == pytest.approx(closed, rel=1e-12)
    assert by["omega-"].transversality == 1 and by["omega+"].transversality == -1
    assert cd.window == pytest.approx((CYAN_M10_2[0][1], CYAN_M10_2[1][1]), rel=1e-12)
    for e in cd.entries:
        assert abs(char_residual(-10, 2, e.tau_tilde, 1j * e.omega, GAMMA)) < 1e-10


def test_zone_mismatch():
    with pytest.raises(ZoneMismatch):
        gamma_critical_window(-1, 2)
    assert gamma_critical_delays(-1, 2).is_empty()
    assert gamma_critical_delays(1.9, 5).status is KernelClass.UNSTABLE


def test_transversality_sign_boundary_at_u2():
    beta = 9.0
    _, u2, _ = critical_frequencies(beta)
    with pytest.raises(OnSignBoundary):
        transversality_sign(-2.0, beta, GAMMA, u2, 1.0)
    with pytest.raises(OnSignBoundary):
        transversality_sign(-20.0, 2.0, GAMMA, 1.0, 1.0)


@given(st.floats(1.001, 500))
def test_crossing_curve_endpoint_identity(beta):
    w_max = math.sqrt(math.sqrt(beta) - 1)
    target = 4 - 2 * math.sqrt(beta)
    assert float(crossing_curve(0.0, beta)) == pytest.approx(target, rel=1e-12, abs=1e-12)
    # f has a square-root endpoint at w_max: one ulp in w_max moves f by ~w sqrt(eps)
    slack = 8 * w_max * math.sqrt(8e-16 * math.sqrt(beta)) + 1e-12 * abs(target)
    assert float(crossing_curve(w_max, beta)) == pytest.approx(target, abs=slack)


@given(st.floats(1.001, 500))
def test_stationary_points(beta):
    u1, u2, u3 = critical_frequencies(beta)
    h = 1e-6 * (1 + u2)
    deriv = (crossing_curve(u2 + h, beta) - crossing_curve(u2 - h, beta)) / (2 * h)
    assert abs(deriv) < 1e-5 * (1 + abs(float(crossing_curve(u2, beta))))
    assert float(crossing_curve(u2, beta)) == pytest.approx(float(f_min_curve(beta)), rel=1e-9, abs=1e-9)
    if beta >= 16.5:
        assert u1 < u2 < u3
        for u in (u1, u3):
            assert float(crossing_curve(u, beta)) == pytest.approx(-2 * math.sqrt(beta), rel=1e-9)


def _gamma_zone_points(zone, seed, n=40):
    return sample_gamma_zone(np.random.default_rng(seed), zone, n)


@pytest.mark.parametrize("zone", ["Gray", "Pink", "Cyan"])
def test_gamma_matches_polynomial_oracle(zone):
    for a, b in _gamma_zone_points(zone, 1):
        cd = gamma_critical_delays(a, b)
        ref = gamma_crossings(a, b)
        got = sorted((e.tau_tilde, e.omega) for e in cd.entries)
        assert len(got) == len(ref), (a, b, got, ref)
        for (t, w), (tr, wr) in zip(got, ref):
            assert t == pytest.approx(tr, rel=1e-8) and w == pytest.approx(wr, rel=1e-8)
        _assert_certified(cd)


@pytest.mark.parametrize("zone", ["Gray", "Pink", "Cyan"])
def test_gamma_orderings(zone):
    for a, b in _gamma_zone_points(zone, 2):
        by = {e.label: e.omega for e in gamma_critical_window(a, b).entries}
        if zone == "Cyan":
            assert 0 < by["omega-"] < 1 < by["omega+"]
        else:
            u2 = critical_frequencies(b)[1]
            assert by["omega-"] < u2 < by["omega+"]
            if zone == "Pink":
                assert by["omega-"] < by["v-"] < u2 < by["v+"] < by["omega+"]


@pytest.mark.parametrize("zone", ["Gray", "Pink", "Cyan"])
def test_gamma_transversality_matches_root_velocity(zone):
    for a, b in _gamma_zone_points(zone, 3, 20):
        for e in gamma_critical_delays(a, b).entries:
            v = complex(dz_dtau(e.tau_tilde, 1j * e.omega, GAMMA)).real
            assert np.sign(v) == e.transversality


@pytest.mark.parametrize("zone", ["Gray", "Pink", "Cyan"])
def test_gamma_window_semantics_by_scan(zone):
    # the number of right-half-plane roots only changes at reported delays
    for a, b in _gamma_zone_points(zone, 4, 10):
        cd = gamma_critical_delays(a, b)
        lo, hi = cd.window
        for t in np.linspace(1e-3, 2 * hi, 200):
            if min(abs(t - e.tau_tilde) for e in cd.entries) < 1e-6:
                continue
            assert cd.stable_at(t) == (not lo < t < hi)
        ref = [t for t, _ in gamma_crossings(a, b) if t < 2 * hi]
        assert sorted(ref) == pytest.approx(sorted(e.tau_tilde for e in cd.entries), abs=1e-6)


def test_gamma_stable_zone_has_no_crossings():
    rng = np.random.default_rng(5)
    n = 0
    while n < 300:
        a, b = rng.uniform(-30, 2), rng.uniform(-5, 300)
        if not _conditional_point(a, b):
            continue
        if gamma_zone_classify(a, b) is GammaZone.STABLE:
            assert gamma_crossings(a, b) == []
            n += 1


# ---------------------------------------------------------------------------
# circuit level


def test_wang_dirac_critical_delay():
    rep = physical_critical_delays(preset("wang-baseline"), DIRAC)
    e = rep.delays.first
    assert (e.omega, e.tau_tilde) == pytest.approx(WANG_DIRAC, rel=1e-10)
    assert rep.first_T_ms == pytest.approx(WANG_T_STAR, rel=1e-10)
    assert rep.first_T_ms == pytest.approx(3.94924, rel=5e-3)
    assert 12 <= rep.onset_hz <= 30
    _assert_certified(rep.delays)


@pytest.mark.parametrize("wcs,window", [(6.6, (7.56518, 29.7415)), (6.3, (12.5687, 17.9016))])
def test_wang_weak_gamma_window(wcs, window):
    rep = physical_critical_delays(preset("wang-baseline", W_CS=wcs), GAMMA)
    assert rep.window_ms == pytest.approx(window, rel=5e-3)
    assert rep.window_ms == pytest.approx(window, abs=1e-4)
    _assert_certified(rep.delays)


def test_critical_delay_report_json():
    rep = physical_critical_delays(preset("wang-baseline"), GAMMA)
    d = json.loads(json.dumps(rep.to_dict()))
    assert {"alpha", "beta", "kernel", "zone", "entries", "window_ms"} <= set(d)
    for e in d["entries"]:
        assert {"omega", "tau_tilde", "T_ms", "transversality", "case"} <= set(e)


@given(st.floats(0.1, 10))
def test_scale_invariance(factor):
    base = preset("wang-baseline", W_CS=6.6)
    scaled = base.with_kernel("weak-gamma", base.kernel.tau_ms * factor)
    scaled = type(base)(base.scheme, base.weights, base.sigmoids, base.inputs,
                        base.tau_bar * factor, scaled.kernel)
    for kind in KernelKind:
        a = physical_critical_delays(base, kind, k_max=2)
        b = physical_critical_delays(scaled, kind, k_max=2)
        assert (a.equilibrium.alpha, a.equilibrium.beta) == (b.equilibrium.alpha, b.equilibrium.beta)
        assert a.delays == b.delays
        assert classify_region(a.equilibrium.alpha, a.equilibrium.beta) == classify_region(
            b.equilibrium.alpha, b.equilibrium.beta)
        assert b.T_ms == pytest.approx([t * factor for t in a.T_ms], rel=1e-14)
