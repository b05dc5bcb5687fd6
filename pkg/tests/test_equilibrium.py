import json

import numpy as np
import pytest
from conftest import random_circuit

from coupledwc.equilibrium import (
    Equilibrium,
    SolverOpts,
    alpha_beta,
    coefficients,
    equilibrium,
    find_equilibria,
    fixed_point_residual,
    no_delay_jacobian,
)
from coupledwc.exceptions import ConfigError, SchemeMismatch
from coupledwc.model import (
    Scheme,
    WilsonCowanSigmoid,
    build_connectivity,
    make_network,
    preset,
    scheme_slots,
)
from coupledwc.stability import no_delay_stable

# independent damped fixed-point iteration (lambda = 0.2, run to 1e-12)
WANG_X = (17.18674676, 77.14874767, 57.05807562, 32.59822715)
WANG_ALPHA, WANG_BETA = -4.733073830066, 1.103647281148
WCS63_X = (16.27312889, 75.7028161, 57.96872505, 33.19217174)
WCS63_ALPHA, WCS63_BETA = -4.27949294, 1.00033456


def _damped_oracle(net, iters=20000, lam=0.2):
    x = np.zeros(4)
    for _ in range(iters):
        x_new = (1 - lam) * x + lam * net.rates(net.drive(x))
        if np.max(np.abs(x_new - x)) < 1e-13:
            return x_new
        x = x_new
    raise AssertionError("oracle did not converge")


def test_zero_network_single_origin():
    sig = tuple(WilsonCowanSigmoid(1.0, 2.0) for _ in range(4))
    net = make_network(Scheme.EE, {s: 0.0 for s in scheme_slots(Scheme.EE)}, sig, (0, 0, 0, 0), 10.0)
    eqs = find_equilibria(net)
    assert len(eqs) == 1
    assert np.all(eqs[0].x_star == 0.0) or np.max(np.abs(eqs[0].x_star)) < 1e-12


def test_wang_equilibrium_matches_damped_oracle():
    net = preset("wang-baseline")
    eqs = find_equilibria(net)
    assert len(eqs) == 1
    eq = eqs[0]
    np.testing.assert_allclose(eq.x_star, WANG_X, atol=1e-7)
    assert eq.alpha == pytest.approx(WANG_ALPHA, rel=1e-10)
    assert eq.beta == pytest.approx(WANG_BETA, rel=1e-10)
    assert eq.residual <= 1e-10
    for x, s in zip(eq.x_star, net.sigmoids):
        assert s.B < x < s.M


def test_wang_equilibrium_runtime_oracle():
    net = preset("wang-baseline", W_CS=6.3)
    x = _damped_oracle(net)
    np.testing.assert_allclose(x, WCS63_X, atol=1e-7)
    eq = equilibrium(net)
    np.testing.assert_allclose(eq.x_star, x, atol=1e-9)
    assert (eq.alpha, eq.beta) == pytest.approx((WCS63_ALPHA, WCS63_BETA), rel=1e-8)


def test_bad_solver_options():
    with pytest.raises(ConfigError):
        SolverOpts(tolerance=0.0)
    with pytest.raises(ConfigError):
        SolverOpts(max_iterations=0)


def test_ee_unit_weights_unit_gains():
    C = build_connectivity(Scheme.EE, {s: 1.0 for s in scheme_slots(Scheme.EE)})
    assert coefficients(Scheme.EE, C, np.ones(4)) == (3.0, 1.0)


def test_etoi_equal_cross_products_gives_zero_beta():
    named = {"w_I1E1": 2.0, "w_I2E2": 3.0, "w_E1I1": -5.0, "w_E2I2": -7.0, "w_I2E1": 1.5, "w_I1E2": 4.0}
    C = build_connectivity(Scheme.EtoI, named)
    _, beta = coefficients(Scheme.EtoI, C, [0.3, 0.7, 1.1, 0.2])
    assert beta == 0.0


def test_coefficients_reject_foreign_slot():
    C = build_connectivity(Scheme.EE, {s: 1.0 for s in scheme_slots(Scheme.EE)})
    C[3, 1] = 1.0
    with pytest.raises(SchemeMismatch):
        coefficients(Scheme.EE, C, np.ones(4))


def test_ee_and_ii_share_beta(rng):
    for _ in range(50):
        intra = {"w_I1E1": rng.uniform(0, 5), "w_I2E2": rng.uniform(0, 5),
                 "w_E1I1": -rng.uniform(0, 5), "w_E2I2": -rng.uniform(0, 5)}
        phi = rng.uniform(0.01, 2, 4)
        ee = build_connectivity(Scheme.EE, dict(intra, w_E1E2=rng.normal(), w_E2E1=rng.normal()))
        ii = build_connectivity(Scheme.II, dict(intra, w_I1I2=rng.normal(), w_I2I1=rng.normal()))
        b_ee = coefficients(Scheme.EE, ee, phi)[1]
        b_ii = coefficients(Scheme.II, ii, phi)[1]
        expected = np.prod(phi) * intra["w_E1I1"] * intra["w_I1E1"] * intra["w_E2I2"] * intra["w_I2E2"]
        assert b_ee == b_ii
        assert b_ee == pytest.approx(expected, rel=1e-13)


def test_etoi_sign_law(rng):
    for _ in range(100):
        net = random_circuit(rng, Scheme.EtoI)
        for eq in find_equilibria(net):
            assert eq.alpha < 0


@pytest.mark.parametrize("scheme", list(Scheme))
def test_gains_positive_and_residual_small(rng, scheme):
    for _ in range(20):
        net = random_circuit(rng, scheme, family="nm" if rng.random() < 0.5 else "wc")
        eqs = find_equilibria(net)
        norms = [np.linalg.norm(e.x_star) for e in eqs]
        assert norms == sorted(norms)
        for i, e in enumerate(eqs):
            assert np.all(e.phi > 0)
            assert fixed_point_residual(net, e.x_star) <= 1e-10
            assert (e.alpha, e.beta) == pytest.approx(alpha_beta(net, e.x_star), rel=1e-12, abs=1e-14)
            for f in eqs[i + 1:]:
                assert np.max(np.abs(e.x_star - f.x_star)) > 1e-9


@pytest.mark.parametrize("scheme", list(Scheme))
def test_no_delay_jacobian_agrees_with_region(rng, scheme):
    checked = 0
    while checked < 200:
        net = random_circuit(rng, scheme, scale=rng.choice([1.0, 4.0, 8.0]))
        eq = find_equilibria(net)[0]
        a, b = eq.alpha, eq.beta
        # skip points within round-off of the region boundary
        margin = min(abs(b - (a - 1)), abs(b - (a - 4) ** 2 / 4), abs(a - 2))
        if margin < 1e-8:
            continue
        eig = np.linalg.eigvals(no_delay_jacobian(net, eq.x_star))
        assert bool(np.all(eig.real < 0)) == no_delay_stable(a, b), (a, b, eig)
        checked += 1


def test_equilibrium_json_roundtrip():
    net = preset("wang-baseline")
    eq = equilibrium(net)
    d = json.loads(json.dumps(eq.to_dict()))
    assert set(d) == {"x_star", "phi", "alpha", "beta", "residual"}
    back = Equilibrium.from_dict(d)
    np.testing.assert_array_equal(back.x_star, eq.x_star)
    assert (back.alpha, back.beta) == (eq.alpha, eq.beta)
    assert fixed_point_residual(net, back.x_star) <= 1e-10


def test_equilibrium_index_out_of_range():
    with pytest.raises(ConfigError):
        equilibrium(preset("wang-baseline"), 5)
