import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import grad
from rp4bp.core_model import (
    Chart,
    ChartMismatchError,
    ChartState,
    CircularPrimaries,
    CollisionError,
    DomainError,
    EnergyLevel,
    SystemParams,
    eval_hamiltonian,
    eval_vector_field,
    jacobi_constant,
    kepler_energy_mcgehee,
    make_rhs,
    parse_branch,
)


@pytest.mark.parametrize("kw", [dict(mu=0.6), dict(mu=-0.1), dict(delta=-1e-3),
                                dict(epsilon=0.0), dict(epsilon=1.0), dict(q=1),
                                dict(q=2.5)])
def test_params_reject_out_of_range(kw):
    with pytest.raises(DomainError):
        SystemParams(**kw)


def test_params_alpha_and_replace():
    p = SystemParams(mu=0.3)
    assert p.alpha == pytest.approx(0.21)
    assert p.replace(q=7).q == 7 and p.q == 1000


def test_perturbative_regime_check():
    p = SystemParams(delta=1e-6, epsilon=0.1)
    with pytest.raises(DomainError):
        p.require_perturbative(1.0)
    SystemParams(delta=1e-8, epsilon=0.1).require_perturbative(1.0)


def test_chart_state_wraps_angles_and_checks_size():
    s = ChartState(Chart.AsteroidMcGehee, [0.1, 0.0, -0.5, 2.0, 7.0])
    assert 0 <= s["psi"] < 2 * math.pi and s["psi"] == pytest.approx(2 * math.pi - 0.5)
    assert s["s"] == pytest.approx(7.0 - 2 * math.pi)
    with pytest.raises(ChartMismatchError):
        ChartState(Chart.AsteroidMcGehee, [1.0, 2.0])
    with pytest.raises(DomainError):
        ChartState(Chart.AsteroidPolar, [-1.0, 0.0, 0.0, 1.0, 0.0])
    with pytest.raises(DomainError):
        ChartState(Chart.AsteroidMcGehee, [np.nan, 0, 0, 1, 0])


def test_branch_labels():
    assert parse_branch("plus") == parse_branch("+") == parse_branch(1) == 1
    assert parse_branch("minus") == -1
    with pytest.raises(DomainError):
        parse_branch("up")
    with pytest.raises(DomainError):
        EnergyLevel(1.0, 0)


def test_truncated_energy_level():
    E = EnergyLevel.truncated(0.1, 1)
    assert E.value == pytest.approx(-1 - 0.0005)


def test_hamiltonian_chart_mismatch():
    s = ChartState(Chart.AsteroidMcGehee, [0.1, 0, 0, 1, 0])
    with pytest.raises(ChartMismatchError):
        eval_hamiltonian(SystemParams(), s, "comet")


def _canonical_field(H, z, pairs, dim):
    g = grad(H, z)
    f = np.zeros(dim)
    for a, b in pairs:
        f[a] = g[b]
        f[b] = -g[a]
    return f


@pytest.mark.parametrize("which,chart,z", [
    ("three_body", Chart.CartesianSixBody,
     [0.1, 0.2, -0.9, 0.1, 10.0, 3.0, 0.1, -0.2, -0.1, 0.3, 1e-3, 2e-3]),
    ("rescaled_tilde", Chart.RescaledTilde, [0.3, -0.2, 8.0, 3.0, 0.1, 0.3]),
    ("comet", Chart.CometPolar, [0.01, -0.02, 1.01, 0.01, 0.7, 1.0]),
    ("comet_truncated", Chart.CometPolar, [0.01, -0.02, 1.01, 0.01, 0.7, 1.0]),
])
def test_vector_field_is_hamiltonian(which, chart, z):
    p = SystemParams(mu=0.3, delta=1e-3, epsilon=0.2, q=7)
    z = np.array(z, dtype=float)

    def H(w):
        return eval_hamiltonian(p, ChartState(chart, w), which)
    want = _canonical_field(H, z, chart.pairs, chart.dim)
    got = eval_vector_field(p, ChartState(chart, z), which)
    assert np.allclose(got, want, rtol=1e-6, atol=1e-7)


def test_rotating_field_matches_hamiltonian():
    p = SystemParams(mu=0.3, delta=1e-3, epsilon=0.2, q=7)
    z = np.array([1.01, 0.02, 0.4, p.alpha, 9.0, 2.0, 0.1, 0.2]) * [1, 1, 1, 1, 1, 1, 1e-3, 1e-3]

    def H(w):
        return eval_hamiltonian(p, ChartState(Chart.RotatingPolar, w), "rotating")
    want = _canonical_field(H, z, Chart.RotatingPolar.pairs, 8)
    got = eval_vector_field(p, ChartState(Chart.RotatingPolar, z), "rotating")
    assert np.allclose(got, want, rtol=1e-6, atol=1e-8)


def test_asteroid_field_matches_hamiltonian():
    p = SystemParams(mu=0.3, q=7)
    prim = CircularPrimaries(0.3, 7)
    z = np.array([2.0, 1.5, 0.1, -0.3, 0.4])

    def H(w):
        return eval_hamiltonian(p, ChartState(Chart.AsteroidCartesian, w), "asteroid", prim)
    g = grad(H, z)
    got = eval_vector_field(p, ChartState(Chart.AsteroidCartesian, z), "asteroid", prim)
    assert np.allclose(got[:4], [g[2], g[3], -g[0], -g[1]], rtol=1e-6, atol=1e-8)
    assert got[4] == pytest.approx(1.0 / 7)


def test_collision_is_reported():
    p = SystemParams(mu=0.3, q=7)
    prim = CircularPrimaries(0.3, 7)
    z = [0.7, 0.0, 0.0, 0.0, 0.0]  # on top of the lighter primary at t = 0
    with pytest.raises(CollisionError):
        eval_vector_field(p, ChartState(Chart.AsteroidCartesian, z), "asteroid", prim)


@given(x=st.floats(0.01, 1.0), Xi=st.floats(-2, 2), Psi=st.floats(-5, 5))
def test_kepler_energy_mcgehee_matches_polar_form(x, Xi, Psi):
    r = 2.0 / (x * x)
    want = 0.5 * (Xi * Xi + Psi * Psi / (r * r)) - 1.0 / r
    assert kepler_energy_mcgehee([x, Xi, 0.0, Psi, 0.0]) == pytest.approx(want, rel=1e-12,
                                                                         abs=1e-15)


def test_jacobi_constant_is_energy_minus_momentum_at_mu_zero():
    p = SystemParams(mu=0.0, q=7)
    prim = CircularPrimaries(0.0, 7)
    z = np.array([0.3, 0.2, 1.0, 1.5, 0.1])
    assert jacobi_constant(p, z, prim) == pytest.approx(kepler_energy_mcgehee(z) - z[3])


def test_unknown_system_rejected():
    from rp4bp.core_model import ModelError
    with pytest.raises(ModelError):
        make_rhs(SystemParams(), "nope")


def test_truncated_comet_energy_at_circular_point():
    p = SystemParams(mu=0.5, delta=0.0, epsilon=0.1)
    s = ChartState(Chart.CometPolar, [0, 0, 1, 0, 0, 1])
    assert eval_hamiltonian(p, s, "comet_truncated") == pytest.approx(-1.0005, abs=1e-15)
    assert EnergyLevel.truncated(0.1, 1).value == pytest.approx(-1.0005, abs=1e-15)


@given(x=st.floats(0.0, 1.0), I=st.floats(-5, 5))
def test_mcgehee_hamiltonian_kepler_limit(x, I):
    p = SystemParams(mu=0.0, delta=0.0, q=7)
    s = ChartState(Chart.AsteroidMcGehee, [x, 0.0, 0.3, 0.0, 0.1])
    h = eval_hamiltonian(p, s, "asteroid_mcgehee", action=I)
    assert h == pytest.approx(I / 7 - x * x / 2, abs=1e-14)


def test_comet_remainder_is_small(rng):
    # the remainder scales like sqrt(delta / epsilon); C = 2 sampling domain
    p = SystemParams(mu=0.5, delta=1e-8, epsilon=0.1)
    worst = 0.0
    for _ in range(2000):
        rh, Rh, ups = rng.uniform(-2, 2, 3)
        z = [rh, Rh, rng.uniform(0.5, 2.0), ups, rng.uniform(0, 2 * np.pi), rng.uniform(-2, 2)]
        worst = max(worst, abs(eval_hamiltonian(p, ChartState(Chart.CometPolar, z),
                                                "comet_remainder")))
    assert worst / math.sqrt(p.delta / p.epsilon) < 1e3


@pytest.mark.parametrize("x0,psi0,Psi0", [(0.1, 0.4, 0.0), (0.3, 2.0, 0.0), (0.2, 1.0, 3.0)])
def test_mcgehee_field_near_infinity(x0, psi0, Psi0):
    p = SystemParams(mu=0.0, delta=0.0, q=7)
    s = ChartState(Chart.AsteroidMcGehee, [x0, 0.0, psi0, Psi0, 0.0])
    exact = eval_vector_field(p, s, "asteroid_mcgehee")
    lead = eval_vector_field(p, s, "mcgehee_leading")
    assert exact[0] == 0.0 and lead[0] == 0.0
    assert lead[1] == pytest.approx(-x0 ** 4 / 4)
    # the exact field carries the centrifugal term dropped at leading order
    assert exact[1] == pytest.approx(-x0 ** 4 / 4 + Psi0 ** 2 * x0 ** 6 / 8, rel=1e-12)
    assert exact[2] == pytest.approx(Psi0 * x0 ** 4 / 4)
    assert exact[3] == 0.0


@pytest.mark.parametrize("mu", [0.0, 0.3])
def test_infinity_is_invariant(mu):
    p = SystemParams(mu=mu, delta=0.0, q=7)
    f = eval_vector_field(p, ChartState(Chart.AsteroidMcGehee, [0.0, 0.0, 1.0, 2.0, 0.5]),
                          "asteroid_mcgehee")
    assert np.array_equal(f[:4], np.zeros(4))
    assert f[4] == pytest.approx(1 / 7)


def test_comet_field_matches_hamiltonian_at_random_states(rng):
    p = SystemParams(mu=0.5, delta=1e-6, epsilon=0.1)
    pairs = Chart.CometPolar.pairs
    for _ in range(100):
        z = np.concatenate([rng.uniform(-1, 1, 2), [rng.uniform(0.5, 2.0)],
                            rng.uniform(-1, 1, 1), [rng.uniform(0, 6.28)],
                            [rng.uniform(-2, 2)]])

        def H(w):
            return eval_hamiltonian(p, ChartState(Chart.CometPolar, w), "comet")
        want = _canonical_field(H, z, pairs, 6)
        got = eval_vector_field(p, ChartState(Chart.CometPolar, z), "comet")
        assert np.allclose(got, want, rtol=1e-6, atol=1e-9)
