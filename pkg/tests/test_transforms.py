import numpy as np
import pytest
from hypothesis import given, strategies as st

from rp4bp.core_model import Chart, ChartMismatchError, ChartState, DomainError, SystemParams
from rp4bp.transforms import (
    TRANSFORM_NAMES,
    TransformDescriptor,
    apply,
    cartesian_to_comet,
    comet_to_cartesian,
    identity_descriptor,
    mcgehee_to_qp,
    qp_to_mcgehee,
    random_source_state,
    state_difference,
    symplectic_residual,
)

PARAMS = SystemParams(mu=0.3, delta=1e-3, epsilon=0.1, q=7)


@pytest.mark.parametrize("name", TRANSFORM_NAMES)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_round_trip(name, seed):
    desc = TransformDescriptor(name, PARAMS)
    state = random_source_state(desc, np.random.default_rng(seed))
    back = apply(desc, apply(desc, state), "inverse")
    scale = 1.0 + np.abs(state.coords).max()
    assert np.abs(state_difference(back, state)).max() < 1e-10 * scale


@pytest.mark.parametrize("name", TRANSFORM_NAMES)
def test_conformal_symplectic(name, rng):
    desc = TransformDescriptor(name, PARAMS)
    for _ in range(10):
        state = random_source_state(desc, rng)
        scale = 1.0 + np.abs(state.coords).max() ** 2
        assert symplectic_residual(desc, state) < 1e-6 * scale


def test_conformal_factors():
    assert TransformDescriptor("Rescale1", PARAMS).conformal_factor == PARAMS.delta
    assert TransformDescriptor("Rescale2", PARAMS).conformal_factor == pytest.approx(10.0)
    assert TransformDescriptor("Jacobi", PARAMS).conformal_factor == 1.0


def test_chart_mismatch_raises():
    desc = TransformDescriptor("McGehee", PARAMS)
    wrong = ChartState(Chart.AsteroidMcGehee, [0.1, 0, 0, 1, 0])
    with pytest.raises(ChartMismatchError):
        apply(desc, wrong)
    with pytest.raises(ChartMismatchError):
        apply(desc, ChartState(Chart.AsteroidPolar, [1.0, 0, 0, 1, 0]), "inverse")
    with pytest.raises(ValueError):
        apply(desc, ChartState(Chart.AsteroidPolar, [1.0, 0, 0, 1, 0]), "sideways")


def test_unknown_transform():
    with pytest.raises(DomainError):
        TransformDescriptor("Fourier", PARAMS)


def test_identity_is_exact(rng):
    desc = identity_descriptor(Chart.CometPolar, PARAMS)
    z = ChartState(Chart.CometPolar, np.abs(rng.normal(size=6)) + 0.1)
    assert np.array_equal(apply(desc, z).coords, z.coords)
    assert symplectic_residual(desc, z) == 0.0


def test_mcgehee_radius():
    desc = TransformDescriptor("McGehee", PARAMS)
    out = apply(desc, ChartState(Chart.AsteroidPolar, [8.0, 0.3, 1.0, 2.0, 0.5]))
    assert out["x"] == pytest.approx(0.5)  # r = 2 / x^2


@given(x=st.floats(1e-3, 1.0), Xi=st.floats(-3, 3), psi=st.floats(0, 6.28),
       Psi=st.floats(-10, 10), d=st.sampled_from([0.0, 1e-3]))
def test_qp_chart_round_trip(x, Xi, psi, Psi, d):
    z = np.array([x, Xi, psi, Psi, 0.2])
    back = qp_to_mcgehee(mcgehee_to_qp(z, d), d)
    assert np.allclose(back, z, rtol=1e-12, atol=1e-12)


def test_comet_chart_round_trip_through_cartesian(rng):
    from rp4bp.transforms import comet_polar_inverse
    p = SystemParams(mu=0.3, delta=1e-4, epsilon=0.2, q=7)
    desc = TransformDescriptor("CometPolar", p)
    for _ in range(5):
        zc = apply(desc, random_source_state(desc, rng)).coords
        theta = rng.uniform(0, 2 * np.pi)
        cart = comet_to_cartesian(p, ChartState(Chart.CometPolar, zc), theta)
        back, theta_back = cartesian_to_comet(p, cart)
        assert np.abs(state_difference(back, ChartState(Chart.CometPolar, zc))).max() < 1e-8
        assert abs((theta_back - theta + np.pi) % (2 * np.pi) - np.pi) < 1e-8


def test_jacobi_with_coincident_primaries():
    desc = TransformDescriptor("Jacobi", PARAMS)
    z = np.zeros(12)
    z[4] = 1.0  # x_S = x_J = 0, x_P = (1, 0)
    out = apply(desc, ChartState(Chart.CartesianSixBody, z)).coords
    assert np.array_equal(out[2:4], [0, 0]) and np.array_equal(out[4:6], [1, 0])


def test_pullback_positions_on_axis():
    a, d, mu = 50.0, 1e-3, 0.3
    p = SystemParams(mu=mu, delta=d, epsilon=0.1, q=7)
    rot = np.array([1.0, 0.0, 0.0, p.alpha, a, 0.0, 0.0, 0.0])
    x = apply(TransformDescriptor("CartesianPullback", p),
              ChartState(Chart.RotatingPolar, rot)).coords
    assert np.allclose(x[4:6], [a / (1 + d), 0], rtol=1e-14)
    assert np.allclose(x[0:2], [-mu - d * a / (1 + d), 0], rtol=1e-14)


def test_mcgehee_of_distance_200():
    desc = TransformDescriptor("McGehee", PARAMS)
    out = apply(desc, ChartState(Chart.AsteroidPolar, [200.0, 0.0, 0.0, 1.0, 0.0]))
    assert out["x"] == pytest.approx(0.1, rel=1e-15)
    assert apply(desc, out, "inverse")["xi"] == pytest.approx(200.0, rel=1e-14)


@pytest.mark.parametrize("name,delta", [("Hadjidemetriou", 1e-3), ("Rescale1", 1e-4)])
def test_symplectic_residual_examples(name, delta, rng):
    desc = TransformDescriptor(name, PARAMS.replace(delta=delta))
    assert symplectic_residual(desc, random_source_state(desc, rng)) < 1e-8
