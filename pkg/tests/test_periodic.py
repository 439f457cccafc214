import math
import warnings

import numpy as np
import pytest

from rp4bp.core_model import DomainError, EnergyLevel, SystemParams
from rp4bp.periodic import (
    Z_STAR,
    PeriodicOrbitError,
    PeriodicOrbitRecord,
    RecordPrimaries,
    admissible_q,
    circular_record,
    expected_multipliers,
    find_fixed_point,
    multipliers,
    rectified_section_map,
    rotation_ratio,
    target_ratio,
    tune_epsilon,
    tuning_bracket,
)


def _match_error(got, want):
    got = list(got)
    err = 0.0
    for w in want:
        i = int(np.argmin([abs(g - w) for g in got]))
        err = max(err, abs(got.pop(i) - w))
    return err


@pytest.mark.parametrize("branch", [1, -1])
def test_truncated_fixed_point_is_circular(branch):
    eps = 0.1
    p = SystemParams(mu=0.5, delta=0.0, epsilon=eps, q=1000)
    fp = find_fixed_point(p, EnergyLevel.truncated(eps, branch), system="truncated")
    assert np.abs(fp.point - Z_STAR).max() < 1e-10
    assert fp.section.G == pytest.approx(branch, abs=1e-10)
    assert _match_error(multipliers(fp.section), expected_multipliers(eps, branch)) < 1e-6


def test_expected_multipliers_on_unit_circle():
    m = expected_multipliers(0.2, "minus")
    assert np.allclose(np.abs(m), 1.0)
    assert np.isclose(m[0], np.conj(m[1]))


def test_newton_and_contraction_agree():
    p = SystemParams(mu=0.5, delta=0.0, epsilon=0.1, q=1000)
    E = EnergyLevel.truncated(0.1, 1)
    a = find_fixed_point(p, E)
    b = find_fixed_point(p, E, method="contraction")
    assert np.abs(a.point - b.point).max() < 1e-10


def test_full_fixed_point_within_bounds():
    p = SystemParams(mu=0.5, delta=1e-10, epsilon=0.1, q=1000)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        fp = find_fixed_point(p, "plus")
    assert all(ok for _, _, ok in fp.bounds.values())
    F = rectified_section_map(p, fp.point, fp.E, jacobian=False).image - fp.point
    assert np.abs(F).max() < 1e-10


def test_unknown_system_and_method():
    p = SystemParams(mu=0.5, epsilon=0.1)
    with pytest.raises(DomainError):
        find_fixed_point(p, "plus", system="exact")
    with pytest.raises(DomainError):
        find_fixed_point(p, "plus", method="bisection")


def test_admissible_q_and_bracket():
    assert admissible_q(0.16) == (326, 651)
    assert tuning_bracket(0.16) == pytest.approx((0.09, 0.15))
    assert target_ratio(1000, "plus") == pytest.approx(0.999)
    assert target_ratio(1000, "minus") == pytest.approx(1.001)


def test_tuning_hits_target_ratio():
    p = SystemParams(mu=0.5, delta=0.0, epsilon=0.1, q=326)
    tr = tune_epsilon(p, "plus", epsilon0=0.16)
    assert tr.residual < 1e-12
    assert tr.monotone
    lo, hi = tuning_bracket(0.16)
    assert lo < tr.epsilon < hi
    # leading order: 1 - eps^3 = (q - 1)/q
    assert tr.epsilon == pytest.approx(326 ** (-1 / 3), rel=1e-3)


def test_tuning_outside_range():
    p = SystemParams(mu=0.5, delta=0.0, epsilon=0.1, q=5)
    with pytest.raises(PeriodicOrbitError):
        tune_epsilon(p, "plus", epsilon0=0.16)


@pytest.fixture(scope="module")
def circular():
    p = SystemParams(mu=0.5, delta=0.0, epsilon=0.1, q=326)
    eps = tune_epsilon(p, "plus", epsilon0=0.16).epsilon
    return circular_record(p.replace(epsilon=eps), "plus", n_samples=32)


def test_circular_record_keeps_unit_radius(circular):
    z = circular.rotating_state(np.linspace(0, circular.period, 50))
    assert np.abs(z[0] - 1.0).max() < 1e-12
    assert np.abs(z[1]).max() < 1e-12
    assert circular.laps == 325
    assert circular.period == pytest.approx(325 * circular.lap_period)
    assert circular.diagnostics["closure"] < 1e-9


def test_circular_record_is_periodic(circular):
    t = np.array([0.3, 1.7])
    a = circular.rotating_state(t)
    b = circular.rotating_state(t + circular.period)
    assert np.allclose(a, b, atol=1e-12)


def test_circular_estimates_hold(circular):
    est = circular.diagnostics["estimates"]
    assert all(ok for _, _, ok in est.values())


def test_record_primaries_unit_separation(circular):
    prim = RecordPrimaries(circular)
    xs, xj, _ = prim.positions(0.4)
    assert np.linalg.norm(xs - xj) == pytest.approx(1.0, abs=1e-12)
    assert prim.masses() == (0.5, 0.5, 0.0)


def test_record_json_round_trip(circular, tmp_path):
    path = tmp_path / "rec.json"
    circular.to_json(path)
    back = PeriodicOrbitRecord.from_json(str(path))
    t = np.linspace(0, 5, 7)
    assert np.array_equal(back.rotating_state(t), circular.rotating_state(t))
    assert back.rotation_ratio == circular.rotation_ratio


def test_malformed_record():
    with pytest.raises(PeriodicOrbitError):
        PeriodicOrbitRecord.from_dict({"params": {}})


def test_circular_record_needs_delta_zero():
    with pytest.raises(DomainError):
        circular_record(SystemParams(delta=1e-6, epsilon=0.1), "plus")


def test_rotation_ratio_leading_order():
    eps = 0.15
    p = SystemParams(mu=0.5, delta=0.0, epsilon=eps, q=1000)
    fp = find_fixed_point(p, EnergyLevel.truncated(eps, 1), system="truncated")
    assert rotation_ratio(p, fp) == pytest.approx(1 - eps ** 3, rel=1e-9)


def test_energy_graph_on_circular_point():
    from rp4bp.periodic import energy_graph_G
    p = SystemParams(mu=0.5, delta=0.0, epsilon=0.1)
    pt = (1.0, 0.0, 0.0, 0.0)
    assert energy_graph_G(p, EnergyLevel.truncated(0.1, 1), pt, "truncated") == \
        pytest.approx(1.0, abs=1e-6)
    assert energy_graph_G(p, EnergyLevel.truncated(0.1, -1), pt, "truncated") == \
        pytest.approx(-1.0, abs=1e-6)
    tiny = p.replace(epsilon=1e-6)
    assert energy_graph_G(tiny, EnergyLevel(-0.7, 1), pt, "truncated") == \
        pytest.approx(0.7, rel=1e-12)


def test_truncated_map_moves_points_little(rng):
    from rp4bp.periodic import BOUND_CONSTANTS
    eps = 0.1
    p = SystemParams(mu=0.5, delta=0.0, epsilon=eps)
    E = EnergyLevel.truncated(eps, 1)
    for _ in range(5):
        z = Z_STAR + rng.uniform(-0.05, 0.05, 4)
        res = rectified_section_map(p, z, E, "truncated", jacobian=False)
        assert np.abs(res.image - z).max() <= BOUND_CONSTANTS["M0"] * eps ** 3
        assert res.return_parameter == 2 * math.pi


def test_full_fixed_point_near_circular_point_without_planet():
    from rp4bp.periodic import BOUND_CONSTANTS
    eps, mu = 0.1, 0.5
    p = SystemParams(mu=mu, delta=0.0, epsilon=eps)
    fp = find_fixed_point(p, "plus")
    assert np.abs(fp.point - Z_STAR).max() <= 4 * BOUND_CONSTANTS["M1"] * mu * eps ** 4


def test_newton_converges_quickly_with_planet():
    p = SystemParams(mu=0.5, delta=1e-10, epsilon=0.1)
    fp = find_fixed_point(p, "plus")
    assert fp.iterations <= 10 and fp.residual < 1e-10


def test_rotation_ratio_of_full_system():
    p = SystemParams(mu=0.5, delta=0.0, epsilon=0.1)
    fp = find_fixed_point(p, "plus")
    # corrections are O(eps^7) = 1e-7
    assert abs(rotation_ratio(p, fp) - 0.999) < 10 * 0.1 ** 7
    # without the planet the binary turns at unit rate
    assert rotation_ratio(p, fp) * fp.section.return_time == pytest.approx(2 * math.pi,
                                                                            rel=1e-12)


def test_rotation_ratio_with_planet_within_bound():
    from rp4bp.periodic import BOUND_CONSTANTS
    eps, d = 0.1, 1e-10
    p = SystemParams(mu=0.5, delta=d, epsilon=eps)
    fp = find_fixed_point(p, "minus")
    dev = abs(rotation_ratio(p, fp) - (1 + eps ** 3))
    assert dev <= BOUND_CONSTANTS["K_ratio"] * (eps ** 7 + math.sqrt(d / eps))


def test_tuned_epsilon_near_cube_root():
    p = SystemParams(mu=0.5, delta=0.0, epsilon=0.1, q=1000)
    tr = tune_epsilon(p, "plus", epsilon0=0.16)
    assert tr.epsilon == pytest.approx(0.1, rel=1e-2)


def test_mid_window_q_tunes_inside_bracket():
    lo, hi = tuning_bracket(0.16)
    tr = tune_epsilon(SystemParams(mu=0.5, delta=0.0, q=488), "plus", epsilon0=0.16)
    assert lo < tr.epsilon < hi and tr.residual < 1e-10


def test_circular_record_binary_motion(circular):
    prim = RecordPrimaries(circular)
    mu = circular.params.mu
    for t in np.linspace(0, circular.period, 13):
        xs, xj, xp = prim.positions(t)
        theta = circular.rotating_state(t)[2]
        assert np.allclose(xs, -mu * np.array([np.cos(theta), np.sin(theta)]), atol=1e-12)
    z = circular.rotating_state(np.linspace(0, circular.lap_period, 64))
    assert np.abs(z[1]).max() < 1e-12
    assert circular.theta_rate == pytest.approx(1.0, abs=1e-12)


def test_record_serialization_is_bit_identical(circular):
    text = circular.to_json()
    assert PeriodicOrbitRecord.from_json(text).to_json() == text


@pytest.fixture(scope="module")
def planet_record():
    from rp4bp.periodic import assemble_orbit
    p = SystemParams(mu=0.5, delta=1e-10, epsilon=0.1, q=326)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tr = tune_epsilon(p, "plus", epsilon0=0.16)
    return assemble_orbit(p.replace(epsilon=tr.epsilon), tr.fixed_point, n_samples=64)


def test_record_primaries_periodic_and_centred(planet_record):
    prim = RecordPrimaries(planet_record)
    mS, mJ, mP = prim.masses()
    a = np.array(prim.positions(0.0))
    b = np.array(prim.positions(planet_record.period))
    assert np.abs(a - b).max() < 1e-9
    for t in np.linspace(0, planet_record.period, 100):
        xs, xj, xp = prim.positions(t)
        assert np.abs(mS * xs + mJ * xj + mP * xp).max() < 1e-9


def test_outer_body_distance_band(planet_record):
    est = planet_record.diagnostics["estimates"]
    assert est["q2"][2] and est["p2"][2]
    eps = planet_record.params.epsilon
    z = planet_record.rotating_state(np.linspace(0, planet_record.lap_period, 50))
    assert np.abs(np.hypot(z[4], z[5]) - eps ** -2).max() <= 4 * eps ** 2


def test_comet_energy_conserved_over_laps(circular):
    # energy of the full comet system along ten laps of the circular record
    from rp4bp.core_model import Chart, ChartState, eval_hamiltonian
    from rp4bp.integrate import integrate
    p = circular.params
    z0 = np.array([*circular.fixed_point, 0.0, circular.G0])
    tr = integrate(p, ChartState(Chart.CometPolar, z0), "comet",
                   (0.0, 10 * circular.lap_period))
    H = [eval_hamiltonian(p, ChartState(Chart.CometPolar, w), "comet")
         for w in tr.states[::10]]
    assert np.abs(np.array(H) / H[0] - 1).max() < 1e-9
