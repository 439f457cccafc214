import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from rp4bp.core_model import DomainError, SystemParams, kepler_energy_mcgehee, make_rhs
from rp4bp.infinity import (
    MelnikovError,
    averaged_increment,
    f_asymptotic,
    increment_bound,
    manifold_shoot,
    measure_asymptotic_shift,
    melnikov_critical_points,
    melnikov_direct,
    melnikov_harmonics,
    melnikov_L0,
    melnikov_sweep,
    parabola,
    parabola_derivative,
    potential_harmonic,
    psi_splitting,
    reduced_phase,
    scattering_model,
    tau_of_t,
    time_of_tau,
)
from rp4bp.kernels import increment_potential

from conftest import circ


def _angle_mode(rho, mu, k):
    # oracle: Fourier coefficient of the closed-form increment by quadrature
    f = lambda a: float(increment_potential(np.array([rho]), np.array([a]), mu)[0]) * math.cos(k * a)
    return quad(f, 0, 2 * math.pi, epsabs=1e-15, epsrel=1e-12, limit=200)[0] / (2 * math.pi)


@pytest.mark.parametrize("mu", [0.1, 0.3, 0.5])
@pytest.mark.parametrize("rho", [2.0, 7.5, 50.0])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_harmonics_match_angle_quadrature(mu, rho, k):
    want = _angle_mode(rho, mu, k)
    got = float(potential_harmonic(rho, mu, k))
    assert got == pytest.approx(want, rel=1e-9, abs=1e-15)


def test_harmonic_derivatives():
    mu, rho, h = 0.3, 4.0, 1e-4
    for k in (0, 1, 2):
        v = lambda r: float(potential_harmonic(r, mu, k, nmax=80))
        d1 = (v(rho + h) - v(rho - h)) / (2 * h)
        d2 = (v(rho + h) - 2 * v(rho) + v(rho - h)) / h ** 2
        assert float(potential_harmonic(rho, mu, k, 1, nmax=80)) == pytest.approx(d1, rel=1e-7)
        assert float(potential_harmonic(rho, mu, k, 2, nmax=80)) == pytest.approx(d2, rel=1e-5)


def test_series_refuses_small_radius():
    with pytest.raises(DomainError):
        potential_harmonic(0.6, 0.5, 0)


def test_odd_modes_vanish_for_equal_masses():
    assert float(potential_harmonic(5.0, 0.5, 1)) == 0.0
    assert float(potential_harmonic(5.0, 0.5, 3)) == 0.0


@given(rho=st.floats(1.5, 1e4), a=st.floats(0, 6.3), mu=st.floats(0.01, 0.5))
def test_increment_bound(rho, a, mu):
    v = abs(float(increment_potential(np.array([rho]), np.array([a]), mu)[0]))
    assert v <= increment_bound(rho, mu) * (1 + 1e-12)


@given(t=st.floats(-1e8, 1e8), Psi=st.floats(0.5, 30))
def test_tau_of_t_inverts_time_of_tau(t, Psi):
    tau = tau_of_t(Psi, t)
    assert time_of_tau(Psi, tau) == pytest.approx(t, rel=1e-12, abs=1e-9)


def test_tau_of_t_rejects_bad_momentum():
    with pytest.raises(DomainError):
        tau_of_t(0.0, 1.0)


@pytest.mark.parametrize("tau", [-30.0, -1.0, 0.0, 0.5, 4.0])
def test_parabola_solves_kepler_flow(tau):
    p = SystemParams(mu=0.0, delta=0.0, q=7)
    pt = parabola(0.4, 3.0, 0.2, tau=tau, params=p)
    assert kepler_energy_mcgehee(pt.state.coords) == pytest.approx(0.0, abs=1e-14)
    field = make_rhs(p, "asteroid_mcgehee")(pt.t, pt.state.coords.copy())
    assert np.allclose(parabola_derivative(pt, p), field, rtol=1e-12, atol=1e-16)
    assert pt.alpha_h == pytest.approx(2 * math.atan(tau))


def test_parabola_argument_checks():
    with pytest.raises(ValueError):
        parabola(0.0, 2.0, 0.0)
    with pytest.raises(DomainError):
        parabola(0.0, -1.0, 0.0, tau=0.0)


LABELS = [(0.3, 0.1, 0.2), (1.0, 2.0, -0.5), (-2.0, 0.7, 3.0)]


@pytest.mark.parametrize("mu,Psi,q", [(0.3, 2.5, 7), (0.5, 10.0, 1000), (0.1, 6.0, 13)])
def test_melnikov_routes_agree(mu, Psi, q):
    p = SystemParams(mu=mu, delta=0.0, q=q)
    h = melnikov_harmonics(mu, Psi, 10, psi_min=0.0)
    for a, b, c in LABELS:
        want = melnikov_direct(p, a, Psi, b, c)
        got = float(h.value(reduced_phase(p, a, b, c)))
        assert abs(got - want) < 1e-10


def test_melnikov_vanishes_without_binary():
    p = SystemParams(mu=0.0, delta=0.0, q=1000)
    for a, b, c in LABELS:
        assert melnikov_L0(p, a, 10.0, b, c).value == 0.0
        assert melnikov_direct(p, a, 10.0, b, c) == 0.0


def test_melnikov_depends_on_reduced_phase_only():
    p = SystemParams(mu=0.3, delta=0.0, q=7)
    a = melnikov_L0(p, 0.5, 6.0, 0.1, 0.2, psi_min=0.0).value
    b = melnikov_L0(p, 0.5 + 0.3, 6.0, 0.1, 0.2 - 0.3, psi_min=0.0).value
    assert a == pytest.approx(b, rel=1e-14)


def test_melnikov_domain_checks():
    with pytest.raises(DomainError):
        melnikov_L0(SystemParams(mu=0.3, delta=1e-6), 0, 10, 0, 0)
    with pytest.raises(DomainError):
        melnikov_L0(SystemParams(mu=0.3, delta=0.0), 0, 2.0, 0, 0)


@pytest.mark.parametrize("mu", [0.1, 0.3, 0.5])
@pytest.mark.parametrize("Psi", [8.0, 10.0, 15.0])
def test_critical_points_at_symmetric_phases(mu, Psi):
    p = SystemParams(mu=mu, delta=0.0, q=1000)
    psi0, s0 = 0.7, 0.0123
    cp = melnikov_critical_points(p, psi0, Psi, s0)
    base = p.q * s0 - psi0
    assert abs(circ(cp.sigma_minus - base)) < 1e-6
    assert abs(circ(cp.sigma_plus - base - math.pi)) < 1e-6
    assert not cp.degenerate
    assert cp.log_scale == pytest.approx(-cp.leading_harmonic * Psi ** 3 / 3)


def test_critical_point_types():
    # one harmonic: maximum and minimum; two (equal masses): equivalent phases
    kw = dict(delta=0.0, q=1000)
    d2 = melnikov_critical_points(SystemParams(mu=0.3, **kw), 0.7, 10.0, 0.0123)
    assert d2.leading_harmonic == 1
    assert d2.second_derivatives[0] * d2.second_derivatives[1] < 0
    d2 = melnikov_critical_points(SystemParams(mu=0.5, **kw), 0.7, 10.0, 0.0123)
    assert d2.leading_harmonic == 2
    assert d2.second_derivatives[0] == pytest.approx(d2.second_derivatives[1])


def test_critical_points_need_a_binary():
    with pytest.raises(MelnikovError):
        melnikov_critical_points(SystemParams(mu=0.0, delta=0.0), 0.0, 10.0, 0.0)


def test_sweep_matches_pointwise():
    p = SystemParams(mu=0.3, delta=0.0, q=7)
    sig = np.linspace(0, 2 * math.pi, 9)
    sw = melnikov_sweep(p, 0.2, 6.0, 0.1, sig)
    for s, v in zip(sig, sw["value"]):
        assert v == pytest.approx(melnikov_L0(p, 0.2, 6.0, 0.1, s).value, rel=1e-14)


def test_averaged_increment_is_mean_mode():
    assert float(averaged_increment(9.0, 0.3)) == float(potential_harmonic(9.0, 0.3, 0))


@pytest.mark.parametrize("Psi", [10.0, 15.0, 20.0])
def test_scattering_shift_near_closed_form(Psi):
    m = scattering_model(SystemParams(mu=0.5, delta=0.0), [Psi])
    # corrections are relative O(Psi^-4)
    assert m.f_numeric[0] == pytest.approx(f_asymptotic(0.5, Psi), rel=2e-4)
    assert m.f_numeric[0] < 0 < m.twist[0]
    assert m.twist[0] == pytest.approx(-4 * m.f_numeric[0] / Psi, rel=1e-3)


def test_scattering_model_interface(tmp_path):
    m = scattering_model(SystemParams(mu=0.5, delta=0.0), [9.0, 10.0, 11.0])
    assert m.f(10.0) == pytest.approx(m.f_numeric[1])
    assert m.with_orientation(-1).shift(10.0) == pytest.approx(-m.f_numeric[1])
    with pytest.raises(DomainError):
        m.f(12.0)
    with pytest.raises(DomainError):
        m.with_orientation(0)
    m.to_csv(tmp_path / "f.csv")
    rows = [ln for ln in (tmp_path / "f.csv").read_text().splitlines()
            if not ln.startswith("#")]
    assert rows[0].split(",")[0] == "Psi"
    data = np.loadtxt(rows[1:], delimiter=",")
    assert data.shape == (3, 5)


def test_scattering_model_domain():
    with pytest.raises(DomainError):
        scattering_model(SystemParams(mu=0.5, delta=0.0), [3.0, 10.0])
    m = scattering_model(SystemParams(mu=0.0, delta=0.0), [10.0])
    assert m.f_numeric[0] == 0.0


@pytest.mark.parametrize("side", ["stable", "unstable"])
def test_shot_follows_parabola_without_binary(side):
    p = SystemParams(mu=0.0, delta=0.0, q=7)
    shot = manifold_shoot(p, 0.3, 2.0, side, fiber_param=0.1, x_init=0.05)
    tr = shot.trajectory
    for t in np.linspace(tr.t_min, tr.t_max, 7):
        want = parabola(0.3, 2.0, 0.1, t=t, params=p).state.coords
        diff = tr(t)[:4] - want[:4]
        diff[2] = circ(diff[2])
        assert np.abs(diff).max() < 1e-8
    assert shot.asymptotic["reached"]
    assert shot.asymptotic["Psi_drift"] == 0.0


@pytest.mark.slow
@pytest.mark.parametrize("phase", [0.4, 1.0, 2.0, 5.0])
def test_psi_splitting_matches_melnikov_derivative(phase):
    # first order in mu: the change of Psi is the phase derivative of the potential
    mu, Psi = 0.05, 2.5
    h = melnikov_harmonics(mu, Psi, 10, psi_min=0.0)
    e = 1e-5
    want = (h.value(phase + e) - h.value(phase - e)) / (2 * e)
    got = psi_splitting(SystemParams(mu=mu, delta=0.0, q=7), phase, Psi, 0.0)
    assert got == pytest.approx(want, rel=0.05)


def test_measured_shift_opposes_closed_form():
    p = SystemParams(mu=0.5, delta=0.0, q=1000)
    shift = measure_asymptotic_shift(p, 10.0)
    f = scattering_model(p, [10.0]).f_numeric[0]
    assert shift == pytest.approx(-f, rel=1e-3)


def test_parabola_time_parameter_examples():
    assert tau_of_t(3.0, 0.0) == 0.0
    assert time_of_tau(2.0, 1.0) == pytest.approx(2 * 2.0 ** 3 / 3, rel=1e-15)
    t, Psi = 1e6, 1.0
    assert tau_of_t(Psi, t) == pytest.approx((6 * t / Psi ** 3) ** (1 / 3), rel=1e-3)


def test_parabola_perihelion_and_ends():
    Psi0 = 4.0
    peri = parabola(0.7, Psi0, 0.0, tau=0.0).state.coords
    assert peri[0] == pytest.approx(2 / Psi0) and peri[1] == 0.0 and peri[2] == 0.7
    for sign in (1, -1):
        far = parabola(0.7, Psi0, 0.0, tau=sign * 1e8).state.coords
        assert abs(far[0]) < 1e-7 and abs(far[1]) < 1e-7
        assert abs(circ(far[2] - 0.7 - math.pi)) < 1e-7


def test_parabola_solves_kepler_field_at_large_momentum():
    p = SystemParams(mu=0.0, delta=0.0, q=7)
    pt = parabola(0.1, 10.0, 0.0, tau=0.7, params=p)
    field = make_rhs(p, "asteroid_mcgehee")(0.0, pt.state.coords)
    assert np.abs(field - parabola_derivative(pt, p)).max() < 1e-12


def test_potential_depends_on_reduced_phase(rng):
    p = SystemParams(mu=0.3, delta=0.0, q=7)
    for _ in range(20):
        psi0, s0, sigma = rng.uniform(0, 2 * math.pi, 3)
        a = melnikov_L0(p, psi0, 6.0, s0, sigma).value
        b = melnikov_L0(p, psi0 - p.q * s0 + sigma, 6.0, 0.0, 0.0).value
        assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_equal_masses_potential_is_even_in_phase():
    p = SystemParams(mu=0.5, delta=0.0, q=7)
    sig = np.arange(64) * 2 * math.pi / 64
    vals = melnikov_sweep(p, 0.0, 10.0, 0.0, sig)["value"]
    coeffs = np.fft.rfft(vals) / 64
    assert np.abs(coeffs[1:4].imag).max() < 1e-9


def test_critical_points_at_zero_phase():
    p = SystemParams(mu=0.3, delta=0.0, q=7)
    cp = melnikov_critical_points(p, 0.0, 10.0, 0.0)
    got = sorted(abs(circ(s)) for s in (cp.sigma_minus, cp.sigma_plus))
    assert got[0] < 1e-6 and got[1] == pytest.approx(math.pi, abs=1e-6)


def test_critical_points_shift_with_direction():
    p = SystemParams(mu=0.3, delta=0.0, q=7)
    h = 0.37
    a = melnikov_critical_points(p, 0.0, 10.0, 0.0)
    b = melnikov_critical_points(p, h, 10.0, 0.0)
    for x, y in ((a.sigma_minus, b.sigma_minus), (a.sigma_plus, b.sigma_plus)):
        assert abs(circ(y - (x - h))) < 1e-6


def test_leading_shift_for_equal_masses():
    assert f_asymptotic(0.5, 10.0) == pytest.approx(-3 * math.pi / 80000, rel=1e-15)


def test_shot_keeps_momentum_near_infinity():
    p = SystemParams(mu=0.5, delta=0.0, q=7)
    shot = manifold_shoot(p, 0.0, 10.0, "unstable", fiber_param=0.0)
    assert shot.asymptotic["reached"]
    assert shot.asymptotic["Psi_drift"] < 1e-6
