"""Acceptance checks shared by the ``verify`` command and the test suite.

Each check returns a :class:`CheckResult`; none of them raises on a failed
tolerance, so a run always reports every criterion.
"""

from dataclasses import dataclass, field
import math
import time
import warnings

import numpy as np

from .core_model import (
    Chart,
    ChartState,
    CircularPrimaries,
    EnergyLevel,
    ModelError,
    SystemParams,
    TWO_PI,
    jacobi_constant,
)
from .integrate import IntegratorConfig, integrate


@dataclass
class CheckResult:
    """Outcome of one acceptance criterion."""

    number: int
    name: str
    passed: bool
    summary: str
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number}: {self.name} ({self.seconds:.1f} s) {self.summary}"


def _timed(number, name, fn, *args, **kw):
    t0 = time.perf_counter()
    try:
        passed, summary, details = fn(*args, **kw)
    except ModelError as exc:
        passed, summary, details = False, f"error: {exc}", {}
    return CheckResult(number, name, bool(passed), summary, time.perf_counter() - t0, details)


# ---------------------------------------------------------------------------
# 1. transforms


def _transforms(n_states, seed, params):
    from .transforms import (TRANSFORM_NAMES, TransformDescriptor, apply, random_source_state,
                             state_difference, symplectic_residual)
    rng = np.random.default_rng(seed)
    worst = {}
    for name in TRANSFORM_NAMES:
        desc = TransformDescriptor(name, params)
        rt = sy = 0.0
        for _ in range(n_states):
            z = random_source_state(desc, rng)
            back = apply(desc, apply(desc, z), "inverse")
            scale = max(1.0, float(np.abs(z.coords).max()))
            rt = max(rt, float(np.abs(state_difference(back, z)).max()) / scale)
            sy = max(sy, symplectic_residual(desc, z))
        worst[name] = (rt, sy)
    ok = all(rt <= 1e-12 and sy <= 1e-8 for rt, sy in worst.values())
    rt_max = max(v[0] for v in worst.values())
    sy_max = max(v[1] for v in worst.values())
    return ok, (f"{len(worst)} transforms x {n_states} states: round trip {rt_max:.1e}, "
                f"symplectic {sy_max:.1e}"), worst


def check_transforms(n_states=1000, seed=0, params=None):
    params = params or SystemParams(mu=0.3, delta=1e-3, epsilon=0.1, q=7)
    return _timed(1, "transform certificates", _transforms, n_states, seed, params)


# ---------------------------------------------------------------------------
# 2. conserved quantities


def _conserved(periods):
    cfg = IntegratorConfig()
    # Kepler: the binary collapses to the origin at mu = 0
    p0 = SystemParams(mu=0.0, delta=0.0, q=7)
    prim0 = CircularPrimaries(0.0, 7)
    a, e = 3.0, 0.4
    r0 = a * (1.0 - e)
    v0 = math.sqrt((1.0 + e) / r0)
    st = ChartState(Chart.AsteroidCartesian, [r0, 0.0, 0.0, v0, 0.0])
    T = TWO_PI * a ** 1.5
    tr = integrate(p0, st, "asteroid", (0.0, periods * T), cfg, prim0)
    xA, yA = tr.states[:, :2], tr.states[:, 2:4]
    E = 0.5 * np.sum(yA * yA, axis=1) - 1.0 / np.hypot(*xA.T)
    L = xA[:, 0] * yA[:, 1] - xA[:, 1] * yA[:, 0]
    dE = float(np.abs(E / E[0] - 1.0).max())
    dL = float(np.abs(L / L[0] - 1.0).max())
    # Jacobi constant of the equal-mass binary
    p1 = SystemParams(mu=0.5, delta=0.0, q=7)
    prim1 = CircularPrimaries(0.5, 7)
    xi0 = 4.0
    z = np.array([math.sqrt(2.0 / xi0), 0.0, 0.3, math.sqrt(xi0) * 1.05, 0.0])
    T1 = TWO_PI * xi0 ** 1.5
    tr1 = integrate(p1, ChartState(Chart.AsteroidMcGehee, z), "asteroid_mcgehee",
                    (0.0, periods * T1), cfg, prim1)
    J = np.array([jacobi_constant(p1, w, prim1) for w in tr1.states])
    dJ = float(np.abs(J / J[0] - 1.0).max())
    ok = max(dE, dL, dJ) < 1e-8
    return ok, f"Kepler energy {dE:.1e}, angular momentum {dL:.1e}, Jacobi {dJ:.1e}", dict(
        kepler_energy=dE, angular_momentum=dL, jacobi=dJ)


def check_conserved(periods=10):
    return _timed(2, "conserved quantities", _conserved, periods)


# ---------------------------------------------------------------------------
# 3. truncated fixed point and multipliers


def _truncated(epsilons):
    from .periodic import (Z_STAR, expected_multipliers, multipliers,
                           rectified_section_map)
    out = {}
    ok = True
    for eps in epsilons:
        p = SystemParams(mu=0.5, delta=0.0, epsilon=eps, q=1000)
        for branch in (1, -1):
            res = rectified_section_map(p, Z_STAR, EnergyLevel.truncated(eps, branch),
                                        "truncated", jacobian=True)
            fix = float(np.abs(res.image - Z_STAR).max())
            got = multipliers(res)
            want = expected_multipliers(eps, branch)
            err = float(max(np.abs(want - g).min() for g in got))
            out[f"{eps}/{branch:+d}"] = (fix, err)
            ok &= fix < 1e-10 and err < 1e-6
    fx = max(v[0] for v in out.values())
    me = max(v[1] for v in out.values())
    return ok, f"fixed-point defect {fx:.1e}, multiplier error {me:.1e}", out


def check_truncated(epsilons=(0.05, 0.1, 0.2)):
    return _timed(3, "truncated fixed point and multipliers", _truncated, epsilons)


# ---------------------------------------------------------------------------
# 4. continuation bounds


def _continuation(deltas, q, branch):
    from .periodic import BOUND_CONSTANTS, assemble_orbit, tune_epsilon
    out = {}
    ok = True
    for d in deltas:
        p = SystemParams(mu=0.5, delta=d, epsilon=0.1, q=q)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            tr = tune_epsilon(p, branch, q=q)
            rec = assemble_orbit(p.replace(epsilon=tr.epsilon), tr.fixed_point,
                                 direct_check=True)
        dg = rec.diagnostics
        est = dg["estimates"]
        bad = [k for k, v in est.items() if not v[2]]
        # lap closure of the assembled orbit; the single long run is a cross-check
        # whose defect is measured relative to the outer body's distance
        closure = max(dg["closure"], dg["direct_closure_relative"])
        laps_ok = rec.laps == q - branch and abs(rec.period - rec.laps * rec.lap_period) <= \
            1e-12 * rec.period
        eps = rec.params.epsilon
        per_dev = abs(rec.period / (TWO_PI * q) - 1.0)
        per_ok = per_dev <= BOUND_CONSTANTS["K_period"] * math.sqrt(d / eps) + 1e-12
        secs = time.perf_counter() - t0
        out[d] = dict(epsilon=eps, closure=closure, violated=bad, period_deviation=per_dev,
                      seconds=secs)
        ok &= not bad and closure < 1e-8 and laps_ok and per_ok and secs < 300.0
    worst = max(v["closure"] for v in out.values())
    return ok, (f"q={q}: all estimates hold, closure {worst:.1e}" if ok
                else f"q={q}: {out}"), out


def check_continuation(deltas=(0.0, 1e-12, 1e-10), q=1000, branch=1):
    return _timed(4, "continuation bounds", _continuation, deltas, q, branch)


# ---------------------------------------------------------------------------
# 5. rotation tuning


def _tuning(epsilon0, branch):
    from .periodic import admissible_q, tune_epsilon
    q = admissible_q(epsilon0)[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tr = tune_epsilon(SystemParams(mu=0.5, delta=0.0, epsilon=epsilon0, q=q), branch,
                          q=q, epsilon0=epsilon0)
    ok = tr.residual <= 1e-10
    return ok, f"q={q}, epsilon={tr.epsilon:.12f}, ratio defect {tr.residual:.1e}", dict(
        q=q, epsilon=tr.epsilon, residual=tr.residual)


def check_tuning(epsilon0=0.16, branch=1):
    return _timed(5, "rotation tuning", _tuning, epsilon0, branch)


# ---------------------------------------------------------------------------
# 6. Melnikov oracle


def _melnikov(mus, Psis):
    from .infinity import (melnikov_L0, melnikov_critical_points, melnikov_direct,
                           melnikov_harmonics, reduced_phase)
    labels = [(0.3, 0.1, 0.2), (1.0, 2.0, -0.5), (-2.0, 0.7, 3.0)]
    # vanishing at mu = 0
    p0 = SystemParams(mu=0.0, delta=0.0, q=1000)
    zero = max(abs(melnikov_L0(p0, a, 10.0, b, c).value) for a, b, c in labels)
    zero = max(zero, max(abs(melnikov_direct(p0, a, 10.0, b, c)) for a, b, c in labels))
    # reduction identity against direct quadrature at the true angles
    red = 0.0
    for mu, Psi in ((0.3, 2.5), (0.5, 10.0)):
        p = SystemParams(mu=mu, delta=0.0, q=7)
        h = melnikov_harmonics(mu, Psi, 10, psi_min=0.0)
        for a, b, c in labels:
            red = max(red, abs(melnikov_direct(p, a, Psi, b, c)
                               - h.value(reduced_phase(p, a, b, c))))
    # cosine-only structure: odd part of L0 in the reduced phase
    odd = 0.0
    for mu in mus:
        h = melnikov_harmonics(mu, 2.5, 10, psi_min=0.0)
        for ph in (0.4, 1.1, 2.5):
            odd = max(odd, abs(h.value(ph) - h.value(-ph)))
    # critical points
    crit = 0.0
    psi0, s0 = 0.7, 0.0123
    for mu in mus:
        for Psi in Psis:
            p = SystemParams(mu=mu, delta=0.0, q=1000)
            cp = melnikov_critical_points(p, psi0, Psi, s0)
            base = p.q * s0 - psi0
            crit = max(crit, abs(_wrap(cp.sigma_minus - base)),
                       abs(_wrap(cp.sigma_plus - base - math.pi)))
    ok = zero < 1e-12 and red < 1e-9 and odd < 1e-9 and crit < 1e-6
    return ok, (f"mu=0 values {zero:.1e}, reduction {red:.1e}, odd part {odd:.1e}, "
                f"critical points {crit:.1e}"), dict(zero=zero, reduction=red, odd=odd,
                                                     critical=crit)


def _wrap(a):
    return (a + math.pi) % TWO_PI - math.pi


def check_melnikov(mus=(0.1, 0.3, 0.5), Psis=(8.0, 10.0, 15.0)):
    return _timed(6, "Melnikov oracle", _melnikov, mus, Psis)


# ---------------------------------------------------------------------------
# 7. scattering asymptotics


def _scattering(mu, window):
    from .infinity import f_asymptotic, scattering_model, scattering_shift
    rel = {}
    for Psi in (10.0, 20.0):
        f, _ = scattering_shift(mu, Psi)
        rel[Psi] = abs(f / float(f_asymptotic(mu, Psi)) - 1.0)
    factor = rel[10.0] / rel[20.0]
    m = scattering_model(SystemParams(mu=mu, delta=0.0, q=1000),
                         np.linspace(window[0], window[1], 11))
    twist_min = float(m.twist.min())
    ok = factor >= 3.5 and twist_min > 0
    return ok, (f"relative corrections {rel[10.0]:.2e} -> {rel[20.0]:.2e} "
                f"(factor {factor:.1f}), min twist {twist_min:.2e}"), dict(
        relative=rel, factor=factor, twist_min=twist_min)


def check_scattering(mu=0.5, window=(9.0, 20.0)):
    return _timed(7, "scattering asymptotics", _scattering, mu, window)


# ---------------------------------------------------------------------------
# 8. manifold coincidence


def _coincidence(Psi0, psi0, s0):
    from .infinity import manifold_shoot, parabola, time_of_tau
    p = SystemParams(mu=0.0, delta=0.0, q=1000)
    worst = 0.0
    taus = np.linspace(-3.0, 3.0, 61)
    for side in ("unstable", "stable"):
        shot = manifold_shoot(p, psi0, Psi0, side, s0)
        for tau in taus:
            pt = parabola(psi0, Psi0, s0, tau=tau, params=p)
            z = shot(time_of_tau(Psi0, tau))
            d = z - pt.state.coords
            d[2] = _wrap(d[2])
            d[4] = _wrap(d[4])
            worst = max(worst, float(np.abs(d).max()))
    return worst < 1e-6, f"max deviation {worst:.1e} over tau in [-3, 3]", dict(deviation=worst)


def check_coincidence(Psi0=10.0, psi0=0.4, s0=0.1):
    return _timed(8, "manifold coincidence", _coincidence, Psi0, psi0, s0)


# ---------------------------------------------------------------------------
# 9. shadowing


def shadow_pipeline(mu=0.5, Psi0=10.0, window=(9.0, 11.0), legs=3, q=1000):
    """Model, chain and shadowing report of the demonstration."""
    from .chains import build_chain, shadow_demo
    from .infinity import scattering_model
    p = SystemParams(mu=mu, delta=0.0, epsilon=0.1, q=q)
    model = scattering_model(p, np.linspace(window[0], window[1], 9), branch=-1)
    chain = build_chain(p, model, (0.0, Psi0), legs, bounds=window)
    report = shadow_demo(p, chain)
    return chain, report


def _shadow(legs):
    chain, rep = shadow_pipeline(legs=legs)
    ok = (chain.legs == legs and rep.interleaved and rep.oscillatory and rep.success
          and rep.jacobi_drift < 1e-6 and np.all(chain.residuals < 1e-6))
    return ok, (f"{rep.legs} legs, N={rep.N.tolist()}, N~={rep.N_tilde.tolist()}, "
                f"xi in [{rep.xi_min.min():.1f}, {rep.xi_max.min():.3g}], "
                f"R={rep.return_radius:g}, witness residual {chain.residuals.max():.1e}, "
                f"Jacobi drift {rep.jacobi_drift:.1e}"), dict(report=rep.to_dict())


def check_shadow(legs=3):
    return _timed(9, "shadowing demonstration", _shadow, legs)


CHECKS = (check_transforms, check_conserved, check_truncated, check_continuation,
          check_tuning, check_melnikov, check_scattering, check_coincidence, check_shadow)


def run_all(report=print):
    """Run criteria 1 to 9 and report one line each."""
    results = []
    for fn in CHECKS:
        r = fn()
        if report:
            report(r.line())
        results.append(r)
    return results
