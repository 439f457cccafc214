"""Scattering-map orbits, transition chains and the shadowing experiment."""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .core_model import (
    CircularPrimaries,
    DomainError,
    ModelError,
    SystemParams,
    TWO_PI,
    jacobi_constant,
    parse_branch,
)
from .infinity import (
    EscapeError,
    _circ,
    asymptotic_state,
    flyby,
    melnikov_critical_points,
    melnikov_harmonics,
    measure_asymptotic_shift,
)
from .integrate import IntegratorConfig, write_csv

NODE_TOL = 1e-8
WITNESS_TOL = 1e-6
TWIST_FRACTION = 0.5
TUNE_TOL = 2e-4  # phase noise of revolutions lasting 1e9 time units
JUMP_TOL = 1e-10  # largest x correction accepted at an apocenter


class ChainError(ModelError):
    """Invalid chain input or a failed witness search."""


class ShadowError(ModelError):
    """Failed shadowing experiment; ``leg`` names the offending leg."""

    def __init__(self, message, leg=None):
        super().__init__(message if leg is None else f"leg {leg}: {message}")
        self.leg = leg


# ---------------------------------------------------------------------------
# twist-map orbits


@dataclass(frozen=True)
class ScatteringOrbit:
    """Orbit of ``(psi, Psi) -> (psi + shift(Psi), Psi)``.

    ``twist`` holds ``d f / d Psi`` at each departure node and
    ``twist_certificate`` the ratio of ``|twist|`` to the lower bound
    ``C / Psi_max^5`` with ``C`` half the leading-order constant; a ratio
    above one certifies the twist condition on that leg.
    """

    nodes: np.ndarray
    twist: np.ndarray
    twist_certificate: np.ndarray
    orientation: int


def twist_constant(mu):
    """Leading-order constant ``6 pi mu (1 - mu)`` of ``d f / d Psi``."""
    return 6.0 * math.pi * mu * (1.0 - mu)


def _twist_at(model, Psi):
    if model.Psi_grid.size == 1:
        return float(model.twist[0])
    return float(np.interp(Psi, model.Psi_grid, model.twist))


def iterate_scattering(model, start, n):
    """Iterate the scattering map ``n`` times from ``start = (psi, Psi)``.

    The action is carried over unchanged, so it is conserved exactly.

    Raises
    ------
    DomainError
        If ``Psi`` leaves the model grid.
    """
    if int(n) != n or n < 0:
        raise DomainError("n must be a non-negative integer")
    psi, Psi = map(float, start)
    nodes = [(psi, Psi)]
    twist, cert = [], []
    Psi_max = float(model.Psi_grid[-1])
    bound = TWIST_FRACTION * twist_constant(model.mu) / Psi_max ** 5
    for _ in range(int(n)):
        psi = psi + float(model.shift(Psi))
        nodes.append((psi, Psi))
        tw = _twist_at(model, Psi)
        twist.append(tw)
        cert.append(abs(tw) / bound if bound > 0 else math.inf)
    return ScatteringOrbit(np.array(nodes), np.array(twist), np.array(cert),
                           model.orientation)


# ---------------------------------------------------------------------------
# witnesses on the perihelion section


def _perihelion_event(t, z):
    return z[1]


_perihelion_event.terminal = True
_perihelion_event.direction = 0.0


def section_point(params, psi0, Psi0, side, fiber_param, x_init=1e-2, config=None,
                  far_field=300.0, primaries=None):
    """First perihelion crossing of a shot stable or unstable manifold.

    The unstable side runs forward from ``x_init``, the stable side backward.

    Returns
    -------
    ndarray of shape (4,)
        ``(x, psi, Psi, s)`` at ``Xi = 0``.
    """
    t0, z0 = asymptotic_state(params, psi0, Psi0, side, fiber_param, x_init, primaries)
    tr, stop = flyby(params, z0, (t0, -t0), config, primaries, far_field,
                     events=[_perihelion_event])
    if stop is None:
        raise EscapeError(f"the {side} shot did not reach the perihelion section")
    z = tr.states[-1] if side == "unstable" else tr.states[0]
    return np.array([z[0], z[2], z[3], z[4]])


def section_difference(a, b):
    """``a - b`` on the section with circular angle components."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d[1] = _circ(d[1])
    d[3] = _circ(d[3])
    return d


def channel_fiber(params, psi0, channel=-1):
    """Phase ``s0`` that puts the parabola labelled ``psi0`` on a channel.

    The channel of branch -1 has reduced angle ``psi0 - q s0 = 0`` at
    perihelion, the one of branch +1 has ``pi``.
    """
    target = 0.0 if parse_branch(channel) == -1 else math.pi
    return float(np.mod(psi0 - target, TWO_PI) / params.q)


@dataclass
class Witness:
    """Heteroclinic point between consecutive nodes on the perihelion section."""

    leg: int
    point: np.ndarray
    stable_point: np.ndarray
    residual: float
    unstable_fiber: float
    stable_fiber: float
    iterations: int
    transversality: dict


def _transversality(params, psi0, Psi0, s0, branch, harmonics):
    h = melnikov_harmonics(params.mu, Psi0, harmonics)
    cp = melnikov_critical_points(params, psi0, Psi0, s0, harmonics, _cache=h)
    i = 0 if branch == -1 else 1
    sigma = cp.sigma_minus if branch == -1 else cp.sigma_plus
    target = params.q * s0 - psi0 + (0.0 if branch == -1 else math.pi)
    grid = np.linspace(0.0, TWO_PI, 721)
    peak = float(np.max(np.abs(h.scaled_derivative(grid, 1))))
    d2 = cp.second_derivatives[i]
    return dict(scaled_second_derivative=float(d2), log_scale=float(cp.log_scale),
                log10_magnitude=(math.log10(abs(d2)) + cp.log_scale / math.log(10.0)
                                 if d2 else -math.inf),
                margin=abs(d2) / peak if peak else 0.0,
                critical_offset=abs(_circ(sigma - target)),
                leading_harmonic=int(cp.leading_harmonic), degenerate=bool(cp.degenerate))


def find_witness(params, node, next_node, leg=0, branch=-1, x_init=1e-2, config=None,
                 far_field=300.0, harmonics=8, max_iter=8):
    """Intersect ``W^u(node)`` with ``W^s(next_node)`` on the perihelion section.

    Nodes are points ``(psi, Psi)`` of the cylinder at infinity; the parabola
    asymptotic to ``psi`` has perihelion direction ``psi - pi``.  The unstable
    shot sits on the channel of ``branch``; the phase of the stable shot is
    adjusted by a secant iteration until the ``s`` components agree, and the
    remaining distance is the residual.
    """
    branch = parse_branch(branch)
    psi_u = node[0] - math.pi
    psi_s = next_node[0] - math.pi
    s_u = channel_fiber(params, psi_u, branch)
    p_u = section_point(params, psi_u, node[1], "unstable", s_u, x_init, config, far_field)

    def miss(s0):
        p = section_point(params, psi_s, next_node[1], "stable", s0, x_init, config, far_field)
        return p, section_difference(p, p_u)[3]

    s_a = s_u
    p_a, r_a = miss(s_a)
    s_b = s_a - r_a
    p_b, r_b = miss(s_b)
    it = 2
    while abs(r_b) > 1e-14 and it < max_iter and r_b != r_a:
        s_a, s_b, r_a = s_b, s_b - r_b * (s_b - s_a) / (r_b - r_a), r_b
        p_b, r_b = miss(s_b)
        it += 1
    res = float(np.linalg.norm(section_difference(p_b, p_u)))
    trans = (_transversality(params, psi_u, node[1], s_u, branch, harmonics)
             if params.mu > 0 else {})
    return Witness(leg, p_u, p_b, res, s_u, float(s_b), it, trans)


# ---------------------------------------------------------------------------
# chains


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class TransitionChain:
    """Nodes on the cylinder at infinity joined by heteroclinic witnesses.

    ``nodes`` has shape ``(n + 1, 2)`` with rows ``(psi, Psi)``.  Legs whose
    witness search failed are listed in ``failures`` and the chain is
    truncated before the first of them.
    """

    params: SystemParams
    branch: int
    orientation: int
    bounds: tuple
    nodes: np.ndarray
    witnesses: list
    twist: np.ndarray
    twist_certificate: np.ndarray
    failures: list = field(default_factory=list)
    x_init: float = 1e-2
    measured_shift: float = float("nan")

    def __post_init__(self):
        lo, hi = self.bounds
        if np.any(self.nodes[:, 1] < lo) or np.any(self.nodes[:, 1] > hi):
            raise ChainError("a node leaves the action window")

    @property
    def legs(self):
        return len(self.witnesses)

    @property
    def residuals(self):
        return np.array([w.residual for w in self.witnesses])

    def to_dict(self):
        p = self.params
        return _jsonable(dict(
            kind="TransitionChain",
            params=dict(mu=p.mu, delta=p.delta, epsilon=p.epsilon, q=p.q),
            branch=self.branch, orientation=self.orientation, bounds=list(self.bounds),
            x_init=self.x_init, measured_shift=self.measured_shift,
            nodes=self.nodes,
            witnesses=[dict(leg=w.leg, point=w.point, stable_point=w.stable_point,
                            residual=w.residual, unstable_fiber=w.unstable_fiber,
                            stable_fiber=w.stable_fiber, iterations=w.iterations,
                            transversality=w.transversality) for w in self.witnesses],
            twist=self.twist, twist_certificate=self.twist_certificate,
            failures=self.failures))

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "TransitionChain":
            raise DomainError("not a TransitionChain record")
        ws = [Witness(w["leg"], np.array(w["point"]), np.array(w["stable_point"]),
                      w["residual"], w["unstable_fiber"], w["stable_fiber"],
                      w["iterations"], w["transversality"]) for w in d["witnesses"]]
        return cls(SystemParams(**d["params"]), d["branch"], d["orientation"],
                   tuple(d["bounds"]), np.array(d["nodes"], dtype=float), ws,
                   np.array(d["twist"], dtype=float),
                   np.array(d["twist_certificate"], dtype=float), d["failures"],
                   d["x_init"], float(d["measured_shift"]))

    def to_json(self, path=None, metadata=None):
        d = self.to_dict()
        if metadata:
            d["metadata"] = metadata
        text = json.dumps(d, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, text_or_path):
        text = text_or_path
        if not text_or_path.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def check_node_spacing(model, nodes, tol=NODE_TOL):
    """Maximal defect ``|psi_{k+1} - psi_k - shift(Psi_k)|`` along ``nodes``.

    Raises
    ------
    ChainError
        If a defect exceeds ``tol`` or the action changes between nodes.
    """
    nodes = np.asarray(nodes, dtype=float)
    worst = 0.0
    for k in range(nodes.shape[0] - 1):
        (a, A), (b, B) = nodes[k], nodes[k + 1]
        if A != B:
            raise ChainError(f"leg {k}: the action changes between nodes")
        d = abs(_circ(b - a - float(model.shift(A))))
        worst = max(worst, d)
        if d > tol:
            raise ChainError(f"leg {k}: node is not the scattering image ({d:.3e})")
    return worst


def calibrate_orientation(params, model, Psi0, x_init=1e-2, config=None, far_field=300.0):
    """Sign aligning the model with a directly integrated passage.

    Returns
    -------
    (int, float) : the orientation and the measured shift.
    """
    if params.mu == 0.0:
        return model.orientation, 0.0
    shift = measure_asymptotic_shift(params, Psi0, x_init=x_init, config=config,
                                     far_field=far_field)
    return (1 if shift * float(model.f(Psi0)) > 0 else -1), float(shift)


def build_chain(params, model, start, n=3, bounds=None, nodes=None, branch=-1,
                x_init=1e-2, config=None, far_field=300.0, harmonics=8, calibrate=True,
                residual_tol=WITNESS_TOL):
    """Finite transition chain of the scattering map with witnesses.

    Parameters
    ----------
    params : SystemParams
        ``delta`` must vanish for the witness search.
    model : ScatteringMapModel
    start : (float, float)
        First node ``(psi, Psi)``.
    n : int
        Number of legs.
    bounds : (float, float), optional
        Action window; defaults to the model grid.
    nodes : array_like, optional
        Explicit nodes, checked against the model instead of generated.
    calibrate : bool
        Fix the orientation of the model from one integrated passage.

    Returns
    -------
    TransitionChain
    """
    if params.delta != 0.0:
        raise DomainError("witnesses are computed for delta = 0")
    branch = parse_branch(branch)
    config = config or IntegratorConfig()
    bounds = tuple(bounds or (float(model.Psi_grid[0]), float(model.Psi_grid[-1])))
    measured = float("nan")
    if calibrate:
        sign, measured = calibrate_orientation(params, model, float(start[1]), x_init,
                                               config, far_field)
        model = model.with_orientation(sign)
    if nodes is None:
        orbit = iterate_scattering(model, start, n)
        nodes = orbit.nodes
    else:
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or nodes.shape[0] < 2:
            raise ChainError("nodes must have shape (n + 1, 2) with n >= 1")
        check_node_spacing(model, nodes)
        orbit = iterate_scattering(model, nodes[0], nodes.shape[0] - 1)
    witnesses, failures = [], []
    for k in range(nodes.shape[0] - 1):
        try:
            w = find_witness(params, nodes[k], nodes[k + 1], k, branch, x_init, config,
                             far_field, harmonics)
        except ModelError as exc:
            failures.append(dict(leg=k, reason=str(exc)))
            break
        if not w.residual < residual_tol:
            failures.append(dict(leg=k, reason=f"residual {w.residual:.3e}"))
            break
        witnesses.append(w)
    kept = len(witnesses) + 1
    return TransitionChain(params, branch, model.orientation, bounds, nodes[:kept],
                           witnesses, orbit.twist[:kept - 1],
                           orbit.twist_certificate[:kept - 1], failures, x_init, measured)


# ---------------------------------------------------------------------------
# shadowing


@dataclass
class ShadowReport:
    """Outcome of :func:`shadow_demo`.

    ``N`` are the stroboscopic iterates closest to the apocenter visits of
    the nodes, ``N_tilde`` those whose interval contains the perihelion
    visits of the witnesses.  ``xi_min`` and ``xi_max`` give the excursion
    of the asteroid distance on each leg.
    """

    params: SystemParams
    legs: int
    strobe_period: float
    apocenter: float
    tuning_residual: np.ndarray
    initial_state: np.ndarray
    iota: np.ndarray
    iota_tilde: np.ndarray
    node_distance: np.ndarray
    witness_distance: np.ndarray
    N: np.ndarray
    N_tilde: np.ndarray
    xi_min: np.ndarray
    xi_max: np.ndarray
    return_radius: float
    jacobi_drift: float
    max_jump: float = 0.0
    series: np.ndarray = field(repr=False, default=None)

    @property
    def interleaved(self):
        seq = []
        for k in range(self.legs):
            seq += [self.N[k], self.N_tilde[k]]
        seq.append(self.N[self.legs])
        return bool(np.all(np.diff(seq) > 0))

    @property
    def oscillatory(self):
        """Large excursions on every leg and returns into the region."""
        return bool(np.all(self.xi_max > 2.0 * self.return_radius)
                    and np.all(self.xi_min <= self.return_radius))

    @property
    def success(self):
        return bool(self.interleaved and self.oscillatory
                    and np.all(self.node_distance < self.iota)
                    and np.all(self.witness_distance < self.iota_tilde[:self.legs]))

    def to_dict(self):
        p = self.params
        return _jsonable(dict(
            kind="ShadowReport",
            params=dict(mu=p.mu, delta=p.delta, epsilon=p.epsilon, q=p.q),
            legs=self.legs, strobe_period=self.strobe_period, apocenter=self.apocenter,
            tuning_residual=self.tuning_residual, initial_state=self.initial_state,
            iota=self.iota, iota_tilde=self.iota_tilde, node_distance=self.node_distance,
            witness_distance=self.witness_distance, N=self.N, N_tilde=self.N_tilde,
            xi_min=self.xi_min, xi_max=self.xi_max, return_radius=self.return_radius,
            jacobi_drift=self.jacobi_drift, max_jump=self.max_jump, interleaved=self.interleaved,
            oscillatory=self.oscillatory, success=self.success))

    def to_json(self, path=None, metadata=None):
        d = self.to_dict()
        if metadata:
            d["metadata"] = metadata
        text = json.dumps(d, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def series_to_csv(self, path, metadata=None):
        write_csv(path, ["t", "x", "Xi", "psi", "Psi", "s", "xi"], self.series, metadata)


def default_iotas(n, base=1e-2):
    """Tolerances ``base / (k + 1)`` for ``k = 0..n``."""
    return base / np.arange(1, n + 2, dtype=float)


class _Segments:
    """Concatenated trajectory segments evaluated by time."""

    def __init__(self):
        self.parts = []

    def add(self, tr):
        self.parts.append(tr)

    def __call__(self, t):
        for tr in self.parts:
            if tr.t_min <= t <= tr.t_max:
                return tr(t)
        raise ShadowError(f"time {t} outside the integrated orbit")


def _kepler_half_period(z, mass=1.0):
    x, Xi, _, Psi, _ = z
    r = 2.0 / (x * x)
    E = 0.5 * (Xi * Xi + Psi * Psi / (r * r)) - mass / r
    if E >= 0:
        raise ShadowError("the orbit is not bound")
    a = -mass / (2.0 * E)
    return math.pi * a ** 1.5 / math.sqrt(mass)


def _run_to(params, z, t, event_dir, config, far_field, span):
    """Integrate from ``(t, z)`` to the next perihelion (+1) or apocenter (-1)."""

    def ev(tt, w):
        return w[1]
    ev.terminal = True
    ev.direction = float(event_dir)
    tr, stop = flyby(params, z, (t, t + span), config, None, far_field, events=[ev])
    if stop is None:
        raise ShadowError("no section crossing within one Kepler period")
    return tr


def shadow_demo(params, chain, iota=None, iota_tilde=None, return_radius=None, config=None,
                far_field=300.0, apocenter_x=None, max_tune=12):
    """Exhibit an orbit visiting the nodes and witnesses of ``chain`` in turn.

    The orbit starts at the apocenter of a near-parabolic ellipse with the
    action and direction of the first node and the binary aligned with it.
    The apocenter distance is tuned so that the first perihelion falls on
    the channel; the orbit is then symmetric in the rotating frame and every
    later perihelion returns to the channel.  Visits are measured on the
    stroboscopic map of period ``2 pi q`` (node visits, on ``(x, Xi, psi,
    Psi)``) and on the perihelion section (witness visits, on ``(x, psi,
    Psi, s)`` with ``s`` taken modulo ``2 pi / q``).

    Raises
    ------
    ShadowError
        If a tolerance is below what the integrator resolves, the tuning
        fails, or a visit misses its tolerance (with the leg index).
    """
    if params.delta != 0.0:
        raise DomainError("the shadowing experiment runs at delta = 0")
    legs = chain.legs
    if legs < 1:
        raise ShadowError("the chain has no valid witnesses")
    config = config or IntegratorConfig()
    iota = default_iotas(legs) if iota is None else np.asarray(iota, dtype=float)
    iota_tilde = iota.copy() if iota_tilde is None else np.asarray(iota_tilde, dtype=float)
    if iota.size < legs + 1 or iota_tilde.size < legs:
        raise DomainError("need one tolerance per node and per witness")
    floor = 1e3 * max(config.rel_tol, config.abs_tol)
    if np.any(iota <= 0) or np.any(iota_tilde <= 0):
        raise DomainError("tolerances must be positive")
    if min(iota.min(), iota_tilde.min()) < floor:
        raise ShadowError(f"tolerance below the integration accuracy ({floor:.1e})")
    R = float(return_radius or chain.bounds[1] ** 2)
    prim = CircularPrimaries(params.mu, params.q)
    period = TWO_PI * params.q
    psi_n, Psi_n = chain.nodes[0]
    x_a = float(apocenter_x or min(0.4 * iota.min(), 1e-2))
    s_a = float(np.mod(psi_n, TWO_PI) / params.q)

    def start(x):
        return np.array([x, 0.0, psi_n, Psi_n, s_a])

    # the osculating energy near perihelion carries the binary's quadrupole,
    # so every segment is bounded by the Kepler period at the first apocenter
    span = 3.0 * _kepler_half_period(start(x_a))

    def tune(z_apo, t_apo, leg):
        """Newton on the apocenter distance, Kepler slope of the phase."""
        z_apo = z_apo.copy()
        xi_ = 2.0 / z_apo[0] ** 2
        g = math.inf
        for _ in range(max_tune):
            z_apo[0] = math.sqrt(2.0 / xi_)
            tr = _run_to(params, z_apo, t_apo, 1, config, far_field, span)
            zp = tr.states[-1]
            g = _circ(zp[2] - params.q * zp[4])
            if abs(g) < TUNE_TOL:
                return z_apo, tr, g
            a = 0.5 * (xi_ + 0.5 * zp[3] ** 2)
            xi_ += g / (0.75 * math.pi * math.sqrt(a))
        raise ShadowError(f"apocenter tuning did not converge ({g:.2e})", leg=leg)

    z, tr, g = tune(start(x_a), 0.0, 0)
    z0 = z.copy()
    J0 = jacobi_constant(params, z, prim)
    segs = _Segments()
    apo_t, apo_z, per_t, per_z = [0.0], [z.copy()], [], []
    jumps, phases = [], [g]
    for k in range(legs):
        if k > 0:
            # re-aim the next perihelion at the channel (multiple shooting)
            zt, tr, g = tune(z, t, k)
            jumps.append(abs(zt[0] - z[0]))
            phases.append(g)
        segs.add(tr)
        t, z = tr.t_max, tr.states[-1].copy()
        per_t.append(t)
        per_z.append(z)
        tr = _run_to(params, z, t, -1, config, far_field, span)
        segs.add(tr)
        t, z = tr.t_max, tr.states[-1].copy()
        apo_t.append(t)
        apo_z.append(z)
    max_jump = max(jumps, default=0.0)
    if max_jump > JUMP_TOL:
        raise ShadowError(f"continuation jump {max_jump:.2e} exceeds {JUMP_TOL:.0e}")
    # stroboscopic indices and visit distances
    N = np.array([int(round(ta / period)) for ta in apo_t])
    N_tilde = np.array([int(math.floor(tp / period)) for tp in per_t])
    node_d = np.zeros(legs + 1)
    for k in range(legs + 1):
        tk = min(max(N[k] * period, segs.parts[0].t_min), segs.parts[-1].t_max)
        w = segs(tk)
        node_d[k] = math.sqrt(w[0] ** 2 + w[1] ** 2 + _circ(w[2] - chain.nodes[k, 0]) ** 2
                              + (w[3] - chain.nodes[k, 1]) ** 2)
    wit_d = np.zeros(legs)
    cell = TWO_PI / params.q
    for k in range(legs):
        zp = per_z[k]
        d = section_difference([zp[0], zp[2], zp[3], zp[4]], chain.witnesses[k].point)
        d[3] = (d[3] + 0.5 * cell) % cell - 0.5 * cell
        wit_d[k] = float(np.linalg.norm(d))
    # excursions between consecutive apocenters
    xi_min = np.zeros(legs)
    xi_max = np.zeros(legs)
    rows = []
    for tr in segs.parts:
        rows.append(np.column_stack([tr.times, tr.states, 2.0 / tr.states[:, 0] ** 2]))
    series = np.concatenate(rows)
    for k in range(legs):
        m = (series[:, 0] >= apo_t[k]) & (series[:, 0] <= apo_t[k + 1])
        xs = series[m, 6]
        xi_min[k] = min(xs.min(), 2.0 / per_z[k][0] ** 2)
        xi_max[k] = max(xs.max(), 2.0 / apo_z[k][0] ** 2, 2.0 / apo_z[k + 1][0] ** 2)
    drift = max(abs(jacobi_constant(params, w, prim) - J0) for w in apo_z + per_z) / abs(J0)
    report = ShadowReport(params, legs, period, 2.0 / z0[0] ** 2, np.array(phases), z0,
                          iota[:legs + 1], iota_tilde[:legs], node_d, wit_d, N, N_tilde,
                          xi_min, xi_max, R, float(drift), float(max_jump), series)
    for k in range(legs + 1):
        if not node_d[k] < iota[k]:
            raise ShadowError(f"node visit misses by {node_d[k]:.3e} > {iota[k]:.3e}", leg=k)
    for k in range(legs):
        if not wit_d[k] < iota_tilde[k]:
            raise ShadowError(f"witness visit misses by {wit_d[k]:.3e} > {iota_tilde[k]:.3e}",
                              leg=k)
    return report
