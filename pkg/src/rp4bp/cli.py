"""Command-line front end: ``rp4bp <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed verification.
"""

import argparse
from dataclasses import dataclass, field, fields
import hashlib
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .config import DEFAULTS
from .core_model import (
    Chart,
    ChartState,
    DomainError,
    ModelError,
    SystemParams,
    parse_branch,
)
from .integrate import IntegratorConfig

OUTPUT_ENV = "RP4BP_OUTPUT_DIR"
VERSION = f"rp4bp {__version__}"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


# ---------------------------------------------------------------------------
# configuration

_SECTION_KEYS = {
    "params": {"mu", "delta", "epsilon", "q"},
    "integrator": {f.name for f in fields(IntegratorConfig)},
    "periodic": {"n_samples", "epsilon0", "direct_check"},
    "infinity": {"Psi_min", "harmonics", "far_field_switch", "x_init"},
    "chains": {"legs", "iota_base", "window"},
}
_TOP_KEYS = set(_SECTION_KEYS) | {"output_dir", "seed"}


@dataclass
class RunConfig:
    """Validated run configuration.

    The JSON file has the sections ``params``, ``integrator``, ``periodic``,
    ``infinity`` and ``chains`` plus ``output_dir`` and ``seed``; unknown keys
    are rejected.
    """

    params: SystemParams = field(default_factory=SystemParams)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    periodic: dict = field(default_factory=dict)
    infinity: dict = field(default_factory=dict)
    chains: dict = field(default_factory=dict)
    output_dir: str = "rp4bp_out"
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        for sec, keys in _SECTION_KEYS.items():
            sub = d.get(sec, {})
            if not isinstance(sub, dict):
                raise ConfigError(f"section {sec!r} must be an object")
            bad = set(sub) - keys
            if bad:
                raise ConfigError(f"unknown keys in {sec!r}: {sorted(bad)}")
        try:
            params = SystemParams(**d.get("params", {}))
            integ = IntegratorConfig(**d.get("integrator", {}))
        except (DomainError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        cfg = cls(params, integ, dict(d.get("periodic", {})), dict(d.get("infinity", {})),
                  dict(d.get("chains", {})), str(d.get("output_dir", "rp4bp_out")), seed)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        return cls.from_dict(d)

    def validate(self):
        inf, ch, per = self.infinity, self.chains, self.periodic
        if inf.get("Psi_min", 1.0) <= 0 or inf.get("far_field_switch", 1.0) <= 0:
            raise ConfigError("infinity radii must be positive")
        if int(inf.get("harmonics", 1)) < 1:
            raise ConfigError("harmonics must be at least 1")
        if not 0 < inf.get("x_init", 1e-2) < 1:
            raise ConfigError("x_init must lie in (0, 1)")
        if int(ch.get("legs", 1)) < 1 or ch.get("iota_base", 1.0) <= 0:
            raise ConfigError("chains need legs >= 1 and a positive iota_base")
        w = ch.get("window")
        if w is not None and not (len(w) == 2 and 0 < w[0] < w[1]):
            raise ConfigError("window must be [low, high] with 0 < low < high")
        if int(per.get("n_samples", 8)) < 4:
            raise ConfigError("n_samples must be at least 4")

    def to_dict(self):
        p, i = self.params, self.integrator
        return dict(params=dict(mu=p.mu, delta=p.delta, epsilon=p.epsilon, q=p.q),
                    integrator={f.name: getattr(i, f.name) for f in fields(i)},
                    periodic=self.periodic, infinity=self.infinity, chains=self.chains,
                    seed=self.seed)

    def digest(self, extra=None):
        """SHA-256 of the canonical configuration plus command arguments."""
        payload = dict(self.to_dict(), command=extra or {})
        text = json.dumps(payload, sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# output helpers


class Output:
    """Writes files into the output directory with provenance metadata."""

    def __init__(self, directory, config_hash):
        self.dir = directory
        self.meta = {"config_hash": config_hash, "version": VERSION}
        os.makedirs(directory, exist_ok=True)

    def path(self, name):
        return os.path.join(self.dir, name)

    def json(self, name, data):
        d = dict(data)
        d["metadata"] = dict(d.get("metadata", {}), **self.meta)
        with open(self.path(name), "w") as fh:
            json.dump(_plain(d), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return self.path(name)


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(w) for w in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


# ---------------------------------------------------------------------------
# subcommands


def cmd_transform(cfg, args, out):
    from .transforms import (TRANSFORM_NAMES, TransformDescriptor, apply, state_difference,
                             symplectic_residual)
    names = args.chain.split(",")
    for n in names:
        if n not in TRANSFORM_NAMES:
            raise ConfigError(f"unknown transform {n!r}; choose from {TRANSFORM_NAMES}")
    descs = [TransformDescriptor(n, cfg.params) for n in names]
    if args.inverse:
        descs = descs[::-1]
    chart = descs[0].target if args.inverse else descs[0].source
    z = _floats(args.state)
    if len(z) != chart.dim:
        raise ConfigError(f"chart {chart.value} needs {chart.dim} coordinates")
    state = ChartState(chart, z)
    steps = []
    for d in descs:
        direction = "inverse" if args.inverse else "forward"
        new = apply(d, state, direction)
        rec = dict(name=d.name, direction=direction, chart=new.chart.value,
                   state=new.coords.tolist())
        if args.verify:
            src = new if args.inverse else state
            back = apply(d, apply(d, src), "inverse")
            rec["round_trip"] = float(np.abs(state_difference(back, src)).max())
            rec["symplectic_residual"] = symplectic_residual(d, src)
        steps.append(rec)
        state = new
    path = out.json("transform.json", dict(input=z, steps=steps))
    print(path)


def cmd_integrate(cfg, args, out):
    from .core_model import system_chart
    from .integrate import integrate
    chart = system_chart(args.system)
    z = _floats(args.state)
    if len(z) != chart.dim:
        raise ConfigError(f"system {args.system} needs {chart.dim} coordinates")
    tr = integrate(cfg.params, ChartState(chart, z), args.system, (args.t0, args.t1),
                   cfg.integrator)
    path = out.path(f"trajectory_{args.system}.csv")
    tr.to_csv(path, dict(out.meta, system=args.system, chart=chart.value))
    print(path)


def cmd_periodic(cfg, args, out):
    from .core_model import EnergyLevel
    from .periodic import PeriodicOrbitRecord, assemble_orbit, find_fixed_point, tune_epsilon
    branch = parse_branch(args.branch)
    p = cfg.params
    per = cfg.periodic
    key = hashlib.sha256(json.dumps(dict(cfg.to_dict(), branch=branch, tune=args.tune),
                                    sort_keys=True).encode()).hexdigest()[:16]
    name = f"periodic_{key}.json"
    if os.path.exists(out.path(name)) and not args.force:
        PeriodicOrbitRecord.from_json(out.path(name))
        print(out.path(name))
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if args.tune:
            tr = tune_epsilon(p, branch, epsilon0=per.get("epsilon0", DEFAULTS["epsilon0"]))
            p, fp = p.replace(epsilon=tr.epsilon), tr.fixed_point
        else:
            fp = find_fixed_point(p, EnergyLevel.truncated(p.epsilon, branch))
        rec = assemble_orbit(p, fp, branch, int(per.get("n_samples", 128)),
                             bool(per.get("direct_check", False)),
                             rtol=cfg.integrator.rel_tol)
    d = json.loads(rec.to_json())
    d["diagnostics"] = _plain(rec.diagnostics)
    print(out.json(name, d))


def _infinity_opts(cfg):
    inf = cfg.infinity
    return dict(harmonics=int(inf.get("harmonics", DEFAULTS["harmonics"])),
                psi_min=float(inf.get("Psi_min", DEFAULTS["Psi_min"])))


def cmd_melnikov(cfg, args, out):
    from .integrate import write_csv
    from .infinity import (f_asymptotic, melnikov_critical_points, melnikov_L0,
                           melnikov_sweep, scattering_shift)
    p = cfg.params
    opts = _infinity_opts(cfg)
    if args.sweep == "sigma":
        base = p.q * args.s0 - args.psi0
        # anchored at the reduced phase 0 so the symmetric phases are grid points
        sig = base + 2.0 * math.pi * np.arange(args.n) / args.n
        sig = np.mod(sig, 2.0 * math.pi)
        sig.sort()
        sw = melnikov_sweep(p, args.psi0, args.Psi0, args.s0, sig, **opts)
        cp = melnikov_critical_points(p, args.psi0, args.Psi0, args.s0, opts["harmonics"],
                                      psi_min=opts["psi_min"])
        meta = dict(out.meta, Psi0=args.Psi0, psi0=args.psi0, s0=args.s0,
                    sigma_minus=repr(cp.sigma_minus), sigma_plus=repr(cp.sigma_plus),
                    log_scale=repr(sw["log_scale"]))
        rows = np.column_stack([sw["sigma"], sw["value"], sw["scaled_derivative"],
                                sw["quadrature_error"], sw["tail_bound"]])
        path = out.path("melnikov_sigma.csv")
        write_csv(path, ["sigma", "value", "scaled_derivative", "quadrature_error",
                         "tail_bound"], rows, meta)
    else:
        lo, hi = args.Psi_range
        Ps = np.linspace(lo, hi, args.n)
        rows = []
        for P in Ps:
            ev = melnikov_L0(p, args.psi0, P, args.s0, 0.0, **opts)
            f, ferr = scattering_shift(p.mu, P, -1, 1.0 + p.delta, **opts)
            rows.append([P, ev.value, ev.quadrature_error, f, float(f_asymptotic(p.mu, P)),
                         ferr])
        path = out.path("melnikov_Psi.csv")
        write_csv(path, ["Psi", "value", "quadrature_error", "f_numeric", "f_asymptotic",
                         "f_error"], rows, dict(out.meta, psi0=args.psi0, s0=args.s0))
    print(path)


def cmd_scattering(cfg, args, out):
    from .infinity import scattering_model
    lo, hi = args.Psi_range
    m = scattering_model(cfg.params, np.linspace(lo, hi, args.n), args.branch,
                         **_infinity_opts(cfg))
    path = out.path("scattering.csv")
    m.to_csv(path, out.meta)
    print(path)


def _chain(cfg, args):
    from .chains import build_chain
    from .infinity import scattering_model
    ch = cfg.chains
    window = args.window or ch.get("window") or (9.0, 11.0)
    legs = args.legs or int(ch.get("legs", 3))
    opts = _infinity_opts(cfg)
    model = scattering_model(cfg.params, np.linspace(window[0], window[1], 9), -1, **opts)
    chain = build_chain(cfg.params, model, (args.psi0, args.Psi0), legs, bounds=tuple(window),
                        x_init=float(cfg.infinity.get("x_init", 1e-2)), config=cfg.integrator,
                        far_field=float(cfg.infinity.get("far_field_switch",
                                                         DEFAULTS["far_field_switch"])),
                        harmonics=opts["harmonics"])
    if chain.failures:
        raise ModelError(f"witness search failed: {chain.failures}")
    return chain


def cmd_chain(cfg, args, out):
    chain = _chain(cfg, args)
    print(out.json("chain.json", chain.to_dict()))


def cmd_shadow(cfg, args, out):
    from .chains import default_iotas, shadow_demo
    chain = _chain(cfg, args)
    base = float(cfg.chains.get("iota_base", DEFAULTS["iota_base"]))
    rep = shadow_demo(cfg.params, chain, iota=default_iotas(chain.legs, base),
                      config=cfg.integrator,
                      far_field=float(cfg.infinity.get("far_field_switch",
                                                       DEFAULTS["far_field_switch"])))
    out.json("chain.json", chain.to_dict())
    print(out.json("shadow.json", rep.to_dict()))
    path = out.path("shadow_excursion.csv")
    rep.series_to_csv(path, out.meta)
    print(path)


def cmd_verify(cfg, args, out):
    from .acceptance import CHECKS
    wanted = set(range(1, len(CHECKS) + 1))
    if args.only:
        wanted = {int(v) for v in args.only.split(",")}
        if not wanted <= set(range(1, len(CHECKS) + 1)):
            raise ConfigError("criteria are numbered 1 to 9")
    results = []
    for i, fn in enumerate(CHECKS, start=1):
        if i in wanted:
            r = fn()
            print(r.line(), flush=True)
            results.append(r)
    ok = all(r.passed for r in results)
    out.json("verify.json", dict(passed=ok, criteria=[
        dict(number=r.number, name=r.name, passed=r.passed, summary=r.summary)
        for r in results]))
    print("verify:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {
    "transform": cmd_transform,
    "integrate": cmd_integrate,
    "periodic": cmd_periodic,
    "melnikov": cmd_melnikov,
    "scattering": cmd_scattering,
    "chain": cmd_chain,
    "shadow": cmd_shadow,
    "verify": cmd_verify,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--output-dir", help=f"output directory (overrides ${OUTPUT_ENV})")
    common.add_argument("--seed", type=int)
    common.add_argument("--mu", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--q", type=int)

    ap = _Parser(prog="rp4bp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=VERSION)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("transform", parents=[common], help="apply a transform chain")
    s.add_argument("--chain", required=True, help="comma-separated transform names")
    s.add_argument("--state", required=True, help="comma-separated coordinates")
    s.add_argument("--inverse", action="store_true")
    s.add_argument("--verify", action="store_true",
                   help="report round-trip and symplectic residuals")

    s = sub.add_parser("integrate", parents=[common], help="trajectory to CSV")
    s.add_argument("--system", required=True)
    s.add_argument("--state", required=True)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--t1", type=float, required=True)

    s = sub.add_parser("periodic", parents=[common], help="comet periodic orbit record")
    s.add_argument("--branch", default="plus")
    s.add_argument("--no-tune", dest="tune", action="store_false",
                   help="keep epsilon instead of tuning it to the resonance")
    s.add_argument("--force", action="store_true", help="recompute a cached record")

    s = sub.add_parser("melnikov", parents=[common], help="Melnikov potential sweeps")
    s.add_argument("--sweep", choices=("sigma", "Psi"), default="sigma")
    s.add_argument("--Psi0", type=float, default=10.0)
    s.add_argument("--psi0", type=float, default=0.0)
    s.add_argument("--s0", type=float, default=0.0)
    s.add_argument("--n", type=int, default=360)
    s.add_argument("--Psi-range", type=float, nargs=2, default=(5.0, 20.0))

    s = sub.add_parser("scattering", parents=[common], help="scattering map model")
    s.add_argument("--Psi-range", type=float, nargs=2, default=(5.0, 20.0))
    s.add_argument("--n", type=int, default=31)
    s.add_argument("--branch", default="minus")

    for name, hlp in (("chain", "transition chain"), ("shadow", "shadowing experiment")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--Psi0", type=float, default=10.0)
        s.add_argument("--psi0", type=float, default=0.0)
        s.add_argument("--legs", type=int)
        s.add_argument("--window", type=float, nargs=2)

    s = sub.add_parser("verify", parents=[common], help="run the acceptance criteria")
    s.add_argument("--only", help="comma-separated criterion numbers")
    return ap


def resolve_config(args):
    """Configuration file, then command-line overrides, then output directory."""
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    over = {k: getattr(args, k) for k in ("mu", "delta", "epsilon", "q")
            if getattr(args, k) is not None}
    if over:
        try:
            cfg.params = cfg.params.replace(**over)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be non-negative")
        cfg.seed = args.seed
    cfg.output_dir = args.output_dir or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    return cfg


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    # options that do not change results stay out of the hash
    cmd_args = {k: v for k, v in vars(args).items()
                if k not in ("config", "output_dir", "seed", "mu", "delta", "epsilon", "q",
                             "force")}
    try:
        cfg = resolve_config(args)
        np.random.seed(cfg.seed)
        out = Output(cfg.output_dir, cfg.digest(cmd_args))
        code = COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"rp4bp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"rp4bp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
