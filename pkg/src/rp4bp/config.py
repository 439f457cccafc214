"""Default numerical settings shared by the modules and the CLI."""

DEFAULTS = {
    # integration
    "rel_tol": 1e-12,
    "abs_tol": 1e-12,
    "max_step": 0.0,  # 0 means unbounded
    "event_tol": 1e-12,
    "qp_switch": 0.05,
    # model
    "collision_floor": 1e-8,
    "domain_C": 2.0,
    "delta1": 1.0,
    # periodic orbits
    "fd_step": 1e-7,
    "newton_tol": 1e-12,
    "newton_max_iter": 30,
    "epsilon0": 0.16,
    "epsilon_bracket": (0.09, 0.15),
    # infinity
    "Psi_min": 5.0,
    "tau_max": 60.0,
    "far_field_switch": 300.0,
    "harmonics": 8,
    # chains
    "iota_base": 1e-2,
}

CONFIG_KEYS = frozenset(DEFAULTS)
