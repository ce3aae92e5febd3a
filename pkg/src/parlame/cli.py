"""Batch command-line frontend.

Subcommands: ``config init``, ``gen``, ``basis``, ``reconstruct``,
``verify``, ``sweep``.  All numeric outputs are CSV tables or npz bundles
written under --out; identical config and seed give byte-identical files.
Exit codes: 0 ok, 1 validation problem, 2 numeric gate failure, 3 I/O.
"""

from __future__ import annotations

import argparse
import os
import sys


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))
    # heavy imports after the thread environment is pinned
    from .errors import ParlameError, ConfigurationError, InvariantViolation
    try:
        return args.func(args)
    except (ConfigurationError, InvariantViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except ParlameError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


def _build_parser():
    p = argparse.ArgumentParser(
        prog="parlame",
        description="Lateral Cauchy problem studies for the parabolic "
                    "Lame system")
    p.add_argument("--threads", type=int, default=0,
                   help="pin BLAS/numba thread count")
    sub = p.add_subparsers(dest="command", required=True)

    cfg = sub.add_parser("config", help="configuration utilities")
    cfg_sub = cfg.add_subparsers(dest="config_command", required=True)
    cfg_init = cfg_sub.add_parser("init", help="write the default config")
    cfg_init.add_argument("--out", default="parlame.yaml")
    cfg_init.set_defaults(func=cmd_config_init)

    def common(sp):
        sp.add_argument("--config", default=None, help="YAML config path")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--out", default="out", help="output directory")

    gen = sub.add_parser("gen", help="generate synthetic Cauchy data")
    common(gen)
    gen.set_defaults(func=cmd_gen)

    bas = sub.add_parser("basis", help="build the doubly orthogonal basis")
    common(bas)
    bas.set_defaults(func=cmd_basis)

    rec = sub.add_parser("reconstruct",
                         help="reconstruct from data with a basis")
    common(rec)
    rec.add_argument("--basis", default=None,
                     help="basis bundle (default: <out>/basis.npz)")
    rec.set_defaults(func=cmd_reconstruct)

    ver = sub.add_parser("verify", help="run the gated invariant checks")
    common(ver)
    ver.set_defaults(func=cmd_verify)

    sw = sub.add_parser("sweep", help="noise x truncation error study")
    common(sw)
    sw.add_argument("--noise", default="0,0.01",
                    help="comma-separated relative noise levels")
    sw.set_defaults(func=cmd_sweep)
    return p


def _setup(args):
    from . import config as cf
    cfg = cf.load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = int(args.seed)
    os.makedirs(args.out, exist_ok=True)
    return cfg


def _make_geometry(cfg):
    from . import carleman as ca
    from . import config as cf
    params = cf.material_params(cfg)
    geo = cfg["geometry"]
    spec = cf.quad_spec(cfg["quadrature"])
    if geo["kind"] == "interval":
        return ca.interval_geometry(params, t_end=geo["t_end"],
                                    cap_length=geo["cap_length"], spec=spec)
    small = cf.quad_spec(cfg["small_quadrature"])
    return ca.reference_geometry(
        params, t_end=geo["t_end"],
        gamma_half_width=geo["gamma_half_width"],
        cap_height=geo["cap_height"],
        omega_radius_factor=geo["omega_radius_factor"],
        blend_width_frac=geo["blend_width_frac"],
        spec=spec, small_spec=small)


def _make_problem(cfg, geom, noise=None, seed=None):
    from . import carleman as ca
    from .dictionary import SourcePoint
    truth = cfg["truth"]
    sources = [SourcePoint(y=tuple(s["y"]), tau=float(s["tau"]),
                           column=int(s["column"]))
               for s in truth["sources"]]
    return ca.make_synthetic_problem(
        geom, sources=sources, source_weights=truth["weights"],
        noise_level=cfg["noise"]["level"] if noise is None else noise,
        seed=cfg["seed"] if seed is None else seed)


def _make_dictionary(cfg, geom):
    from .dictionary import make_mixed_dictionary
    d = cfg["dictionary"]
    return make_mixed_dictionary(
        geom.d_cyl, geom.params, d["count"],
        ring_radius_factor=d["ring_radius_factor"],
        near_radius_factor=d["near_radius_factor"],
        near_fraction=d["near_fraction"],
        time_offset=d["time_offset"],
        pre_initial_every=d["pre_initial_every"],
        avoid_arcs=_cap_arc(cfg))


def _cap_arc(cfg):
    if cfg["geometry"]["kind"] == "interval":
        return None
    g = cfg["geometry"]["gamma_half_width"]
    return (-1.35 * g, 1.35 * g)


def _evaluation_grid(cfg, geom):
    import numpy as np
    ev = cfg["evaluation"]
    base = geom.omega_cyl.base
    if geom.params.dim == 1:
        xs = np.linspace(base.a + 0.02, base.b - 0.02, ev["grid_angular"])
        pts = xs[:, None]
    else:
        ang = np.linspace(0, 2 * np.pi, ev["grid_angular"], endpoint=False)
        rad = (np.arange(1, ev["grid_radial"] + 1) - 0.5) \
            / ev["grid_radial"] * ev["max_radius_frac"]
        A, R = np.meshgrid(ang, rad)
        pts = np.column_stack([(R * np.cos(A)).ravel(),
                               (R * np.sin(A)).ravel()])
    times = np.linspace(geom.omega_cyl.t_start, geom.omega_cyl.t_end,
                        ev["grid_times"] + 1)[1:]
    X = np.repeat(pts, len(times), axis=0)
    T = np.tile(times, len(pts))
    return X, T


def cmd_config_init(args):
    from . import config as cf
    cf.save_config(args.out, cf.default_config())
    print(f"wrote defaults to {args.out}")
    return 0


def cmd_gen(args):
    import numpy as np
    from . import io as pio
    cfg = _setup(args)
    geom = _make_geometry(cfg)
    prob = _make_problem(cfg, geom)
    rules = geom.omega_rules
    nb, nt = len(rules.boundary.params), rules.time.n_nodes
    theta = np.repeat(rules.boundary.params, nt)
    tt = np.tile(rules.time.nodes, nb)
    meta = {"config_hash": pio.config_hash(cfg), "seed": cfg["seed"],
            "noise_level": cfg["noise"]["level"]}
    dim = geom.params.dim
    cols = {"theta": theta, "t": tt}
    for d in range(dim):
        cols[f"u1_{d}"] = prob.data.u1[:, :, d].ravel()
        cols[f"u2_{d}"] = prob.data.u2[:, :, d].ravel()
    pio.save_table(os.path.join(args.out, "cauchy_data.csv"), cols, meta)

    X, T = _evaluation_grid(cfg, geom)
    tru = prob.truth_values(X, T)
    gcols = {"t": T}
    for d in range(dim):
        gcols[f"x{d}"] = X[:, d]
    for d in range(dim):
        gcols[f"u{d}"] = tru[:, d]
    pio.save_table(os.path.join(args.out, "ground_truth.csv"), gcols, meta)
    print(f"wrote cauchy_data.csv and ground_truth.csv to {args.out}")
    return 0


def cmd_basis(args):
    import numpy as np
    from . import dbo as db
    from . import dictionary as dc
    from . import io as pio
    cfg = _setup(args)
    geom = _make_geometry(cfg)
    d = _make_dictionary(cfg, geom)
    g = dc.gram_pair(d, geom.small_rules, geom.d_rules)
    basis = db.build_dbo(g, d, drop_tol=cfg["dbo"]["drop_tol"],
                         sigma_floor_rel=cfg["dbo"]["sigma_floor_rel"])
    path = os.path.join(args.out, "basis.npz")
    pio.save_basis(path, basis, {"config_hash": pio.config_hash(cfg)})
    pio.save_table(os.path.join(args.out, "sigma_decay.csv"),
                   {"index": np.arange(1, basis.size + 1,
                                       dtype=float),
                    "sigma": basis.sigma,
                    "log10_sigma": np.log10(basis.sigma)},
                   {"config_hash": pio.config_hash(cfg)})
    rep = basis.cond_report
    print(f"basis size {basis.size} "
          f"(dropped {rep['n_dropped_whitening']} whitening, "
          f"{rep['n_dropped_sigma']} spectrum); "
          f"orthonormality defect {rep['a_orthonormality_defect']:.2e}")
    print(f"wrote basis.npz and sigma_decay.csv to {args.out}")
    return 0


def cmd_reconstruct(args):
    import numpy as np
    from . import carleman as ca
    from . import io as pio
    cfg = _setup(args)
    geom = _make_geometry(cfg)
    prob = _make_problem(cfg, geom)
    basis_path = args.basis or os.path.join(args.out, "basis.npz")
    basis, _ = pio.load_basis(basis_path)
    tr = cfg["truncation"]
    rule = (tr["rule"], tr["n_fixed"] if tr["rule"] == "fixed"
            else tr["delta"])
    recon = ca.reconstruct(prob.data, basis, geom.small_rules, geom.params,
                           truncation=rule, blend_width=geom.blend_width,
                           singular_split=cfg["quadrature"]["singular_split"],
                           collocation_offset=tr["collocation_offset"],
                           morozov_tau=tr["morozov_tau"])
    X, T = _evaluation_grid(cfg, geom)
    u_rec = recon.evaluate(X, T)
    tru = prob.truth_values(X, T)
    meta = {"config_hash": pio.config_hash(cfg), "seed": cfg["seed"],
            "basis_hash": pio.config_hash(basis.cond_report),
            "noise_level": cfg["noise"]["level"],
            "truncation": list(map(str, rule)), "n_star": recon.n_star}
    dim = geom.params.dim
    cols = {"t": T}
    for d in range(dim):
        cols[f"x{d}"] = X[:, d]
    for d in range(dim):
        cols[f"u_rec{d}"] = u_rec[:, d]
    for d in range(dim):
        cols[f"u_true{d}"] = tru[:, d]
    pio.save_table(os.path.join(args.out, "reconstruction.csv"), cols, meta)

    diag = recon.diagnostics
    n_values = diag["n_values"].astype(float)
    tail = diag["tail_energy"]
    un = float(np.sqrt(np.mean(tru ** 2)))
    ft = recon.f_tilde(X, T)
    from .dbo import basis_stack
    bs = basis_stack(basis, X, T)["val"]
    errs = np.array([
        float(np.sqrt(np.mean((ft - np.einsum("nrd,r->nd", bs[:, :n, :],
                                              recon.c[:n]) - tru) ** 2)) / un)
        for n in diag["n_values"]])
    pio.save_table(os.path.join(args.out, "error_curve.csv"),
                   {"N": n_values, "tail_energy": tail,
                    "gamma_residual": diag["gamma_residuals"],
                    "interior_l2_error": errs}, meta)
    print(f"n_star={recon.n_star}; best interior error "
          f"{errs.min():.4f} at N={int(n_values[np.argmin(errs)])}")
    print(f"wrote reconstruction.csv and error_curve.csv to {args.out}")
    return 0


def cmd_verify(args):
    from . import carleman as ca
    from . import dbo as db
    from . import dictionary as dc
    from . import verify as vf
    cfg = _setup(args)
    params = _make_geometry(cfg).params
    rows = vf.kernel_checks(params)
    rows += vf.green_checks()
    geom = _make_geometry(cfg)
    d = _make_dictionary(cfg, geom)
    g = dc.gram_pair(d, geom.small_rules, geom.d_rules)
    basis = db.build_dbo(g, d, drop_tol=cfg["dbo"]["drop_tol"],
                         sigma_floor_rel=cfg["dbo"]["sigma_floor_rel"])
    rows += vf.dbo_checks(basis, g)
    prob = _make_problem(cfg, geom, noise=0.0)
    rows.append(vf.equivalence_check(geom, basis, prob))
    width = max(len(r["name"]) for r in rows)
    failures = 0
    for r in rows:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status}  {r['name']:<{width}}  tol={r['tolerance']:.2e}  "
              f"achieved={r['achieved']:.3e}")
        failures += not r["passed"]
    if failures:
        print(f"{failures} gate(s) failed")
        return 2
    print("all gates passed")
    return 0


def cmd_sweep(args):
    import numpy as np
    from . import carleman as ca
    from . import dbo as db
    from . import dictionary as dc
    from . import io as pio
    from .dbo import basis_stack
    cfg = _setup(args)
    geom = _make_geometry(cfg)
    d = _make_dictionary(cfg, geom)
    g = dc.gram_pair(d, geom.small_rules, geom.d_rules)
    basis = db.build_dbo(g, d, drop_tol=cfg["dbo"]["drop_tol"],
                         sigma_floor_rel=cfg["dbo"]["sigma_floor_rel"])
    X, T = _evaluation_grid(cfg, geom)
    levels = [float(x) for x in args.noise.split(",")]
    rows = {"noise": [], "N": [], "tail_energy": [], "gamma_residual": [],
            "interior_l2_error": []}
    for eps in levels:
        prob = _make_problem(cfg, geom, noise=eps)
        recon = ca.reconstruct(prob.data, basis, geom.small_rules,
                               geom.params, truncation=("fixed", 0),
                               blend_width=geom.blend_width)
        tru = prob.truth_values(X, T)
        un = float(np.sqrt(np.mean(tru ** 2)))
        ft = recon.f_tilde(X, T)
        bs = basis_stack(basis, X, T)["val"]
        diag = recon.diagnostics
        for j, n in enumerate(diag["n_values"]):
            err = float(np.sqrt(np.mean(
                (ft - np.einsum("nrd,r->nd", bs[:, :n, :], recon.c[:n])
                 - tru) ** 2)) / un)
            rows["noise"].append(eps)
            rows["N"].append(float(n))
            rows["tail_energy"].append(diag["tail_energy"][j])
            rows["gamma_residual"].append(diag["gamma_residuals"][j])
            rows["interior_l2_error"].append(err)
    pio.save_table(os.path.join(args.out, "sweep.csv"), rows,
                   {"config_hash": pio.config_hash(cfg), "seed": cfg["seed"],
                    "noise_levels": levels})
    print(f"wrote sweep.csv to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
