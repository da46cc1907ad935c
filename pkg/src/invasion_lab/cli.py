"""Command-line front end.

Exit codes: 0 on success (and on a matching expectation), 1 on any error,
2 when the verdict differs from the expected kind.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InvasionLabError
from .io import config_hash, load_config, write_csv, write_json, write_run

EXIT_OK, EXIT_ERROR, EXIT_MISMATCH = 0, 1, 2


def _reaction_arg(text):
    """Inline JSON table, a path to one, or a bare tag."""
    from .reaction import reaction_from_config

    if text is None:
        return None
    p = Path(text)
    if p.suffix == ".json" and p.exists():
        cfg = load_config(p)
        cfg = cfg.get("reaction", cfg)
    elif text.lstrip().startswith("{"):
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"column {exc.colno}: {exc.msg}", field="--reaction") from exc
    else:
        cfg = {"tag": text}
    return reaction_from_config(cfg)


def _outdir(args, default):
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args):
    from .scenarios import scenario_from_config

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = {**cfg, "seed": args.seed}
    sc = scenario_from_config(cfg, resolution_mult=args.resolution)
    if args.expect:
        sc.expected = args.expect
    res = sc.run()
    out = _outdir(args, Path("runs") / f"{sc.name}-{config_hash(cfg)[:10]}")
    write_run(res, out, cfg, __version__, cfg.get("seed"))
    v = res.verdict
    print(f"{sc.name}: {v.label} ({v.reason})")
    if v.speed_right is not None:
        print(f"rightward speed {v.speed_right:.6g} (R^2 {v.r2_right:.4f})")
    for k, val in res.extras.items():
        if np.isscalar(val):
            print(f"{k} = {val:.6g}" if isinstance(val, float) else f"{k} = {val}")
    print(f"artifacts in {out}")
    return EXIT_OK if res.matches else EXIT_MISMATCH


def cmd_subsolution(args):
    from .analysis import build_propdim_profile, verify_propdim
    from .reaction import combustion_plateau

    f = _reaction_arg(args.reaction) or combustion_plateau()
    beta = "auto" if args.beta is None else args.beta
    p = build_propdim_profile(f, args.lam, args.Lam, beta=beta)
    worst = verify_propdim(p, f, args.lam, args.Lam, n_samples=args.samples)
    print(f"H={p.H:.6g} K={p.K:.6g} gamma={p.gamma:.6g} z1={p.z1:.6g} delta={p.delta:.6g} "
          f"beta={p.beta:g} mu={p.mu:.6g} L={p.L:.6g}")
    print(f"relation residuals {np.array2string(p.relations(), precision=3)}")
    print(f"worst residual {worst:.3e}")
    if args.out:
        out = _outdir(args, args.out)
        z = np.linspace(-0.1 * p.L, 1.1 * p.L, 2001)
        write_csv(out / "profile.csv", {"z": z, "h": p(z)})
        write_json(out / "profile.json", {**p.to_dict(), "worst_residual": worst})
    return EXIT_OK if worst >= -1e-8 else EXIT_MISMATCH


def cmd_speed(args):
    from .scenarios import scenario_from_config, scenario_speed_bound

    if args.config:
        cfg = load_config(args.config)
        sc = scenario_from_config(cfg, resolution_mult=args.resolution)
    else:
        cfg = {"scenario": "speed_bound"}
        sc = scenario_speed_bound(f=_reaction_arg(args.reaction))
    res = sc.run()
    ex = res.extras
    if "min_speed" in ex:
        print(f"minimal ray speed {ex['min_speed']:.6g}, bound w* = {ex['w_star']:.6g}, "
              f"ratio {ex['ratio']:.4f}")
    elif res.verdict.speed_right is not None:
        print(f"rightward speed {res.verdict.speed_right:.6g} (R^2 {res.verdict.r2_right:.4f})")
    if args.out:
        write_run(res, _outdir(args, args.out), cfg, __version__, args.seed)
    if "ratio" in ex and ex["ratio"] < 0.95:
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_energy(args):
    from .geometry import PeriodSpec, RectHole, build_lattice_domain
    from .reaction import cubic
    from .stationary import minimize_energy

    cfg = load_config(args.config) if args.config else {}
    f = _reaction_arg(json.dumps(cfg["reaction"])) if "reaction" in cfg else cubic(0.25)
    L = float(cfg.get("period", 24.0))
    res = int(round(cfg.get("resolution", 8) * args.resolution))
    hole = RectHole(*cfg["hole"]) if "hole" in cfg else None
    mask = build_lattice_domain(hole, PeriodSpec((L, L), res))
    r = float(cfg.get("r", 10.0))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    rep = minimize_energy(mask, r, 1.0, f, iters=int(cfg.get("iters", 20000)), seed=seed, strict=False)
    print(f"r={r:g}: energy {rep.energy:.6g}, max {rep.max_value:.6g}, "
          f"{'trivial' if rep.trivial else 'nontrivial'} minimizer")
    if args.out:
        out = _outdir(args, args.out)
        write_json(out / "energy.json", {**rep.to_dict(), "seed": seed})
    return EXIT_OK


def cmd_front(args):
    from .reaction import cubic
    from .stationary import front_profile_1d

    f = _reaction_arg(args.reaction) or cubic(0.25)
    fp = front_profile_1d(f, tol=args.tol)
    print(f"front speed c = {fp.c:.10g}")
    if args.out:
        out = _outdir(args, args.out)
        write_csv(out / "front.csv", {"z": fp.z, "phi": fp.phi})
        write_json(out / "front.json", {"c": fp.c, "reaction": f.to_dict()})
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="invasion-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"invasion-lab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="RNG seed (unsigned 64 bit)")
        p.add_argument("--resolution", type=float, default=1.0, help="resolution multiplier")
        p.add_argument("--expect", help="expected verdict kind, e.g. Invasion or Blocking+Persistence")

    p = sub.add_parser("run", help="run a scenario config")
    common(p, config_required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("subsolution", help="build and check the monotone speed-bound profile")
    common(p)
    p.add_argument("--reaction", help="reaction: tag, inline JSON or JSON file")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--Lam", type=float, default=1.0)
    p.add_argument("--beta", type=float)
    p.add_argument("--samples", type=int, default=10000)
    p.set_defaults(func=cmd_subsolution)

    p = sub.add_parser("speed", help="measure a spreading speed against the explicit bound")
    common(p)
    p.add_argument("--reaction")
    p.set_defaults(func=cmd_speed)

    p = sub.add_parser("energy", help="minimize the truncated energy on a ball")
    common(p)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("front", help="one-dimensional front speed and profile")
    common(p)
    p.add_argument("--reaction")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_front)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (ConfigError, InvasionLabError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
