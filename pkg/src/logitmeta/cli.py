"""Command-line interface.

Games are named either by a game-spec JSON file or by ``family:key=value,...``
(for example ``curie_weiss:n=4``).  Subsets are comma-separated profile
indices.  Exit codes: 0 success, 2 input error, 3 cap error, 4 a bound
violation was found (or a numerical routine failed).
"""

import argparse
import csv
import io
import math
import os
import sys
import time

import numpy as np

from . import __version__, chain as chain_mod, convergence, exprs, partition, serialize, sim, spectral, zoo
from .errors import CapError, InputError, LimitReached, NumericalError
from .game import SubsetMask, game_from_dict, lipschitz_delta, load_game, verify_potential
from .kernels import BACKEND

SEED_ENV = "METASTAB_SEED"


# ---------------------------------------------------------------------------
# argument helpers


def _value(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if "/" in text:
        return tuple(int(v) for v in text.split("/"))
    return text


def parse_params(items):
    out = {}
    for item in items:
        for part in filter(None, item.split(",")):
            key, sep, val = part.partition("=")
            if not sep:
                raise InputError(f"parameter {part!r} must look like key=value")
            out[key.strip()] = _value(val.strip())
    return out


def resolve_game(text):
    """A game-spec file path, or ``family[:k=v,...]``."""
    if os.path.exists(text):
        return load_game(text)
    family, _, rest = text.partition(":")
    if family not in zoo.FAMILIES:
        raise InputError(f"unknown family {family!r}; valid families: {', '.join(zoo.FAMILIES)}")
    return zoo.make_game(family, **parse_params([rest] if rest else []))


def parse_subset(g, text):
    try:
        members = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"subset {text!r} must be comma-separated profile indices") from None
    if not members:
        raise InputError("subset is empty")
    for v in members:
        g.index._check(v)
    return SubsetMask.from_indices(g.size, members)


def parse_profile(g, text):
    """A profile index, or per-player strategies separated by '-' (e.g. 0-1-1)."""
    try:
        if "-" in text:
            return g.index.encode([int(v) for v in text.split("-")])
        return g.index._check(int(text))
    except ValueError:
        raise InputError(f"malformed start profile {text!r}") from None


def parse_range(text):
    lo, sep, hi = text.partition("..")
    try:
        lo, hi = int(lo), int(hi if sep else lo)
    except ValueError:
        raise InputError(f"n-range {text!r} must look like a..b") from None
    if hi < lo:
        raise InputError(f"n-range {text!r} is empty")
    return list(range(lo, hi + 1))


def resolve_seed(flag):
    if flag is not None:
        return int(flag)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"{SEED_ENV} must be an integer") from None
    return 0


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


# ---------------------------------------------------------------------------
# reports


class Report:
    def __init__(self, command, flags, game=None):
        flags = {k: v for k, v in flags.items() if not callable(v)}
        self.meta = {"tool": "logitmeta", "version": __version__, "command": command,
                     "flags": _jsonable(flags), "backend": BACKEND, "timings": {}}
        self.game = None
        if game is not None:
            self.game = {"fingerprint": game.fingerprint(), "name": game.name,
                         "params": _jsonable(dict(game.params)), "size": game.size, "n": game.n}
        self.sections = []
        self.violations = 0

    def section(self, name, fn):
        t0 = time.perf_counter()
        try:
            payload = fn()
        except LimitReached as exc:
            payload = {"limit_reached": str(exc), "lower_bound": exc.lower_bound}
        self.meta["timings"][name] = time.perf_counter() - t0
        self.sections.append({"name": name, "payload": _jsonable(payload)})
        return payload

    def to_dict(self):
        return {"meta": self.meta, "game": self.game, "sections": self.sections}

    def emit(self, out):
        text = serialize.dumps(self.to_dict(), indent=1) + "\n"
        if out:
            serialize.write_atomic(out, text)
        else:
            sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_game(args):
    if args.action == "list":
        for name in zoo.FAMILIES:
            print(name)
        return 0
    if not args.family:
        raise InputError("game describe/export needs a family name")
    params = parse_params(args.params)
    if args.family not in zoo.FAMILIES:
        raise InputError(f"unknown family {args.family!r}; valid families: {', '.join(zoo.FAMILIES)}")
    g = zoo.make_game(args.family, **params)
    check = verify_potential(g)
    if args.action == "describe":
        info = {
            "name": g.name, "params": _jsonable(dict(g.params)), "n": g.n, "size": g.size,
            "strategy_counts": list(g.strategy_counts), "delta": lipschitz_delta(g),
            "potential_min": float(g.potential.min()), "potential_max": float(g.potential.max()),
            "potential_check": {"passed": check.passed, "worst": check.worst},
            "fingerprint": g.fingerprint(),
        }
        sys.stdout.write(serialize.dumps(info, indent=1) + "\n")
        return 0
    if not args.output:
        raise InputError("game export needs -o FILE")
    if not check.passed:
        raise InputError(f"potential check failed (worst violation {check.worst:.3g}); not exported")
    from .game import save_game
    save_game(g, args.output)
    print(g.fingerprint())
    return 0


def _suite_sets(g, chain, limit):
    """Connected subsets used by the bound suite, capped at ``limit``."""
    sets = []
    for k, s in enumerate(chain_mod.connected_subsets(g.index, SubsetMask.full(g.size))):
        if k >= limit:
            break
        if len(s) < g.size:
            sets.append(SubsetMask.from_indices(g.size, s))
    return sets


def cmd_analyze(args):
    g = resolve_game(args.game)
    chain = chain_mod.build_chain(g, args.beta)
    rep = Report("analyze", vars(args), g)
    rep.section("chain", lambda: {
        "beta": chain.beta, "stationarity_residual": chain_mod.stationarity_residual(chain),
        "reversibility_residual": chain_mod.check_reversibility(chain).worst,
        "pi": chain.pi,
    })
    if args.spectrum:
        def spec():
            s = spectral.spectrum(chain)
            return {"eigenvalues": s.eigenvalues.real if np.iscomplexobj(s.eigenvalues) else s.eigenvalues,
                    "lambda_star": s.lam_star, "t_rel": s.t_rel, "lambda2": s.lambda2,
                    "symmetric": s.symmetric, "complex_count": s.complex_count}
        rep.section("spectrum", spec)
    if args.mixing:
        rep.section("mixing", lambda: {"eps": args.eps, "t_mix": convergence.mixing_time(chain, args.eps)})
    if args.bottleneck:
        def bn():
            res = chain_mod.bottleneck_star(chain, mode=args.bottleneck)
            if res is None:
                return {"family": args.bottleneck, "value": None}
            return {"family": res.family, "value": res.value, "subset": res.subset.members(),
                    "pi": res.mass, "candidates": res.candidates}
        rep.section("bottleneck", bn)
    if args.hitting:
        target = parse_subset(g, args.hitting)

        def hit():
            hp = convergence.hitting_profile(chain, target, args.eps)
            return {"target": target.members(), "starts": hp.starts, "grid": hp.grid,
                    "tails": hp.tails, "expected": hp.expected, "eps": hp.eps,
                    "eps_times": hp.eps_times}
        rep.section("hitting", hit)
    if g.has_potential and g.size <= args.suite_cap:
        def suite():
            sets = _suite_sets(g, chain, args.suite_sets)
            r = convergence.verify_bound_suite(chain, sets, mixing=True)
            rep.violations = len(r.violations)
            return {
                "t_mix": r.t_mix, "t_rel": r.t_rel, "subsets": len(sets),
                "checks": {k: {"checked": c.checked, "skipped": c.skipped,
                               "worst_slack": c.worst_slack, "violations": len(c.violations)}
                           for k, c in r.checks.items()},
                "violations": [{"inequality": v.inequality, "subset": list(v.subset), "t": v.t,
                                "x": v.x, "lhs": v.lhs, "rhs": v.rhs} for v in r.violations[:50]],
            }
        rep.section("bound_suite", suite)
    rep.emit(args.output)
    return 4 if rep.violations else 0


def _load_candidate(g, path):
    import json
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        Rs = [SubsetMask.from_indices(g.size, r) for r in d["R"]]
        Ts = [SubsetMask.from_indices(g.size, t) for t in d["T"]]
        N = SubsetMask.from_indices(g.size, d.get("N", []))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot read candidate partition {path}: {exc}") from None
    return Rs, Ts, N


def cmd_partition(args):
    g = resolve_game(args.game)
    beta = exprs.parse(args.beta)(g.n)
    chain = chain_mod.build_chain(g, beta)
    flags = dict(vars(args), beta_value=beta)
    rep = Report("partition", flags, g)
    if args.verify:
        Rs, Ts, N = _load_candidate(g, args.verify)
        res = rep.section("verify", lambda: partition.verify_partition(
            g, beta, Rs, Ts, N, args.p, args.q, args.eps, chain=chain).to_dict())
    else:
        cfg = partition.PQConfig(args.p, args.q, args.eps, family=args.family)
        result = partition.run_A_pq(g, beta, cfg, chain=chain)
        rep.section("partition", result.to_dict)
        if result.blocks:
            Rs = [b.R for b in result.blocks]
            Ts = [b.T for b in result.blocks]
            rep.section("verify", lambda: partition.verify_partition(
                g, beta, Rs, Ts, result.residual, args.p, args.q, args.eps, chain=chain).to_dict())
    rep.emit(args.output)
    return 0


def cmd_sweep(args):
    ns = parse_range(args.n_range)
    pairs = {}
    for item in args.pair or ["default=n**3;exp(0.4*n)"]:
        label, _, body = item.partition("=")
        p, sep, q = body.partition(";")
        if not sep:
            raise InputError(f"pair {item!r} must look like label=P;Q")
        pairs[label] = (p, q)
    subsets = None if args.subsets == "structural" else args.subsets.split(",")
    rows = partition.classification_sweep(args.family, ns, args.beta_rule, pairs, subsets,
                                          parse_params(args.params))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    labels = list(pairs)
    w.writerow(["n", "beta", "subset", "size", "pi", "B"] + [f"class_{k}" for k in labels])
    for r in rows:
        w.writerow([r.n, format(r.beta, ".17g"), r.subset, r.size, format(r.mass, ".17g"),
                    format(r.B, ".17g")] + [r.classes[k] for k in labels])
    if args.output:
        serialize.write_atomic(args.output, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if args.report:
        rep = Report("sweep", vars(args))
        rep.section("table", lambda: [r.to_dict() for r in rows])
        trends = {}
        for name in sorted({r.subset for r in rows}):
            Bs = [r.B for r in rows if r.subset == name]
            d = np.diff(Bs)
            trends[name] = "decreasing" if np.all(d < 0) else "increasing" if np.all(d > 0) else "mixed"
        rep.section("trends", lambda: trends)
        rep.emit(args.report)
    return 0


def cmd_simulate(args):
    g = resolve_game(args.game)
    start = parse_profile(g, args.start)
    seed = resolve_seed(args.seed)
    tracked = [parse_subset(g, t) for t in args.track or []]
    trajs = sim.simulate_many(g, args.beta, [start] * args.trajectories, args.steps, seed,
                              tracked, workers=args.workers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trajectory", "seed", "start", "steps", "final"]
               + [f"first_hit_{k}" for k in range(len(tracked))])
    for tr in trajs:
        w.writerow([tr.index, tr.seed, tr.start, tr.steps, tr.final] + [int(h) for h in tr.first_hit])
    if args.output:
        serialize.write_atomic(args.output, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="logitmeta", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("game", help="list, describe or export zoo games")
    p.add_argument("action", choices=["list", "describe", "export"])
    p.add_argument("family", nargs="?")
    p.add_argument("params", nargs="*", help="key=value parameters")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_game)

    p = sub.add_parser("analyze", help="spectra, mixing, bottlenecks, hitting and the bound suite")
    p.add_argument("game")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--spectrum", action="store_true")
    p.add_argument("--mixing", action="store_true")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--bottleneck", choices=["exhaustive", "connected", "heuristic"])
    p.add_argument("--hitting", metavar="SET", help="target set as profile indices")
    p.add_argument("--suite-cap", type=int, default=256, help="run the bound suite up to this |S|")
    p.add_argument("--suite-sets", type=int, default=2000, help="connected subsets fed to the suite")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("partition", help="run A_{p,q} or verify a candidate partition")
    p.add_argument("game")
    p.add_argument("--beta", required=True, help="number or expression in n, e.g. '3*log(n)'")
    p.add_argument("--p", default="n**3")
    p.add_argument("--q", default="exp(0.4*n)")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--family", default="heuristic", choices=list(partition.FAMILIES))
    p.add_argument("--verify", metavar="FILE", help="JSON with R, T (lists of index lists) and N")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("sweep", help="bottleneck classification table across n")
    p.add_argument("family", choices=list(zoo.FAMILIES))
    p.add_argument("--n-range", required=True, metavar="A..B")
    p.add_argument("--beta-rule", default="1")
    p.add_argument("--subsets", default="structural")
    p.add_argument("--pair", action="append", metavar="LABEL=P;Q")
    p.add_argument("--params", action="append", default=[], metavar="k=v,...")
    p.add_argument("-o", "--output", help="CSV output (stdout by default)")
    p.add_argument("--report", help="JSON report path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo trajectories to CSV")
    p.add_argument("game")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--start", required=True, help="profile index or strategies like 0-1-1")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, help=f"defaults to ${SEED_ENV} or 0")
    p.add_argument("--track", action="append", metavar="SET")
    p.add_argument("--trajectories", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except LimitReached as exc:
        print(f"error: {exc} (lower bound {exc.lower_bound})", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
