"""Command-line front end.

    rangemove solve   --synthetic chain:n=10,l=6,seed=1 --solver gswap
    rangemove solve   --pair left.pgm right.pgm --preset venus --trace t.csv --disparity d.pgm
    rangemove compare --synthetic bimodal:seed=3 --solvers rswap,gswap --out cmp.csv
    rangemove make-instance --synthetic grid:w=4,h=4,l=5 --out g.inst
    rangemove check   --seeds 20

``solve`` prints ``E_g=<value> time_ms=<int> iters=<int>``.  With
``--no-timing`` every time field is written as 0, so repeated runs with the
same arguments produce byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from . import instance as inst_io
from . import stereo, synthetic
from .energy import EnergyModel
from .errors import BudgetExceeded, ContractViolation, NonConvexPriorError, PriorConstructionError, SolverRefused
from .moves import SOLVERS, SolveOptions, SolveTrace, run, solver_name
from .priors import make_prior

_USER_ERRORS = (ContractViolation, SolverRefused, PriorConstructionError, NonConvexPriorError,
                BudgetExceeded, OSError)


class Loaded:
    """A model plus what is needed to write a disparity map for it."""

    def __init__(self, model: EnergyModel, shape=None):
        self.model = model
        self.shape = shape  # (width, height) for image inputs


def _ramp_pair(spec: str) -> stereo.ImagePair:
    kind, _, rest = spec.partition(":")
    if kind.strip().lower() != "ramp":
        raise ContractViolation(f"unknown synthetic pair {kind!r}; only 'ramp' is available")
    p = {"w": 64, "h": 48, "shift": 3}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        if k.strip() not in p:
            raise ContractViolation(f"bad ramp parameter {item!r}")
        p[k.strip()] = int(v)
    return stereo.shifted_ramp_pair(p["w"], p["h"], p["shift"])


def _with_prior(model: EnergyModel, kind: Optional[str], trunc: Optional[int]) -> EnergyModel:
    if kind is None and trunc is None:
        return model
    if model.prior.kind.value == "tab" and kind is None:
        raise ContractViolation("cannot change T of a tabulated prior; pass --prior as well")
    prior = make_prior(kind or model.prior.kind, trunc if trunc is not None else model.prior.trunc,
                       model.label_count)
    return EnergyModel(model.topology, model.labels, model.unary, prior, model.weights)


def load_input(args) -> Loaded:
    sources = [s for s in (args.instance, args.pair, args.synthetic, args.synthetic_pair) if s]
    if len(sources) != 1:
        raise ContractViolation("give exactly one of --instance, --pair, --synthetic, --synthetic-pair")
    if args.instance:
        return Loaded(_with_prior(inst_io.load_instance(args.instance), args.prior, args.trunc))
    if args.synthetic:
        spec = args.synthetic
        if args.seed is not None:
            spec = ",".join([p for p in spec.split(",") if not p.strip().startswith("seed=")])
            spec += ("," if ":" in spec else ":") + f"seed={args.seed}"
        return Loaded(synthetic.from_spec(spec, args.prior, args.trunc))
    pair = stereo.load_pair(*args.pair) if args.pair else _ramp_pair(args.synthetic_pair)
    if args.preset:
        params = stereo.preset(args.preset, labels=args.labels, trunc=args.trunc, weight=args.weight,
                               prior=args.prior, weight_low=args.weight_low,
                               grad_threshold=args.grad_threshold)
    else:
        if args.labels is None or args.trunc is None or args.weight is None:
            raise ContractViolation("image input needs --preset or all of --labels, --trunc, --weight")
        params = stereo.StereoParams(labels=args.labels, trunc=args.trunc, weight=args.weight,
                                     prior=args.prior or "tq", weight_low=args.weight_low,
                                     grad_threshold=args.grad_threshold if args.grad_threshold is not None else 10.0)
    return Loaded(stereo.build_stereo_model(pair, params), (pair.width, pair.height))


def _options(args) -> SolveOptions:
    return SolveOptions(tol=args.tol, epsilon=args.epsilon, max_sweeps=args.max_sweeps,
                        max_iterations=args.max_iterations, record=args.record,
                        timing=not args.no_timing, check=args.check)


def initial_labeling(args, model: EnergyModel, options: SolveOptions):
    chosen = [a for a in (args.init_file, args.init_from) if a]
    if len(chosen) > 1:
        raise ContractViolation("use at most one of --init-file and --init-from")
    if args.init_file:
        return inst_io.read_labeling(args.init_file, model.node_count)
    if args.init_from:
        return run(model, solver_name(args.init_from), None, options).labeling
    return np.zeros(model.node_count, dtype=np.int64)


def _summary(trace: SolveTrace) -> str:
    return f"E_g={trace.final_energy:.6f} time_ms={trace.total_ms} iters={trace.iterations}"


def cmd_solve(args) -> int:
    loaded = load_input(args)
    model = loaded.model
    options = _options(args)
    x0 = initial_labeling(args, model, options)
    trace = run(model, args.solver, x0, options)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            trace.to_csv(fh)
    if args.disparity:
        if loaded.shape is None:
            if model.topology.grid is None:
                raise ContractViolation("--disparity needs a grid-shaped input")
            loaded.shape = model.topology.grid
        stereo.write_disparity(args.disparity, trace.labeling, *loaded.shape, model.label_count)
    if args.labels_out:
        inst_io.write_labeling(args.labels_out, trace.labeling)
    if args.plot:
        from .plotting import plot_trace
        plot_trace(trace, args.plot)
    print(_summary(trace))
    return 0


def wide_csv(traces: Dict[str, SolveTrace], fh, by_time: bool) -> None:
    """One row per event time (or iteration), each solver's best energy so far."""
    names = list(traces)
    key = "time_ms" if by_time else "iteration"
    series = {}
    for name, tr in traces.items():
        if by_time:
            stamps = np.cumsum([r.ms for r in tr.rows])
        else:
            stamps = np.array([r.iteration for r in tr.rows])
        series[name] = (stamps, np.array([r.E_g for r in tr.rows]))
    points = sorted(set(int(s) for st, _ in series.values() for s in st))
    fh.write(",".join([key] + names) + "\n")
    for p in points:
        vals = []
        for name in names:
            st, e = series[name]
            k = int(np.searchsorted(st, p, side="right")) - 1
            vals.append(f"{e[max(k, 0)]:.6f}")
        fh.write(",".join([str(p)] + vals) + "\n")


def cmd_compare(args) -> int:
    loaded = load_input(args)
    model = loaded.model
    options = _options(args)
    names = [solver_name(s) for s in args.solvers.split(",") if s.strip()]
    if not names:
        raise ContractViolation("--solvers needs at least one solver")
    x0 = initial_labeling(args, model, options)
    traces: Dict[str, SolveTrace] = {}
    for name in names:
        traces[name] = run(model, name, x0, options)
        print(f"{name} {_summary(traces[name])}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            wide_csv(traces, fh, by_time=options.timing)
    if args.plot:
        from .plotting import plot_comparison
        plot_comparison(traces, args.plot, use_time=options.timing)
    return 0


def cmd_make_instance(args) -> int:
    loaded = load_input(args)
    inst_io.save_instance(loaded.model, args.out)
    m = loaded.model
    print(f"wrote {args.out}: nodes={m.node_count} labels={m.label_count} edges={len(m.edges)}")
    return 0


def cmd_check(args) -> int:
    """Quick property sweep: oracle agreement and monotone traces on small grids."""
    from .ishikawa import build_subproblem, solve_exact
    from .oracle import exact_minimum

    failures = 0
    start = time.perf_counter()
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        kind = ("tl", "tq", "cauchy")[seed % 3]
        L = int(rng.integers(3, 6))
        model = synthetic.grid_model(3, 3, L, kind, int(rng.integers(1, 4)), seed,
                                     float(rng.uniform(0.5, 4.0)))
        _, e_h = exact_minimum(model, "H")
        sub = build_subproblem(model, np.zeros(model.node_count, dtype=np.int64),
                               np.ones(model.node_count, dtype=bool))
        _, e_ish = solve_exact(sub)
        if abs(e_h - e_ish) > 1e-6:
            failures += 1
            print(f"seed {seed}: layered solve {e_ish:.6f} != brute force {e_h:.6f}")
        _, e_g = exact_minimum(model, "G")
        for name in SOLVERS:
            if name == "gswapf" and not model.prior.is_truncated_flat:
                continue
            tr = run(model, name, None, SolveOptions(check=True, record="move", timing=False))
            e = tr.energies
            if np.any(np.diff(e) > 1e-6) or tr.final_energy < e_g - 1e-6:
                failures += 1
                print(f"seed {seed}: {name} trace not monotone or below the exact minimum")
    ms = int((time.perf_counter() - start) * 1000)
    print(f"checked {args.seeds} seeds: {failures} failures ({ms} ms)")
    return 1 if failures else 0


def _add_input(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("input (exactly one)")
    g.add_argument("--instance", help="instance file")
    g.add_argument("--pair", nargs=2, metavar=("LEFT", "RIGHT"), help="rectified image pair (PGM/PPM, PNG with Pillow)")
    g.add_argument("--synthetic", metavar="SPEC", help="generator spec, e.g. chain:n=10,l=6,seed=1")
    g.add_argument("--synthetic-pair", metavar="SPEC", help="generated image pair, e.g. ramp:w=64,h=48,shift=3")
    m = p.add_argument_group("model")
    m.add_argument("--prior", choices=["tl", "tq", "cauchy"])
    m.add_argument("--trunc", type=int, metavar="T")
    m.add_argument("--seed", type=int, help="overrides the seed of --synthetic")
    m.add_argument("--preset", choices=sorted(stereo.PRESETS))
    m.add_argument("--labels", type=int, help="disparity count for image input")
    m.add_argument("--weight", type=float, help="edge weight (below the gradient threshold)")
    m.add_argument("--weight-low", type=float, help="edge weight above the gradient threshold")
    m.add_argument("--grad-threshold", type=float)
    s = p.add_argument_group("solver")
    s.add_argument("--epsilon", type=int, default=2, help="label margin for rswape (default 2)")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-sweeps", type=int, default=100)
    s.add_argument("--max-iterations", type=int, default=1000)
    s.add_argument("--record", choices=["sweep", "move"], default="sweep", help="trace granularity")
    s.add_argument("--init-file", help="initial labels, whitespace separated")
    s.add_argument("--init-from", metavar="SOLVER", help="start from the result of another solver")
    s.add_argument("--no-timing", action="store_true", help="write 0 for all times (deterministic output)")
    s.add_argument("--check", action="store_true", help="verify per-move invariants (slow)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rangemove", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver")
    _add_input(p)
    p.add_argument("--solver", default="gswap", choices=list(SOLVERS) + ["alpha_expansion"])
    p.add_argument("--trace", metavar="CSV", help="per-iteration trace")
    p.add_argument("--disparity", metavar="PGM", help="final labeling as a scaled PGM")
    p.add_argument("--labels-out", metavar="FILE", help="final labeling as text")
    p.add_argument("--plot", metavar="PNG", help="energy and changed-fraction figure")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run several solvers from the same start")
    _add_input(p)
    p.add_argument("--solvers", default=",".join(SOLVERS), help="comma separated")
    p.add_argument("--out", metavar="CSV", help="wide CSV: time (or iteration) and E_g per solver")
    p.add_argument("--plot", metavar="PNG", help="energy-versus-time figure")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("make-instance", help="write a model to an instance file")
    _add_input(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_instance)

    p = sub.add_parser("check", help="small brute-force property sweep")
    p.add_argument("--seeds", type=int, default=10)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
