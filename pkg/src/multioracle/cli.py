"""Command-line entry point: ``multioracle solve | metric | reproduce``.

Exit codes: 0 converged, 2 stopped at the iteration limit, 1 bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import gamefile
from .catalog import REPORTED_PAYOFFS, example_game, random_polynomial_game, random_zero_sum_polymatrix
from .driver import MAX_ITERATIONS, SolveConfig, SolveResult, certify_epsilon, solve
from .metrics import TransportError, metric_report
from .oracles import OracleConfig
from .spaces import Box, Circle, Simplex, canonicalize

EXIT_OK, EXIT_ERROR, EXIT_MAX_ITER = 0, 1, 2

SUMMARY_KEYS = ("game", "terminated", "iterations", "epsilon", "epsilon_certified",
                "epsilon_recertified", "payoffs", "strategies", "seed", "master", "oracle",
                "runtime_s")


def _num(x) -> str:
    """Full-precision text for CSV cells."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------- solve

def trace_header(n_players: int) -> list[str]:
    cols = ["iter"]
    cols += [f"instability_{i + 1}" for i in range(n_players)]
    cols += ["max_instability", "wasserstein_step"]
    cols += [f"size_{i + 1}" for i in range(n_players)]
    cols += ["master_certified_gap", "master_certified", "master_method"]
    cols += [f"payoff_{i + 1}" for i in range(n_players)]
    cols += ["master_ms", "oracle_ms", "metric_ms"]
    return cols


def trace_rows(result: SolveResult) -> list[list[str]]:
    rows = []
    for t in result.trace:
        row = [str(t.iteration)]
        row += [_num(v) for v in t.instability]
        row += [_num(t.max_instability), "" if t.wasserstein_step is None else _num(t.wasserstein_step)]
        row += [str(s) for s in t.subgame_sizes]
        row += [_num(t.master_certified_gap), str(int(t.master_certified)), t.master_method]
        row += [_num(v) for v in t.payoffs]
        row += [_num(t.timings[k]) for k in ("master_ms", "oracle_ms", "metric_ms")]
        rows.append(row)
    return rows


def write_trace(result: SolveResult, n_players: int, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(trace_header(n_players))
        w.writerows(trace_rows(result))


def summary(game, result: SolveResult, config: SolveConfig, runtime: float,
            recertified: float | None = None) -> dict:
    strategies = [{"atoms": s.atoms.tolist(), "weights": s.weights.tolist()}
                  for s in result.profile.strategies]
    doc = {
        "game": game.name,
        "terminated": result.terminated,
        "iterations": result.iterations,
        "epsilon": config.epsilon,
        "epsilon_certified": result.epsilon_certified,
        "epsilon_recertified": recertified,
        "payoffs": [float(v) for v in result.payoffs],
        "strategies": strategies,
        "seed": config.seed,
        "master": config.master,
        "oracle": config.oracle.mode,
        "runtime_s": runtime,
    }
    assert tuple(doc) == SUMMARY_KEYS
    return doc


def _load_game(args):
    if args.game is not None:
        return gamefile.load(args.game)
    return example_game(args.example)


def cmd_solve(args) -> int:
    try:
        game = _load_game(args)
        config = SolveConfig(epsilon=args.epsilon, max_iterations=args.max_iter, seed=args.seed,
                             master=args.master, record_wasserstein=args.wasserstein,
                             oracle=OracleConfig(mode=args.oracle, starts=args.starts, seed=args.seed))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    t0 = time.perf_counter()
    try:
        result = solve(game, config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    runtime = time.perf_counter() - t0
    recert = None if args.no_recertify else certify_epsilon(game, result.profile)
    doc = summary(game, result, config, runtime, recert)

    if args.trace:
        write_trace(result, game.n_players, args.trace)
    summary_path = args.summary
    if summary_path is None and args.trace:
        summary_path = str(Path(args.trace).with_suffix(".summary.json"))
    if summary_path:
        Path(summary_path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    if args.json:
        print(json.dumps(doc))
    else:
        print(f"{game.name}: {result.terminated} after {result.iterations} iterations "
              f"({runtime:.3f} s)")
        print(f"epsilon_certified {result.epsilon_certified:.6g}")
        print("payoffs " + " ".join(f"{v:.6f}" for v in result.payoffs))
        for i, s in enumerate(result.profile.strategies):
            support = ", ".join(f"{np.array2string(a, precision=6)}:{w:.6f}"
                                for a, w in zip(s.atoms, s.weights))
            print(f"player {i + 1}: {support}")
    return EXIT_MAX_ITER if result.terminated == MAX_ITERATIONS else EXIT_OK


# ---------------------------------------------------------------- metric

def parse_space(text: str):
    """``box:LO:HI`` (comma-separated vectors for d > 1), ``simplex:D`` or ``circle[:euclidean]``."""
    parts = text.strip().split(":")
    kind = parts[0].lower()
    if kind == "box" and len(parts) == 3:
        lo = [float(v) for v in parts[1].split(",")]
        hi = [float(v) for v in parts[2].split(",")]
        return Box(lo, hi)
    if kind == "simplex" and len(parts) == 2:
        return Simplex(int(parts[1]))
    if kind == "circle" and len(parts) <= 2:
        return Circle(parts[1] if len(parts) == 2 else "arc")
    raise ValueError(f"cannot parse space {text!r}")


def parse_measure(text: str):
    """Inline measure ``x:w, x:w, ...`` with ``;`` between coordinates of an atom.

    If ``text`` names an existing file, it is read as YAML/JSON with ``atoms``
    and ``weights`` lists.
    """
    path = Path(text)
    if path.is_file():
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
        if not isinstance(doc, dict) or set(doc) != {"atoms", "weights"}:
            raise ValueError(f"{text}: expected exactly the fields 'atoms' and 'weights'")
        weights = np.asarray(doc["weights"], dtype=float).ravel()
        atoms = np.asarray(doc["atoms"], dtype=float).reshape(len(weights), -1)
        return atoms, _check_weights(weights)
    atoms, weights = [], []
    for entry in text.split(","):
        entry = entry.strip()
        if not entry:
            continue
        x, sep, w = entry.rpartition(":")
        if not sep or not x:
            raise ValueError(f"malformed measure entry {entry!r}; expected atom:weight")
        atoms.append([float(v) for v in x.split(";")])
        weights.append(float(w))
    if not atoms:
        raise ValueError("empty measure")
    if len({len(a) for a in atoms}) != 1:
        raise ValueError("atoms have different dimensions")
    return np.array(atoms), _check_weights(np.array(weights))


def _check_weights(weights):
    if weights.size == 0 or np.any(~np.isfinite(weights)) or np.any(weights < 0) \
            or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1")
    return weights


def cmd_metric(args) -> int:
    try:
        pa, pw = parse_measure(args.p)
        qa, qw = parse_measure(args.q)
        if args.space:
            space = parse_space(args.space)
        else:
            pts = np.vstack([pa, qa])
            space = Box(pts.min(axis=0), pts.max(axis=0))
        p = canonicalize(pa, pw, space)
        q = canonicalize(qa, qw, space)
        report = metric_report(p, q, space)
    except (OSError, ValueError, TransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    doc = {"wasserstein": report.wasserstein, "total_variation": report.total_variation,
           "lower_bound": report.lower_bound, "upper_bound": report.upper_bound}
    if args.plan:
        doc["plan"] = {"p_atoms": p.atoms.tolist(), "q_atoms": q.atoms.tolist(),
                       "mass": report.plan.dense().tolist()}
    if args.json:
        print(json.dumps(doc))
    else:
        for k in ("wasserstein", "total_variation", "lower_bound", "upper_bound"):
            print(f"{k} {doc[k]:.12g}")
        if args.plan:
            print("plan")
            for (r, c), m in sorted(report.plan.entries.items()):
                if m > 0:
                    print(f"  {p.atoms[r].tolist()} -> {q.atoms[c].tolist()} : {m:.12g}")
    return EXIT_OK


# ---------------------------------------------------------------- reproduce

def _suite_games(args):
    if args.suite == "examples":
        for k in sorted(REPORTED_PAYOFFS):
            yield k, example_game(k), 1e-3, args.seed
        return
    for s in range(args.samples):
        seed = args.seed + s
        if args.suite == "polymatrix":
            yield s, random_zero_sum_polymatrix(args.players or 3, actions=20, seed=seed), 0.01, seed
        else:
            yield s, random_polynomial_game(args.players or 3, degree=4, dim=args.dim, seed=seed), 1e-3, seed


def cmd_reproduce(args) -> int:
    rows = []
    for key, game, eps, seed in _suite_games(args):
        config = SolveConfig(epsilon=eps, max_iterations=args.max_iter, seed=seed)
        t0 = time.perf_counter()
        result = solve(game, config)
        runtime = time.perf_counter() - t0
        row = {"sample": key, "game": game.name, "seed": seed, "terminated": result.terminated,
               "iterations": result.iterations, "epsilon": eps,
               "epsilon_certified": result.epsilon_certified,
               "certified_gap": certify_epsilon(game, result.profile),
               "runtime_s": runtime, "payoffs": [float(v) for v in result.payoffs]}
        if args.suite == "examples":
            row["reference_payoffs"] = list(REPORTED_PAYOFFS[key])
        rows.append(row)

    its = [r["iterations"] for r in rows]
    doc = {"suite": args.suite, "seed": args.seed, "runs": rows,
           "aggregate": {"runs": len(rows),
                         "converged": sum(r["terminated"] != MAX_ITERATIONS for r in rows),
                         "mean_iterations": float(np.mean(its)) if rows else None,
                         "mean_runtime_s": float(np.mean([r["runtime_s"] for r in rows])) if rows else None}}

    head = f"{'run':>4} {'terminated':>15} {'iters':>5} {'eps_cert':>10} {'gap':>10} {'time_s':>8}  payoffs"
    print(head)
    for r in rows:
        pay = " ".join(f"{v:+.4f}" for v in r["payoffs"])
        print(f"{r['sample']!s:>4} {r['terminated']:>15} {r['iterations']:>5d} "
              f"{r['epsilon_certified']:>10.3g} {r['certified_gap']:>10.3g} {r['runtime_s']:>8.3f}  {pay}")
    agg = doc["aggregate"]
    if rows:
        print(f"converged {agg['converged']}/{agg['runs']}, mean iterations {agg['mean_iterations']:.2f}, "
              f"mean runtime {agg['mean_runtime_s']:.3f} s")
    text = json.dumps(doc, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    # usage errors share exit status 1 with other bad input; 2 means "hit the iteration limit"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multioracle",
                                     description="Multiple oracle equilibrium solver for continuous games")
    parser.add_argument("-v", "--verbose", action="store_true", help="log master-solver warnings")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one game")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--game", metavar="PATH", help="game definition file (YAML or JSON)")
    src.add_argument("--example", type=int, metavar="N", help="built-in example game 1-5")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--master", choices=("auto", "lp", "polymatrix-lp", "regret"), default="auto")
    p.add_argument("--oracle", choices=("auto", "poly-exact", "multistart"), default="auto")
    p.add_argument("--starts", type=int, default=16, help="multistart starting points")
    p.add_argument("--trace", metavar="PATH", help="per-iteration CSV trace")
    p.add_argument("--summary", metavar="PATH",
                   help="summary JSON path (default: next to the trace as *.summary.json)")
    p.add_argument("--wasserstein", action="store_true",
                   help="record Wasserstein distance between consecutive profiles")
    p.add_argument("--json", action="store_true", help="print the summary as one JSON document")
    p.add_argument("--no-recertify", action="store_true",
                   help="skip the independent post-hoc certification")
    p.set_defaults(func=cmd_solve)

    m = sub.add_parser("metric", help="distances between two finitely supported measures")
    m.add_argument("--p", required=True, help="measure 'x:w, x:w' (';' between coordinates) or a file; "
                   "write --p=-0.3:1 when the first atom is negative")
    m.add_argument("--q", required=True, help="second measure, same format")
    m.add_argument("--space", help="box:LO:HI | simplex:D | circle[:euclidean]")
    m.add_argument("--plan", action="store_true", help="also print the optimal transport plan")
    m.add_argument("--json", action="store_true")
    m.set_defaults(func=cmd_metric)

    r = sub.add_parser("reproduce", help="run a benchmark suite")
    r.add_argument("--suite", choices=("examples", "polymatrix", "polynomial"), required=True)
    r.add_argument("--samples", type=int, default=10)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--players", type=int, default=None)
    r.add_argument("--dim", type=int, default=1)
    r.add_argument("--max-iter", type=int, default=100)
    r.add_argument("--output", metavar="PATH", help="write the JSON report here instead of stdout")
    r.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
