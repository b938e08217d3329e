"""Command-line entry point: ``catpoison <subcommand> [options]``.

Every subcommand accepts ``--seed``, ``--out DIR``, ``--json`` and
``--config FILE`` (``key = value`` lines using the long option names with
dashes or underscores; explicit flags win).  With ``--out`` the results are
written as CSV/JSON next to a ``metadata.json``; otherwise a summary goes to
stdout.

Exit status: 0 success, 1 usage error, 2 a check failed (non-positive
certificate, solver not converged, no threshold found).

CSV columns, in order:

  verify-table1   block, score, worst_drift, scenario
  solve-scores    block, score, residual
  threshold       stage, p1, converged, value, pass
  simulate        run, seed, absorbed, time, events, status, fingerprint
                  (plus summary.csv: gas, count, frequency, stderr)
  sweep           p1, gas1_frequency, stderr, mean_time, undecided
  drift           offset, drift            (analytic)
                  estimator, mean, stderr  (--empirical)
  couple-replay   step, a, b, violations
  couple-mc       size, horizon, runs, violation_frequency
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__, coupling, scores, simulate
from .lattice import INFINITE, Boundary, Configuration, ModelSpec
from .rng import MIXER_ID

METADATA_SCHEMA = "catpoison-run/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _gas_count(text: str) -> float:
    if str(text).lower() in ("inf", "infinite"):
        return INFINITE
    n = int(text)
    if n < 2:
        raise argparse.ArgumentTypeError("n must be >= 2 or 'inf'")
    return n


def _floats(text: str) -> List[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def load_config(path: str) -> Dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for CSV/JSON output")
    p.add_argument("--json", action="store_true", help="print the result as JSON")
    p.add_argument("--config", help="key = value file mirroring the flags")


def _model(p, n_default="4", p1_default=0.47):
    p.add_argument("--n", type=_gas_count, default=_gas_count(n_default))
    p.add_argument("--p1", type=float, default=p1_default)
    p.add_argument("--rates", type=_floats, help="full rate vector p_1,...,p_n (overrides --p1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="catpoison", description=__doc__.split("\n\n")[0],
                     formatter_class=argparse.RawDescriptionHelpFormatter, epilog=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify-table1", help="certificate for the published length-3 scores")
    _common(p)
    p.add_argument("--p1", type=float, default=0.47)
    p.add_argument("--K", type=int, default=6)
    p.add_argument("--mode", choices=scores._MODES, default="joint")

    p = sub.add_parser("solve-scores", help="fixed-point scores at one p1")
    _common(p)
    p.add_argument("--n", type=_gas_count, default=4)
    p.add_argument("--L", type=int, default=3)
    p.add_argument("--p1", type=float, default=0.4699)
    p.add_argument("--K", type=int)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--damping", type=float, default=1.0)
    p.add_argument("--mode", choices=scores._MODES, default="termwise")

    p = sub.add_parser("threshold", help="smallest certified p1")
    _common(p)
    p.add_argument("--n", type=_gas_count, default=4)
    p.add_argument("--L", type=int, default=3)
    p.add_argument("--K", type=int)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--decimals", type=int, default=3)
    p.add_argument("--mode", choices=scores._MODES, default="termwise")

    p = sub.add_parser("simulate", help="absorption statistics from all-vacant or --initial")
    _common(p)
    _model(p)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--boundary", choices=[b.value for b in Boundary], default="torus")
    p.add_argument("--max-events", type=int)
    p.add_argument("--initial", help="starting configuration as digits")

    p = sub.add_parser("sweep", help="gas-1 absorption frequency over a p1 grid")
    _common(p)
    p.add_argument("--n", type=_gas_count, default=4)
    p.add_argument("--p1-grid", type=_floats, default=_floats("0.40,0.45,0.50,0.55,0.60"))
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--boundary", choices=[b.value for b in Boundary], default="torus")
    p.add_argument("--max-events", type=int)

    p = sub.add_parser("drift", help="analytic drift of a block, or a Monte Carlo estimate")
    _common(p)
    _model(p)
    p.add_argument("--block", default="222")
    p.add_argument("--scenario", default="", help="follower(s), comma-separated for a per-site minimum")
    p.add_argument("--scores", help="JSON file of block -> score (default: published length-3 table)")
    p.add_argument("--empirical", action="store_true")
    p.add_argument("--initial", default="110" + "2" * 60)
    p.add_argument("--horizon", type=float, default=0.2)
    p.add_argument("--replicas", type=int, default=2000)

    p = sub.add_parser("couple-replay", help="replay a coupled script")
    _common(p)
    p.add_argument("--script", help="script file (default: bundled realization)")
    p.add_argument("--size", type=int, default=10)
    p.add_argument("--final-order", choices=["L", "R"], default="L",
                   help="last tie-break when using the bundled script")

    p = sub.add_parser("couple-mc", help="frequency of monotonicity violations under a coupling")
    _common(p)
    p.add_argument("--law", help="pairs as 'ab:prob,...' (default: the five-pair example law)")
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--runs", type=int, default=100)
    return parser


def _parse(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = load_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for k, v in cfg.items():
            if k not in known or k in ("help", "config"):
                raise UsageError(f"unknown config key {k!r} for {args.command}")
            action = known[k]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[k] = v.lower() in ("1", "true", "yes")
            else:
                try:
                    defaults[k] = action.type(v) if action.type else v
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"config key {k}: {exc}") from None
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _spec(args) -> ModelSpec:
    if getattr(args, "rates", None):
        n = args.n if args.n == INFINITE else len(args.rates)
        return ModelSpec(n, tuple(args.rates))
    return ModelSpec.equal_others(args.n, args.p1)


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return x


def _jsonable(v):
    if isinstance(v, float) and v == INFINITE:
        return "inf"
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


class _Output:
    def __init__(self, args, started: float):
        self.args = args
        self.started = started
        self.files: Dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def finish(self, result: dict, summary: str, status: int) -> int:
        args = self.args
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            for name, text in self.files.items():
                (out / name).write_text(text)
            config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("out", "json")}
            meta = {
                "schema": METADATA_SCHEMA,
                "version": __version__,
                "subcommand": args.command,
                "seed": args.seed,
                "mixer": MIXER_ID,
                "config": config,
                "files": sorted(self.files),
                "exit_status": status,
                "wall_time": round(time.perf_counter() - self.started, 3),
            }
            (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
        if args.json:
            print(json.dumps(result, indent=2))
        else:
            print(summary)
        return status


def _load_scores(path: Optional[str]) -> scores.ScoreTable:
    if path is None:
        return scores.table1()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read scores {path}: {exc}") from None
    data = data.get("scores", data)
    L = len(next(iter(data)))
    return scores.ScoreTable(L, data)


def cmd_verify_table1(args, out: _Output) -> int:
    table = scores.table1()
    cert = scores.verify_certificate(args.p1, 4, 3, table, args.K, args.mode)
    out.add("certificate.json", cert.to_json() + "\n")
    rows = [(scores.block_str(b), table.scores[b], w.value, scores.block_str(w.scenario))
            for b, w in sorted(cert.worst.items())]
    out.add("certificate.csv", _csv(["block", "score", "worst_drift", "scenario"], rows))
    summary = f"verdict {cert.verdict}  c = {cert.c:.6f}  at block {scores.block_str(cert.argmin_block)}"
    return out.finish(cert.to_dict(), summary, 0 if cert.c > 0 else 2)


def cmd_solve_scores(args, out: _Output) -> int:
    cfg = scores.SolverConfig(args.L, args.n, args.p1, args.tol, args.max_iter, args.K,
                              args.damping, args.mode)
    table, rep = scores.fixed_point_solve(cfg)
    rows = [(k, v, rep.residuals[k]) for k, v in table.to_dict().items()]
    out.add("scores.csv", _csv(["block", "score", "residual"], rows))
    result = {"converged": rep.converged, "sweeps": rep.sweeps, "max_change": rep.max_change,
              "reference_drift": rep.reference_value, "scores": table.to_dict()}
    out.add("solve.json", json.dumps(result, indent=2) + "\n")
    lines = [f"{k}  {v:8.4f}" for k, v in table.to_dict().items()]
    lines.append(f"converged={rep.converged} sweeps={rep.sweeps} reference drift={rep.reference_value:.6f}")
    return out.finish(result, "\n".join(lines), 0 if rep.converged else 2)


def cmd_threshold(args, out: _Output) -> int:
    res = scores.threshold_search(args.n, args.L, args.K, args.tol, args.mode, args.decimals)
    rows = [(h["stage"], h["p1"], h["converged"], h["value"], h["pass"]) for h in res.history]
    out.add("history.csv", _csv(["stage", "p1", "converged", "value", "pass"], rows))
    if res.table is not None:
        out.add("scores.csv", _csv(["block", "score"], list(res.table.to_dict().items())))
    if res.certificate is not None:
        out.add("certificate.json", res.certificate.to_json() + "\n")
    result = {"n": _jsonable(args.n), "L": args.L, "p1_star": res.p1_star,
              "p1_fixed_point": res.p1_fixed_point, "message": res.message}
    if res.p1_star is None:
        summary = f"no certificate: {res.message}"
    else:
        summary = f"p1* = {res.p1_star:.4f}  (fixed point {res.p1_fixed_point:.4f})"
    return out.finish(result, summary, 0 if res.p1_star is not None else 2)


def cmd_simulate(args, out: _Output) -> int:
    spec = _spec(args)
    boundary = Boundary(args.boundary)
    start = Configuration.parse(args.initial, boundary) if args.initial else \
        Configuration.uniform(args.size, 0, boundary)
    rows = []
    counts: Dict[int, int] = {}
    for r in range(args.runs):
        seed = simulate.derive_seed(args.seed, r)
        tr = simulate.run(spec, start, seed, max_events=args.max_events)
        gas = tr.absorbed or 0
        if spec.infinite and gas > 1:
            gas = 2
        counts[gas] = counts.get(gas, 0) + 1
        rows.append((r, seed, gas, tr.time, tr.n_events, tr.status, tr.fingerprint))
    out.add("runs.csv", _csv(["run", "seed", "absorbed", "time", "events", "status", "fingerprint"], rows))
    summ = []
    for gas in sorted(counts):
        f = counts[gas] / args.runs
        summ.append((gas, counts[gas], f, math.sqrt(f * (1 - f) / args.runs)))
    out.add("summary.csv", _csv(["gas", "count", "frequency", "stderr"], summ))
    f1 = counts.get(1, 0) / args.runs
    result = {"runs": args.runs, "size": len(start), "gas1_frequency": f1,
              "counts": {str(k): v for k, v in sorted(counts.items())}}
    summary = "\n".join(f"gas {g}: {c} runs ({fr:.3f} +- {se:.3f})" for g, c, fr, se in summ)
    return out.finish(result, summary, 0)


def cmd_sweep(args, out: _Output) -> int:
    res = simulate.sweep(args.n, args.p1_grid, args.size, args.runs, args.seed, args.boundary,
                         args.max_events)
    keys = ["p1", "gas1_frequency", "stderr", "mean_time", "undecided"]
    out.add("sweep.csv", _csv(keys, [[r[k] for k in keys] for r in res.rows]))
    result = {"rows": res.rows, "monotone": res.monotone, "crossing": res.crossing}
    lines = [f"p1={r['p1']:.4f}  gas1={r['gas1_frequency']:.3f}" for r in res.rows]
    lines.append(f"monotone={res.monotone} crossing={res.crossing}")
    return out.finish(result, "\n".join(lines), 0)


def cmd_drift(args, out: _Output) -> int:
    table = _load_scores(args.scores)
    spec = _spec(args)
    if args.empirical:
        init = Configuration.parse(args.initial, Boundary.BLOCKED)
        est = simulate.empirical_drift(spec, init, args.horizon, args.replicas, args.seed, table)
        rows = [("compensator", est.mean, est.stderr), ("increment", est.increment_mean, est.increment_stderr)]
        out.add("drift.csv", _csv(["estimator", "mean", "stderr"], rows))
        result = {"mean": est.mean, "stderr": est.stderr, "ci95": list(est.ci),
                  "increment_mean": est.increment_mean, "increment_stderr": est.increment_stderr,
                  "positive": est.positive}
        summary = f"drift {est.mean:.5f} +- {est.stderr:.5f} (95% CI {est.ci[0]:.5f}, {est.ci[1]:.5f})"
        return out.finish(result, summary, 0)
    rep = scores.drift(args.block, table, spec.p1, args.n, args.scenario)
    out.add("drift.csv", _csv(["offset", "drift"], list(rep.breakdown.items())))
    result = {"block": scores.block_str(rep.block), "value": rep.value,
              "breakdown": {str(k): v for k, v in rep.breakdown.items()}}
    return out.finish(result, f"drift {rep.value:.6f}", 0)


def cmd_couple_replay(args, out: _Output) -> int:
    if args.script:
        try:
            events = coupling.load_script(args.script)
        except OSError as exc:
            raise UsageError(f"cannot read script: {exc}") from None
    else:
        events = coupling.golden_script(args.final_order)
    states = coupling.replay(events, size=args.size)
    rows = [(i, str(s.a), str(s.b), " ".join(map(str, coupling.monotonicity_check(s))))
            for i, s in enumerate(states)]
    out.add("replay.csv", _csv(["step", "a", "b", "violations"], rows))
    final = states[-1]
    result = {"states": [str(s) for s in states], "violations": coupling.monotonicity_check(final)}
    lines = [str(s) for s in states] + [f"violations at sites {result['violations']}"]
    return out.finish(result, "\n".join(lines), 0)


def _parse_law(text: Optional[str]) -> coupling.JointArrivalLaw:
    if not text:
        return coupling.COUNTEREXAMPLE_LAW
    probs = {}
    for item in text.split(","):
        pair, p = item.split(":")
        pair = pair.strip()
        if len(pair) != 2 or not pair.isdigit():
            raise UsageError(f"bad pair {pair!r}; expected two digits like 21")
        probs[(int(pair[0]), int(pair[1]))] = float(Fraction(p.strip()))
    return coupling.JointArrivalLaw(probs)


def cmd_couple_mc(args, out: _Output) -> int:
    law = _parse_law(args.law)
    freq = coupling.violation_frequency(law, args.size, args.horizon, args.runs, args.seed)
    out.add("couple_mc.csv", _csv(["size", "horizon", "runs", "violation_frequency"],
                                  [(args.size, args.horizon, args.runs, freq)]))
    result = {"violation_frequency": freq, "runs": args.runs,
              "marginal_a": list(law.marginal(0)), "marginal_b": list(law.marginal(1))}
    return out.finish(result, f"violation frequency {freq:.3f} over {args.runs} runs", 0)


COMMANDS = {
    "verify-table1": cmd_verify_table1,
    "solve-scores": cmd_solve_scores,
    "threshold": cmd_threshold,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "drift": cmd_drift,
    "couple-replay": cmd_couple_replay,
    "couple-mc": cmd_couple_mc,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.perf_counter()
    try:
        args = _parse(argv)
        return COMMANDS[args.command](args, _Output(args, started))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
