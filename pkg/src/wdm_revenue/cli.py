"""Command line interface: ``wdm-revenue <command> ...``.

Commands: solve, enumerate, baseline, sweep, validate, reproduce. Instance
arguments are JSON files or ``table:ID`` for a bundled example.

Output goes to stdout in one of three formats (``--format``). ``table`` and
``csv`` write only the payload to stdout and the run metadata (command,
instance digest, wall time) to stderr. ``json`` writes one document with
``command``, ``instance_digest``, ``payload`` and ``meta``; only ``meta``
changes between identical runs.

CSV columns (frozen):

=========  ==========================================================
solve      station, wavelength, visit, revenue, net_revenue
enumerate  rank, label, visits, revenue, full, heuristic
baseline   mode, trials, seed, maximum, average, minimum, percent_above, heuristic
sweep      wavelengths, revenue, served
validate   station, visit, cycles, seed, mean, std_error, analytic, z_score,
           served_fraction, loop_served_fraction, expected_loop_fraction
reproduce  table, item, reference, computed, tolerance, verdict
=========  ==========================================================

Exit codes: 0 success, 1 a reproduction check failed, 2 usage error,
3 instance parse error, 4 infeasible instance, 5 enumeration too large.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import shlex
import sys
import time
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

from .exact import EnumerationTooLarge, brute_force_solve, random_baseline, sweep_wavelengths
from .heuristic import InfeasibleInstanceError, heuristic_solve
from .instances import InstanceParseError, instance_digest, load_instance, table_path
from .model import Instance
from .reproduce import NOT_REPRODUCIBLE, REPRODUCIBLE, reproduce
from .simulate import SimConfig, eventual_service_prob, simulate_station

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_INFEASIBLE = 4
EXIT_GUARD = 5


class UsageError(Exception):
    pass


@dataclass
class Output:
    """Tabular payload plus a summary mapping; ``digest`` is the instance hash."""

    columns: list[str]
    rows: list[list[Any]]
    summary: dict[str, Any] = field(default_factory=dict)
    digest: str | None = None
    exit_code: int = EXIT_OK

    def payload(self) -> dict:
        return {"columns": self.columns, "rows": self.rows, "summary": self.summary}


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------


def _cell(x: Any) -> str:
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.2f}"
    if isinstance(x, (list, tuple)):
        return "[" + " ".join(_cell(v) for v in x) + "]"
    return "" if x is None else str(x)


def _csv_cell(x: Any) -> str:
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (list, tuple)):
        return " ".join(_csv_cell(v) for v in x)
    return "" if x is None else str(x)


def render_table(out: Output) -> str:
    cells = [out.columns] + [[_cell(x) for x in row] for row in out.rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(out.columns))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    for k, v in out.summary.items():
        lines.append(f"{k}: {_cell(v)}")
    return "\n".join(lines) + "\n"


def render_csv(out: Output) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(out.columns)
    for row in out.rows:
        w.writerow([_csv_cell(x) for x in row])
    return buf.getvalue()


def _jsonable(x: Any) -> Any:
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def render_payload_json(out: Output) -> str:
    return json.dumps(_jsonable(out.payload()), sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _load(ref: str) -> Instance:
    if ref.startswith("table:"):
        try:
            ref = str(table_path(ref.split(":", 1)[1]))
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    return load_instance(ref)


def cmd_solve(args) -> Output:
    inst = _load(args.instance)
    res = heuristic_solve(inst, args.finalization)
    rows = [
        [sid, res.assignment.wavelength_of.get(sid, 0), res.plan.visit_of[sid], res.per_station[sid],
         res.net_per_station[sid]]
        for sid in inst.ids
    ]
    summary = {
        "total_revenue": res.total_revenue,
        "net_revenue": res.net_revenue,
        "served": res.served_count,
        "groups": [g for g in res.assignment.groups().values()],
        "finalization": args.finalization,
    }
    if res.warnings:
        summary["notes"] = list(res.warnings)
    return Output(["station", "wavelength", "visit", "revenue", "net_revenue"], rows, summary,
                  instance_digest(inst))


def cmd_enumerate(args) -> Output:
    inst = _load(args.instance)
    report = brute_force_solve(inst, allow_unassigned=not args.full_only)
    h_label = report.heuristic.assignment.canonical().label(inst.ids)
    rows = [
        [rank, list(r.label), list(r.visits), r.revenue, r.full, r.label == h_label]
        for rank, r in enumerate(report.rows, start=1)
    ]
    summary = {
        "assignments": len(rows),
        "optimum": report.optimum.revenue,
        "heuristic": report.heuristic.total_revenue,
        "heuristic_gap": report.heuristic_gap,
    }
    return Output(["rank", "label", "visits", "revenue", "full", "heuristic"], rows, summary,
                  instance_digest(inst))


def cmd_baseline(args) -> Output:
    inst = _load(args.instance)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    b = random_baseline(inst, args.mode, args.trials, args.seed, args.threads)
    rows = [[b.mode, b.trials, b.seed, b.maximum, b.average, b.minimum, b.percent_above, b.heuristic_revenue]]
    return Output(
        ["mode", "trials", "seed", "maximum", "average", "minimum", "percent_above", "heuristic"],
        rows, {}, instance_digest(inst),
    )


def _k_list(text: str) -> list[int]:
    try:
        ks = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--k-list must be comma separated integers, got {text!r}") from None
    if not ks:
        raise UsageError("--k-list must not be empty")
    if any(k < 1 for k in ks):
        raise UsageError("--k-list values must be >= 1")
    return ks


def cmd_sweep(args) -> Output:
    inst = _load(args.instance)
    ks = _k_list(args.k_list)
    rows = [[r.wavelengths, r.revenue, r.served] for r in sweep_wavelengths(inst, ks)]
    return Output(["wavelengths", "revenue", "served"], rows, {}, instance_digest(inst))


def cmd_validate(args) -> Output:
    inst = _load(args.instance)
    sid = args.station if args.station is not None else inst.ids[0]
    if sid not in inst.ids:
        raise UsageError(f"no station {sid} in the instance")
    s = inst.station(sid)
    c = inst.frame_time
    v = args.visit if args.visit is not None else heuristic_solve(inst).plan.visit_of[sid]
    if not 0 <= v <= c:
        raise UsageError(f"--visit must lie in [0, {c}]")
    try:
        cfg = SimConfig(args.cycles, args.warmup, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep = simulate_station(s, c, v, cfg)
    model = s.probability_model
    p, q = float(model.p(v)), float(model.q(v))
    expected = eventual_service_prob(p, q) if (p > 0 or q > 0) else float("nan")
    rows = [[sid, float(v), args.cycles, args.seed, rep.mean_revenue_per_cycle, rep.std_error,
             rep.analytic_revenue, rep.z_score, rep.served_fraction, rep.loop_served_fraction, expected]]
    cols = ["station", "visit", "cycles", "seed", "mean", "std_error", "analytic", "z_score",
            "served_fraction", "loop_served_fraction", "expected_loop_fraction"]
    return Output(cols, rows, {"within_3_se": bool(abs(rep.z_score) <= 3)}, instance_digest(inst))


def cmd_reproduce(args) -> Output:
    tid = args.table.upper()
    try:
        checks = reproduce(tid, args.trials, args.seed, args.threads)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    rows = [[c.table, c.item, c.reference, c.computed, c.tolerance, c.verdict] for c in checks]
    failed = sum(c.passed is False for c in checks)
    summary = {"checks": len(checks), "failed": failed}
    if tid == "VII":
        summary["note"] = NOT_REPRODUCIBLE
    code = EXIT_CHECK_FAILED if failed else EXIT_OK
    return Output(["table", "item", "reference", "computed", "tolerance", "verdict"], rows, summary, None, code)


COMMANDS = {
    "solve": cmd_solve,
    "enumerate": cmd_enumerate,
    "baseline": cmd_baseline,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "reproduce": cmd_reproduce,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wdm-revenue",
        description="Wavelength assignment and visit-time allocation for an optical router node.",
    )
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("table", "csv", "json"), default="table")
    fmt.add_argument("--threads", type=int, default=1, help="worker threads for baselines")
    sub = parser.add_subparsers(dest="command", required=True)

    def instance_cmd(name, help_):
        p = sub.add_parser(name, help=help_, parents=[fmt])
        p.add_argument("instance", help="instance JSON file, or table:ID for a bundled example")
        return p

    p = instance_cmd("solve", "run the three-step heuristic")
    p.add_argument("--finalization", choices=("two", "alpha"), default="two")
    p = instance_cmd("enumerate", "rank every assignment (small instances)")
    p.add_argument("--full-only", action="store_true", help="skip assignments leaving stations unserved")
    p = instance_cmd("baseline", "random wavelength assignments followed by TWO")
    p.add_argument("--mode", choices=("capped", "uncapped"), default="capped")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=1)
    p = instance_cmd("sweep", "heuristic revenue as the wavelength count varies")
    p.add_argument("--k-list", required=True, help="comma separated wavelength counts, e.g. 1,2,4")
    p = instance_cmd("validate", "Monte Carlo check of one station's revenue")
    p.add_argument("--station", type=int, default=None)
    p.add_argument("--visit", type=float, default=None, help="visit time (default: heuristic's)")
    p.add_argument("--cycles", type=int, default=100_000)
    p.add_argument("--warmup", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p = sub.add_parser("reproduce", help="recompute a published table", parents=[fmt])
    p.add_argument("table", help=f"one of {', '.join(REPRODUCIBLE)} or VII")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=1)
    return parser


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=stderr)
        return EXIT_USAGE

    start = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            out = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE
    except InstanceParseError as exc:
        print(f"parse error: {exc}", file=stderr)
        return EXIT_PARSE
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=stderr)
        return EXIT_INFEASIBLE
    except EnumerationTooLarge as exc:
        print(f"too large: {exc}", file=stderr)
        return EXIT_GUARD
    wall = time.perf_counter() - start
    for w in dict.fromkeys(str(w.message) for w in caught):
        print(f"warning: {w}", file=stderr)

    command = "wdm-revenue " + shlex.join(argv)
    if args.format == "json":
        doc = {
            "command": command,
            "instance_digest": out.digest,
            "payload": _jsonable(out.payload()),
            "meta": {"wall_time_s": wall},
        }
        stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    else:
        stdout.write(render_csv(out) if args.format == "csv" else render_table(out))
        print(f"# command: {command}", file=stderr)
        if out.digest:
            print(f"# instance sha256: {out.digest}", file=stderr)
        print(f"# wall time: {wall:.3f} s", file=stderr)
    return out.exit_code


if __name__ == "__main__":
    sys.exit(main())
