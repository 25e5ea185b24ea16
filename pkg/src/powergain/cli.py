"""Command-line front end.

Four subcommands: `estimate` (power gain from a file of t-scores),
`curve` (the same estimate over a grid of sample-size multipliers),
`simulate` (Monte Carlo coverage tables), and `conditional` (the
replication-design estimator on grouped effect data).

Exit codes: 0 success, 2 invalid flags or values, 3 dataset parse error,
4 estimation failure (e.g. the caliper ratio is unavailable).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .estimator import (
    EffectGroup,
    EstimationError,
    TScoreSample,
    conditional_delta,
    estimate,
    power_gain_curve,
)
from .pubbias import CaliperError
from .simulate import NOISES, PRIORS, TABLE_PRESETS, DgpSpec, run_coverage
from .spectrum import TuningConfig

__all__ = ["main", "DatasetError", "read_tscore_file", "read_grouped_file",
           "render_estimate_text", "render_curve_text", "render_conditional_text",
           "render_simulate_text"]


class DatasetError(Exception):
    """The input file could not be parsed into the expected columns."""


# ---------------------------------------------------------------------------
# dataset ingestion

def _data_lines(path: str) -> list[tuple[int, str]]:
    """Non-blank lines with their 1-based line numbers."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise DatasetError(f"{path} contains no data")
    return lines


def _delimiter(first_line: str) -> str:
    return "\t" if "\t" in first_line else ","


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _bad_lines_message(bad: list[int], what: str) -> str:
    shown = ", ".join(str(b) for b in bad[:20])
    more = f" (and {len(bad) - 20} more)" if len(bad) > 20 else ""
    return f"could not parse {len(bad)} line(s): {shown}{more} — {what}"


def read_tscore_file(path: str) -> tuple[TScoreSample, bool]:
    """Parse a delimited file of t-scores.

    Column layout: a required `t` column and an optional `study_id`
    column, located by a header row when one is present.  Headerless
    files are read positionally: one column is t, two columns are
    (t, study_id).  The delimiter (comma or tab) is sniffed from the
    first line.  Returns the sample and whether study labels were found.
    """
    lines = _data_lines(path)
    delim = _delimiter(lines[0][1])
    first = [c.strip() for c in lines[0][1].split(delim)]
    lowered = [c.lower() for c in first]

    if "t" in lowered:
        t_idx = lowered.index("t")
        sid_idx = lowered.index("study_id") if "study_id" in lowered else None
        rows = lines[1:]
        if not rows:
            raise DatasetError(f"{path} has a header but no data rows")
    elif _is_number(first[0]):
        if len(first) > 2:
            raise DatasetError(
                f"headerless file has {len(first)} columns; expected t or "
                "t,study_id — add a header row naming a column `t`")
        t_idx = 0
        sid_idx = 1 if len(first) == 2 else None
        rows = lines
    else:
        raise DatasetError(
            "first line is neither a header containing a `t` column nor a "
            "numeric t value")

    t_vals, sids, bad = [], [], []
    for lineno, raw in rows:
        cells = [c.strip() for c in raw.split(delim)]
        needed = t_idx if sid_idx is None else max(t_idx, sid_idx)
        if len(cells) <= needed or not _is_number(cells[t_idx]) \
                or not math.isfinite(float(cells[t_idx])):
            bad.append(lineno)
            continue
        t_vals.append(float(cells[t_idx]))
        if sid_idx is not None:
            sids.append(cells[sid_idx])
    if bad:
        raise DatasetError(_bad_lines_message(bad, "every row needs a finite numeric t"))
    if not t_vals:
        raise DatasetError(f"{path} contains no usable rows")

    has_sid = sid_idx is not None
    sample = TScoreSample.from_scores(np.array(t_vals),
                                      np.array(sids) if has_sid else None)
    return sample, has_sid


_GROUP_COLUMNS = ("group_id", "effect", "std_error", "weight")


def read_grouped_file(path: str) -> list[EffectGroup]:
    """Parse grouped effect data for the conditional estimator.

    Required columns: group_id, effect, std_error, weight; optional
    lab_id.  Column order is free with a header; headerless files are
    read positionally in the order above (lab_id fifth).
    """
    lines = _data_lines(path)
    delim = _delimiter(lines[0][1])
    first = [c.strip().lower() for c in lines[0][1].split(delim)]

    if any(c in _GROUP_COLUMNS or c == "lab_id" for c in first):
        missing = [c for c in _GROUP_COLUMNS if c not in first]
        if missing:
            raise DatasetError(f"missing required column(s): {', '.join(missing)}")
        idx = {c: first.index(c) for c in _GROUP_COLUMNS}
        lab_idx = first.index("lab_id") if "lab_id" in first else None
        rows = lines[1:]
        if not rows:
            raise DatasetError(f"{path} has a header but no data rows")
    else:
        ncol = len(first)
        if ncol not in (4, 5):
            raise DatasetError(
                "headerless grouped file needs 4 or 5 columns "
                "(group_id, effect, std_error, weight[, lab_id]); "
                f"got {ncol}")
        idx = dict(zip(_GROUP_COLUMNS, range(4)))
        lab_idx = 4 if ncol == 5 else None
        rows = lines

    order: list[str] = []
    buckets: dict[str, dict[str, list]] = {}
    bad = []
    for lineno, raw in rows:
        cells = [c.strip() for c in raw.split(delim)]
        needed = max([*idx.values()] + ([lab_idx] if lab_idx is not None else []))
        numeric_ok = len(cells) > needed and all(
            _is_number(cells[idx[c]]) for c in ("effect", "std_error", "weight"))
        if not numeric_ok:
            bad.append(lineno)
            continue
        gid = cells[idx["group_id"]]
        if gid not in buckets:
            order.append(gid)
            buckets[gid] = {"effect": [], "std_error": [], "weight": [], "lab": []}
        buckets[gid]["effect"].append(float(cells[idx["effect"]]))
        buckets[gid]["std_error"].append(float(cells[idx["std_error"]]))
        buckets[gid]["weight"].append(float(cells[idx["weight"]]))
        if lab_idx is not None:
            buckets[gid]["lab"].append(cells[lab_idx])
    if bad:
        raise DatasetError(_bad_lines_message(
            bad, "every row needs numeric effect, std_error and weight"))

    groups = []
    for gid in order:
        b = buckets[gid]
        groups.append(EffectGroup(
            effects=np.array(b["effect"]),
            std_errors=np.array(b["std_error"]),
            weights=np.array(b["weight"]),
            labels=np.array(b["lab"]) if lab_idx is not None else None))
    return groups


# ---------------------------------------------------------------------------
# rendering

def _fmt(x, digits: int = 6) -> str:
    if x is None:
        return "-"
    return f"{x:.{digits}f}"


def render_estimate_text(report: dict) -> str:
    c = report["c"]
    level = 100.0 * (1.0 - report["alpha"])
    lines = [
        "counterfactual power gain",
        f"  sample-size multiplier c^2 : {c * c:g}",
        f"  delta-hat                  : {_fmt(report['delta'])}",
        f"  std error                  : {_fmt(report['se'])}",
        f"  {level:g}% CI                     : "
        f"[{_fmt(report['ci_low'])}, {_fmt(report['ci_high'])}]",
        f"  theta-hat (pub. bias)      : "
        + ("correction disabled" if report["theta"] is None else _fmt(report["theta"])),
        f"  J (basis cutoff)           : {report['J']}",
        f"  epsilon (caliper width)    : "
        + ("-" if report["epsilon"] is None else _fmt(report["epsilon"])),
        f"  n t-scores                 : {report['n']}",
        f"  clusters                   : {report['n_clusters']}",
        f"  status-quo power           : {_fmt(report['status_quo_power'])}",
    ]
    for flag in report.get("flags", []):
        lines.append(f"  note: {flag}")
    return "\n".join(lines)


def render_curve_text(points: list[dict]) -> str:
    lines = [f"{'c2':>8}  {'delta':>12}  {'se':>12}  {'ci_low':>12}  {'ci_high':>12}"]
    for p in points:
        lines.append(f"{p['c2']:>8g}  {p['delta']:>12.6f}  {p['se']:>12.6f}  "
                     f"{p['ci_low']:>12.6f}  {p['ci_high']:>12.6f}")
    return "\n".join(lines)


def render_conditional_text(report: dict) -> str:
    mode = report["se_mode"]
    return "\n".join([
        "conditional power gain (replication design)",
        f"  sample-size multiplier c^2 : {report['c'] ** 2:g}",
        f"  delta-hat                  : {_fmt(report['delta'])}",
        f"  std error ({mode}){' ' * (15 - len(mode))}: {_fmt(report['se'])}",
        f"  groups                     : {report['n_groups']}",
        f"  members                    : {report['n_members']}",
    ])


def render_simulate_text(rows: list[dict]) -> str:
    header = ("n\tdgp\tunc_power\ttrue_delta\tmean_delta\tsd_delta"
              "\tmean_se\tcoverage\tnoise\treps\tfailures\tseed")
    out = [header]
    for r in rows:
        stats_part = "\t".join(
            f"{r[k]:.6f}" for k in ("unc_power", "true_delta", "mean_delta",
                                    "sd_delta", "mean_se", "coverage"))
        out.append(f"{r['n']}\t{r['dgp']}\t{stats_part}\t{r['noise']}"
                   f"\t{r['reps']}\t{r['failures']}\t{r['seed']}")
    return "\n".join(out)


def _csv_table(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([r[c] for c in columns])
    return buf.getvalue().rstrip("\n")


# ---------------------------------------------------------------------------
# manifests and output plumbing

def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(args: argparse.Namespace, dataset: str | None) -> dict:
    echo = {k: v for k, v in sorted(vars(args).items())
            if k not in ("func",) and not k.startswith("_")}
    man = {
        "command": args.command,
        "config": echo,
        "versions": {
            "powergain": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if dataset is not None:
        man["dataset"] = {"path": dataset, "sha256": _digest(dataset)}
    return man


def _emit(args: argparse.Namespace, text: str, payload: dict) -> None:
    """Write the rendered output and, for file output, a manifest sidecar."""
    if args.out == "json":
        body = json.dumps(payload, indent=2)
    else:
        body = text
    if getattr(args, "output", None):
        Path(args.output).write_text(body + "\n")
        Path(args.output + ".manifest.json").write_text(
            json.dumps(payload["manifest"], indent=2) + "\n")
    else:
        print(body)


# ---------------------------------------------------------------------------
# subcommands

def _tuning_from_args(args: argparse.Namespace, n_effective: int | None = None) -> TuningConfig:
    return TuningConfig(c=math.sqrt(args.c2), cv=args.cv, alpha=args.alpha,
                        sigmaT2=args.sigma_t2, C=args.const_C, D=args.const_D,
                        n_effective=n_effective)


def _load_sample(args: argparse.Namespace) -> TScoreSample:
    sample, has_sid = read_tscore_file(args.dataset)
    if not has_sid:
        print("warning: no study_id column found; treating every t-score as "
              "its own cluster. Standard errors assume full independence — "
              "add a study_id column if scores share studies.",
              file=sys.stderr)
    return sample


def _n_effective(args: argparse.Namespace, sample: TScoreSample) -> int:
    return sample.n_clusters if args.scale_by == "studies" else sample.n


def cmd_estimate(args: argparse.Namespace) -> int:
    sample = _load_sample(args)
    cfg = _tuning_from_args(args, _n_effective(args, sample))
    report = estimate(sample, cfg, pb=not args.no_pb,
                      clamp_ci=args.clamp_ci_at_zero).to_dict()
    payload = {"command": "estimate", "report": report,
               "manifest": _manifest(args, args.dataset)}
    if args.out == "csv":
        flat = dict(report, flags=";".join(report["flags"]))
        text = _csv_table([flat], list(flat))
    else:
        text = render_estimate_text(report)
    _emit(args, text, payload)
    return 0


def _parse_grid(raw: str) -> list[float]:
    try:
        vals = [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise ValueError(f"--grid must be comma-separated numbers, got {raw!r}") from exc
    if not vals:
        raise ValueError("--grid is empty")
    if any(v < 1.0 for v in vals):
        raise ValueError("every --grid value is a sample-size multiplier c^2 "
                         "and must be >= 1")
    grid = sorted(set(vals) | {1.0})
    return grid


def cmd_curve(args: argparse.Namespace) -> int:
    grid_c2 = _parse_grid(args.grid)
    sample = _load_sample(args)
    cfg = _tuning_from_args(args, _n_effective(args, sample))
    points = power_gain_curve(sample, cfg, [math.sqrt(v) for v in grid_c2],
                              pb=not args.no_pb, clamp_ci=args.clamp_ci_at_zero)
    dicts = [p.to_dict() for p in points]
    for d, c2 in zip(dicts, grid_c2):
        d["c2"] = c2  # label rows with the requested multiplier, not sqrt(c2)**2

    payload = {"command": "curve", "points": dicts,
               "manifest": _manifest(args, args.dataset)}
    if args.out == "csv":
        text = _csv_table(dicts, ["c2", "delta", "se", "ci_low", "ci_high"])
    else:
        text = render_curve_text(dicts)
    _emit(args, text, payload)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.table is not None:
        if args.noise is not None:
            raise ValueError("--table picks the noise family; drop --noise or --table")
        noise, preset_ns = TABLE_PRESETS[args.table]
    else:
        noise, preset_ns = args.noise or "normal", (500,)
    ns = [args.n] if args.n is not None else list(preset_ns)
    dgps = list(PRIORS) if args.dgp == "all" else [args.dgp]

    rows = []
    stream_text = args.out == "text" and not getattr(args, "output", None)
    header_done = False
    cell = 0
    for n in ns:
        for prior in dgps:
            spec = DgpSpec(prior=prior, noise=noise, theta0=args.theta0,
                           cv=args.cv, c=math.sqrt(args.c2))
            cfg = _tuning_from_args(args)
            row = run_coverage(spec, n, args.reps, cfg, args.seed + cell)
            cell += 1
            rows.append(row.to_dict())
            if stream_text:
                text = render_simulate_text(rows[-1:])
                print(text if not header_done else text.splitlines()[1])
                header_done = True
                sys.stdout.flush()

    payload = {"command": "simulate", "rows": rows, "manifest": _manifest(args, None)}
    if stream_text:
        return 0
    if args.out == "csv":
        text = _csv_table(rows, list(rows[0]))
    else:
        text = render_simulate_text(rows)
    _emit(args, text, payload)
    return 0


def cmd_conditional(args: argparse.Namespace) -> int:
    groups = read_grouped_file(args.dataset)
    report = conditional_delta(groups, c=math.sqrt(args.c2), cv=args.cv,
                               se_mode=args.se).to_dict()
    payload = {"command": "conditional", "report": report,
               "manifest": _manifest(args, args.dataset)}
    if args.out == "csv":
        text = _csv_table([report], list(report))
    else:
        text = render_conditional_text(report)
    _emit(args, text, payload)
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", choices=("text", "json", "csv"), default="text",
                   help="output format (default text)")
    p.add_argument("--output", metavar="PATH", default=None,
                   help="write output to PATH (plus PATH.manifest.json) instead of stdout")


def _add_common_estimation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c2", type=float, default=2.0,
                   help="sample-size multiplier c^2 (default 2 = double every sample)")
    p.add_argument("--cv", type=float, default=1.96,
                   help="two-sided critical value (default 1.96)")
    p.add_argument("--alpha", type=float, default=0.05,
                   help="confidence level is 1 - alpha (default 0.05)")
    p.add_argument("--sigma-t2", type=float, default=1.0, dest="sigma_t2",
                   help="variance of the reference Gaussian the basis is built on")
    p.add_argument("--const-C", type=float, default=2.0, dest="const_C",
                   help="caliper width constant: epsilon = C * n^(-1/3)")
    p.add_argument("--const-D", type=float, default=0.05, dest="const_D",
                   help="basis cutoff constant in the tuning rule")
    _add_output_flags(p)


def _add_dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("dataset", help="delimited text file (comma or tab, sniffed from "
                                   "the first line) with column t and optional study_id")
    p.add_argument("--scale-by", choices=("tscores", "studies"), default="tscores",
                   dest="scale_by",
                   help="drive the tuning rule by the t-score count (default) or "
                        "the study count (less conservative)")
    p.add_argument("--no-pb", action="store_true", dest="no_pb",
                   help="skip the publication-bias correction")
    p.add_argument("--clamp-ci-at-zero", action="store_true", dest="clamp_ci_at_zero",
                   help="clip the confidence interval below at zero")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="powergain",
        description="Estimate how much statistical power a literature would "
                    "gain if every study's sample size were scaled up.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="power-gain estimate from a t-score file")
    _add_dataset_flags(p_est)
    _add_common_estimation_flags(p_est)
    p_est.set_defaults(func=cmd_estimate)

    p_curve = sub.add_parser("curve", help="power-gain curve over a grid of c^2")
    _add_dataset_flags(p_curve)
    _add_common_estimation_flags(p_curve)
    p_curve.add_argument("--grid", default="1,2,4,8",
                         help="comma-separated c^2 values (a c^2=1 anchor row is "
                              "always included); default 1,2,4,8")
    p_curve.set_defaults(func=cmd_curve)

    p_sim = sub.add_parser("simulate", help="Monte Carlo bias/coverage table")
    p_sim.add_argument("--dgp", choices=PRIORS + ("all",), default="all",
                       help="true-effect distribution (default: all of them)")
    p_sim.add_argument("--noise", choices=NOISES, default=None,
                       help="noise family (default normal; mutually exclusive "
                            "with --table)")
    p_sim.add_argument("--table", type=int, choices=(1, 2, 3), default=None,
                       help="preset reproducing a published table layout "
                            "(1: normal noise, n=50 and 500; 2: t(30), n=500; "
                            "3: lognormal mean, n=500)")
    p_sim.add_argument("--n", type=int, default=None,
                       help="retained t-scores per replication (default from preset)")
    p_sim.add_argument("--reps", type=int, default=1000,
                       help="replications per cell (default 1000)")
    p_sim.add_argument("--seed", type=int, default=0, help="base RNG seed")
    p_sim.add_argument("--theta0", type=float, default=0.9,
                       help="publication probability of insignificant results")
    _add_common_estimation_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_cond = sub.add_parser("conditional",
                            help="replication-design gain from grouped effects")
    p_cond.add_argument("dataset",
                        help="delimited file with columns group_id, effect, "
                             "std_error, weight and optional lab_id")
    p_cond.add_argument("--se", choices=("iid", "worstcase"), default="iid",
                        help="standard-error mode (worstcase clusters by lab_id)")
    p_cond.add_argument("--c2", type=float, default=2.0,
                        help="sample-size multiplier c^2 (default 2)")
    p_cond.add_argument("--cv", type=float, default=1.96,
                        help="two-sided critical value (default 1.96)")
    _add_output_flags(p_cond)
    p_cond.set_defaults(func=cmd_conditional)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CaliperError as exc:
        print(f"error: {exc}\nhint: widen the caliper (larger --const-C) or "
              "check that --cv matches how the t-scores were thresholded.",
              file=sys.stderr)
        return 4
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
