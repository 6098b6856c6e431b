"""Command-line interface: ``rescoh {simulate,preprocess,scan,select,regress,fetch}``.

Exit status is 0 on success, 2 for usage errors and 1 for runtime or data
errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import json
import os
import re
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError, RescohError
from .ingestion import DatedSeries, align_drop_missing, fetch_series, parse_fred_csv, preprocess
from .lagfamily import CROSS, IS, RC, CandidateFamily, ScanResult, StopRule, greedy_select, scan_criteria
from .regression import build_lag_design, ols_fit, product_term, stepwise_aic
from .spectral import FrequencyGrid, LagWindow
from .timeseries import OUTPUT_MARGIN, Series, simulate_system

BAR_WIDTH = 60


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by the analysis commands; defaults match the simulation study."""

    window: int = 10
    grid_half_count: int = 1000
    lags: Tuple[int, int] = (-9, 9)
    criterion: str = "both"
    stop_ratio: Optional[float] = 3.5
    max_stages: int = 4
    lags_per_input: int = 4
    seed: int = 0
    offline: bool = False
    out_dir: Optional[str] = None

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        return cls(
            window=args.window,
            grid_half_count=args.grid_half_count,
            lags=args.lags,
            criterion=args.criterion,
            stop_ratio=args.stop_ratio,
            max_stages=args.max_stages,
            lags_per_input=args.lags_per_input,
            seed=args.seed,
            offline=args.offline,
            out_dir=args.out_dir,
        )


def parse_lag_range(text: str) -> Tuple[int, int]:
    m = re.fullmatch(r"\s*(-?\d+)\s*(?:\.\.|:)\s*(-?\d+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected a range like -9..9, got {text!r}")
    lo, hi = int(m.group(1)), int(m.group(2))
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty lag range {text!r}")
    return lo, hi


def _criterion(text: str) -> str:
    t = text.strip()
    if t.lower() == "both":
        return "both"
    if t.upper() in (RC, IS):
        return t.upper()
    raise argparse.ArgumentTypeError(f"criterion must be RC, IS or both, got {text!r}")


def _ratio(text: str) -> Optional[float]:
    if text.strip().lower() in ("none", "off"):
        return None
    return float(text)


def read_config_file(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Keys use flag spelling."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


# ---------------------------------------------------------------- file io


def load_series(path: str):
    """Read a two-column CSV: FRED layout (ISO dates) or an integer index."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    first = rows[1][0].strip() if len(rows) > 1 else ""
    try:
        dt.date.fromisoformat(first)
    except ValueError:
        if len(rows[0]) != 2:
            raise InvalidInputError(f"{path}: expected two columns")
        try:
            values = [float(r[1]) for r in rows[1:]]
        except (ValueError, IndexError) as exc:
            raise InvalidInputError(f"{path}: {exc}") from None
        return Series(values, name=rows[0][1].strip())
    return parse_fred_csv(text)


def write_series(path: str, s: Series, start_index: int = 1) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if s.dates is not None:
            w.writerow(["DATE", s.name or "value"])
            for d, v in zip(s.dates, s.values):
                w.writerow([str(d), repr(float(v))])
        else:
            w.writerow(["t", s.name or "value"])
            for i, v in enumerate(s.values):
                w.writerow([start_index + i, repr(float(v))])


def load_inputs(y_path: str, input_paths: Sequence[str], do_preprocess: bool, names: Optional[Sequence[str]] = None):
    """Load, align by date when dated, and optionally difference and centre."""
    loaded = [load_series(p) for p in [y_path, *input_paths]]
    dated = [isinstance(s, DatedSeries) for s in loaded]
    if all(dated):
        aligned, dates = align_drop_missing(loaded)
    elif any(dated):
        raise InvalidInputError("cannot mix dated and undated input files")
    else:
        aligned = loaded
        lengths = {len(s) for s in aligned}
        if len(lengths) != 1:
            raise InvalidInputError(f"input series lengths differ: {sorted(lengths)}")
    if do_preprocess:
        aligned = [preprocess(s) for s in aligned]
    if names:
        if len(names) != len(input_paths):
            raise UsageError("--names needs one name per input")
        aligned = [aligned[0]] + [Series(s.values, name=n) for s, n in zip(aligned[1:], names)]
    return aligned[0], aligned[1:]


# ---------------------------------------------------------------- rendering


def render_bars(result: ScanResult, title: Optional[str] = None) -> str:
    """ASCII bar chart of a scan, one row per lag."""
    vals = list(result.values.values())
    top = max([abs(v) for v in vals] + [0.0])
    lines = [title or f"{result.criterion} by lag"]
    for h, v in result.values.items():
        n = 0 if top == 0 else int(round(BAR_WIDTH * abs(v) / top))
        bar = ("!" if v < 0 else "#") * n
        tag = ""
        if h in result.excluded:
            tag = "  (excluded, set to 0)"
        elif h in result.degenerate:
            tag = "  (degenerate)"
        elif v < 0:
            tag = "  (negative: anomaly)"
        mark = "*" if h == result.argmax else " "
        lines.append(f"{h:>4} {mark}|{bar:<{BAR_WIDTH}}| {v:.6g}{tag}")
    lines.append(f"argmax = {result.argmax}, max/median = {result.prominence:.3g}")
    return "\n".join(lines)


def _out_dir(cfg: RunConfig) -> str:
    d = cfg.out_dir or "."
    os.makedirs(d, exist_ok=True)
    return d


def _family(cfg: RunConfig, inputs: Sequence[Series]) -> CandidateFamily:
    if len(inputs) < 2:
        raise InvalidInputError("the cross-product family needs two inputs")
    return CandidateFamily(inputs[0], inputs[1], cfg.lags[0], cfg.lags[1], CROSS)


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig, n: int = 1000, noise_sd: float = 1.0) -> List[str]:
    x1, x2, y = simulate_system(cfg.seed, n=n, noise_sd=noise_sd)
    d = _out_dir(cfg)
    paths = []
    for s in (x1, x2, y):
        p = os.path.join(d, f"{s.name}.csv")
        write_series(p, s, start_index=OUTPUT_MARGIN + 1)
        paths.append(p)
    return paths


def cmd_preprocess(cfg: RunConfig, paths: Sequence[str]) -> List[str]:
    loaded = [load_series(p) for p in paths]
    if all(isinstance(s, DatedSeries) for s in loaded):
        aligned, dates = align_drop_missing(loaded)
        aligned = [Series(s.values, dates, name=s.name) for s in aligned]
    else:
        aligned = loaded
    d = _out_dir(cfg)
    out = []
    for s in aligned:
        p = os.path.join(d, f"{s.name}_processed.csv")
        write_series(p, preprocess(s))
        out.append(p)
    return out


def cmd_scan(cfg: RunConfig, y: Series, inputs: Sequence[Series], fixed_lags: Sequence[int] = (), stream=None):
    stream = sys.stdout if stream is None else stream
    fam = _family(cfg, inputs)
    results = scan_criteria(
        y, inputs, fam, cfg.criterion, LagWindow(cfg.window), FrequencyGrid(cfg.grid_half_count), fixed_lags
    )
    d = _out_dir(cfg)
    for c, r in results.items():
        with open(os.path.join(d, f"scan_{c}.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(r.to_csv())
        chart = render_bars(r)
        with open(os.path.join(d, f"scan_{c}.txt"), "w", encoding="utf-8") as fh:
            fh.write(chart + "\n")
        print(chart, file=stream)
        print(file=stream)
    return results


def cmd_select(cfg: RunConfig, y: Series, inputs: Sequence[Series], stream=None):
    stream = sys.stdout if stream is None else stream
    fam = _family(cfg, inputs)
    result = greedy_select(
        y,
        inputs,
        fam,
        cfg.criterion,
        StopRule(cfg.stop_ratio, cfg.max_stages),
        LagWindow(cfg.window),
        FrequencyGrid(cfg.grid_half_count),
    )
    d = _out_dir(cfg)
    with open(os.path.join(d, "selection.json"), "w", encoding="utf-8") as fh:
        fh.write(result.to_json())
    for i, stage in enumerate(result.stages, start=1):
        for r in stage.values():
            print(render_bars(r, f"stage {i}: {r.criterion} by lag"), file=stream)
            print(file=stream)
    print(f"selected lags: {json.dumps(result.selected)}", file=stream)
    print(f"stop reason: {result.stop_reason}", file=stream)
    return result


def cmd_regress(cfg: RunConfig, y: Series, inputs: Sequence[Series], lags: Sequence[int] = (), products: Sequence[str] = (), intercept: bool = True, stepwise: bool = True, stream=None):
    stream = sys.stdout if stream is None else stream
    names = [s.name or f"x{i + 1}" for i, s in enumerate(inputs)]
    if len(set(names)) != len(names):
        raise InvalidInputError(f"input names must be unique, got {names}")
    terms = list(products)
    if lags:
        if len(inputs) < 2:
            raise InvalidInputError("product lags need two inputs")
        terms += [product_term(names[0], names[1], h) for h in lags]
    design = build_lag_design(y, dict(zip(names, inputs)), cfg.lags_per_input, intercept, terms)
    fit = stepwise_aic(design) if stepwise else ols_fit(design)
    d = _out_dir(cfg)
    with open(os.path.join(d, "regression.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(fit.to_csv())
    print(fit.to_text(), file=stream)
    return fit


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=10, help="lag-window truncation M")
    p.add_argument("--grid-half-count", type=int, default=1000, help="grid is -pi + k pi / N")
    p.add_argument("--lags", type=parse_lag_range, default=(-9, 9), help="candidate lag range, e.g. -9..9")
    p.add_argument("--criterion", type=_criterion, default="both", help="RC, IS or both")
    p.add_argument("--stop-ratio", type=_ratio, default=3.5, help="max/median bar ratio needed to continue")
    p.add_argument("--max-stages", type=int, default=4)
    p.add_argument("--lags-per-input", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--offline", action="store_true", help="never touch the network")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--config", default=None, help="file of key=value flag defaults")


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--y", required=True, help="output series CSV")
    p.add_argument("--inputs", nargs="+", required=True, help="input series CSVs (first two form the family)")
    p.add_argument("--names", nargs="+", default=None, help="names for the inputs")
    p.add_argument("--preprocess", action="store_true", help="difference and centre after alignment")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rescoh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write x1.csv, x2.csv, y.csv of the simulation model")
    _common(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--noise-sd", type=float, default=1.0)

    p = sub.add_parser("preprocess", help="align, difference and centre series files")
    _common(p)
    p.add_argument("paths", nargs="+")

    p = sub.add_parser("scan", help="RC / IS bars over the candidate lags")
    _common(p)
    _data_args(p)
    p.add_argument("--fixed-lags", type=int, nargs="*", default=[])

    p = sub.add_parser("select", help="greedy stage-wise lag selection")
    _common(p)
    _data_args(p)

    p = sub.add_parser("regress", help="lagged regression with stepwise AIC")
    _common(p)
    _data_args(p)
    p.add_argument("--selected-lags", type=int, nargs="*", default=[], help="product lags h of X1(t+h)X2(t)")
    p.add_argument("--products", nargs="*", default=[], help="extra product terms, e.g. 'x1(t+4)x2(t)'")
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--no-stepwise", action="store_true")

    p = sub.add_parser("fetch", help="download a FRED series as CSV")
    _common(p)
    p.add_argument("series_id")
    p.add_argument("--start", type=dt.date.fromisoformat, default=dt.date(2018, 1, 1))
    p.add_argument("--end", type=dt.date.fromisoformat, default=dt.date(2019, 12, 31))
    p.add_argument("--out", default=None, help="output file (stdout when omitted)")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config_file(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in subparsers.choices.values():
        actions = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, raw in cfg.items():
            action = actions.get(key)
            if action is None:
                continue
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                defaults[key] = action.type(raw)
            else:
                defaults[key] = raw
        sp.set_defaults(**defaults)
        unknown = set(cfg) - set(actions)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (UsageError, OSError, argparse.ArgumentTypeError, ValueError) as exc:
        print(f"rescoh: usage error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = RunConfig.from_args(args)
    try:
        if args.command == "simulate":
            for p in cmd_simulate(cfg, args.n, args.noise_sd):
                print(p)
        elif args.command == "preprocess":
            for p in cmd_preprocess(cfg, args.paths):
                print(p)
        elif args.command == "fetch":
            text = fetch_series(args.series_id, args.start, args.end, offline=args.offline or None)
            if args.out:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
        else:
            y, inputs = load_inputs(args.y, args.inputs, args.preprocess, args.names)
            if args.command == "scan":
                cmd_scan(cfg, y, inputs, args.fixed_lags)
            elif args.command == "select":
                cmd_select(cfg, y, inputs)
            elif args.command == "regress":
                cmd_regress(
                    cfg, y, inputs, args.selected_lags, args.products,
                    intercept=not args.no_intercept, stepwise=not args.no_stepwise,
                )
    except UsageError as exc:
        print(f"rescoh: usage error: {exc}", file=sys.stderr)
        return 2
    except (RescohError, OSError, ValueError) as exc:
        print(f"rescoh: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
