"""Command-line entry point: ``sponsorsurv <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import warnings
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

from . import __version__
from .cox import CoxModel
from .exceptions import SponsorSurvError, ValidationError
from .forecast import (
    DEFAULT_HORIZON,
    forecast,
    load_profile,
    portfolio_audit,
    read_portfolio_csv,
    render_audit_json,
    render_audit_text,
    survival_profile,
)
from .nonparametric import LifeTable, life_table, median_lifetime, overall_hazard
from .panel import BlockSpec, parse_panel_csv, render_panel_csv
from .synth import GeneratorSpec, generate_panel


class UsageError(ValidationError):
    """Bad command line; reported under the code given at construction."""

    def __init__(self, code: str, message: str):
        self._code = code
        super().__init__(message)

    @property
    def code(self) -> str:
        return self._code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        code = "UnknownSubcommand" if "invalid choice" in message or "required: command" in message else "BadFlag"
        raise UsageError(code, message)


def _input(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError("BadPath", f"input file {path!r} does not exist")
    return p


def _output(path: str) -> Path:
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if not parent.is_dir():
        raise UsageError("BadPath", f"output directory {str(parent)!r} does not exist")
    return p


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file so failures leave nothing behind."""
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- subcommands --------------------------------------------------------------


def render_lifetable_text(table: LifeTable) -> str:
    header = f"{'period':>6} {'beginning':>10} {'ended':>7} {'censored':>9} {'hazard':>8} {'survivor':>9}"
    lines = [header, "-" * len(header)]
    for r in table.rows():
        lines.append(
            f"{r['period']:>6} {r['beginning']:>10} {r['ended']:>7} {r['censored']:>9} "
            f"{r['hazard']:>8.4f} {r['survivor']:>9.4f}"
        )
    h, renewal = overall_hazard(table)
    lines.append("")
    lines.append(f"spells: {int(table.beginning[0])}, exits: {int(table.ended.sum())}, censored: {int(table.censored.sum())}")
    lines.append(f"overall hazard rate: {h:.4f}")
    lines.append(f"renewal rate: {renewal * 100:.1f}%")
    try:
        lines.append(f"median lifetime: {median_lifetime(table):.2f} years")
    except SponsorSurvError:
        lines.append("median lifetime: undefined (survivor curve stays above .5)")
    return "\n".join(lines) + "\n"


def cmd_lifetable(args) -> None:
    path = _input(args.panel)
    out = _output(args.out) if args.out else None
    table = life_table(parse_panel_csv(path))
    if args.format == "csv":
        text = table.to_csv()
    elif args.format == "json":
        h, renewal = overall_hazard(table)
        try:
            median = median_lifetime(table)
        except SponsorSurvError:
            median = None
        doc = {
            "rows": json.loads(table.to_json()),
            "overall_hazard": h,
            "renewal_rate": renewal,
            "median_lifetime": median,
        }
        text = json.dumps(doc, indent=2) + "\n"
    else:
        text = render_lifetable_text(table)
    _emit(text, out)


def cmd_fit(args) -> None:
    from .report import hierarchical_fit, render_json, render_text

    path = _input(args.panel)
    spec_arg = args.blocks if args.blocks == "default" else str(_input(args.blocks))
    model_out = _output(args.model_out)
    report_out = _output(args.out) if args.out else None
    spec = BlockSpec.load(spec_arg)
    data = parse_panel_csv(path)
    results = hierarchical_fit(data, spec, ties=args.ties, tol=args.tol, max_iter=args.max_iter)
    reports = [r for _, r in results]
    text = render_json(reports) if args.format == "json" else render_text(reports)
    write_atomic(model_out, results[-1][0].to_json())
    _emit(text, report_out)


def cmd_predict(args) -> None:
    model = CoxModel.load(_input(args.model))
    profile_path = _input(args.profile)
    plot_out = _output(args.plot) if args.plot else None
    profile = load_profile(model, profile_path)
    if args.fee is not None:
        profile = replace(profile, annual_fee=args.fee)
    if args.tenure is not None:
        profile = replace(profile, current_tenure=args.tenure)
    report = forecast(model, profile, args.horizon, args.form)
    if plot_out:
        from .plotting import survival_curves_svg

        write_atomic(plot_out, survival_curves_svg({profile.sponsorship_id: report.curve}))
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", None)


def cmd_audit(args) -> None:
    model = CoxModel.load(_input(args.model))
    portfolio_path = _input(args.portfolio)
    plot_out = _output(args.plot) if args.plot else None
    profiles = read_portfolio_csv(model, portfolio_path)
    records = portfolio_audit(model, profiles, args.horizon, args.form)
    text = render_audit_json(records) if args.format == "json" else render_audit_text(records)
    if plot_out:
        from .plotting import survival_curves_svg

        curves = {p.sponsorship_id: survival_profile(model, p, args.horizon, args.form) for p in profiles}
        write_atomic(plot_out, survival_curves_svg(dict(sorted(curves.items()))))
    _emit(text, None)


def cmd_simulate(args) -> None:
    spec = GeneratorSpec.load(_input(args.spec))
    out = _output(args.out)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    write_atomic(out, render_panel_csv(generate_panel(spec)))


def cmd_plot(args) -> None:
    from .plotting import lifetable_svg

    table = LifeTable.from_csv(_input(args.lifetable))
    out = _output(args.out)
    write_atomic(out, lifetable_svg(table, args.bandwidth))


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        write_atomic(path, text)


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sponsorsurv", description="Survival analysis of sponsorship renewals.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("lifetable", help="life table, overall hazard and median lifetime of a panel")
    p.add_argument("panel", help="panel CSV")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--out", help="write to this file instead of standard output")
    p.set_defaults(func=cmd_lifetable)

    p = sub.add_parser("fit", help="hierarchical Cox fit with block Wald tests")
    p.add_argument("panel", help="panel CSV")
    p.add_argument("--blocks", default="default", help='block specification JSON, or "default"')
    p.add_argument("--ties", choices=("efron", "breslow"), default="efron")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--model-out", default="model.json", help="where to save the final model (default model.json)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="write the report to this file instead of standard output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="renewal, duration and revenue forecast for one profile")
    p.add_argument("--model", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--fee", type=float, help="annual fee; overrides the profile's")
    p.add_argument("--tenure", type=int, help="years already completed; overrides the profile's")
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    p.add_argument("--form", choices=("exponential", "product"), default="exponential")
    p.add_argument("--plot", help="also write the survival curve as SVG")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("audit", help="rank a portfolio by near-term exit probability")
    p.add_argument("--model", required=True)
    p.add_argument("--portfolio", required=True)
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    p.add_argument("--form", choices=("exponential", "product"), default="exponential")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--plot", help="also write one survival curve per sponsor as SVG")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("simulate", help="generate a synthetic panel")
    p.add_argument("--spec", required=True, help="generator specification JSON")
    p.add_argument("--out", required=True, help="panel CSV to write")
    p.add_argument("--seed", type=int, help="override the specification's seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot", help="survivor function and smoothed hazard as SVG")
    p.add_argument("--lifetable", required=True, help="life table CSV from `lifetable --format csv`")
    p.add_argument("--out", required=True)
    p.add_argument("--bandwidth", type=float, default=3.0)
    p.set_defaults(func=cmd_plot)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    text = str(message)
    code = category.__name__
    if text.startswith(code):
        text = text[len(code):].lstrip(":( ").rstrip()
    sys.stderr.write(f"warning: {code}: {text}\n")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "horizon", 1) is not None and getattr(args, "horizon", 1) < 1:
            raise UsageError("BadFlag", "--horizon must be at least 1")
        with warnings.catch_warnings():
            warnings.showwarning = _show_warning
            args.func(args)
    except SponsorSurvError as exc:
        sys.stderr.write(f"error: {exc.code}: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"error: IOError: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
