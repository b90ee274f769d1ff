"""Command-line front end.

Subcommands: ``loss`` scores content/style/pastiche triples into a report
CSV; ``stylize`` optimizes a single pastiche; ``sweep`` runs a grid of
stylization tasks; ``analyze`` computes correlations, histograms, and
linear fits over report CSVs; ``deception`` evaluates nearest-neighbor
artist agreement between two feature banks; ``mcbounds`` simulates the
expectation bounds from a moment-spec JSON; ``gradcheck`` verifies the
analytic gradients; ``selftest`` runs the embedded example suite.

Exit codes: 0 on success, 2 for usage errors, 3 for data or configuration
errors (diagnostics go to stderr). All randomness descends from ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import fileio, selftest
from .analysis import (MomentSpec, correlation_report, deception_rate, histogram,
                       linear_fit, mc_expectation_bounds, relaxed_bounds)
from .exceptions import DataError, StyleBalanceError
from .featnet import build
from .fileio import RunConfig, format_float, load_run_config
from .gradients import (FEATURE_TOL, PIXEL_TOL, STOP_GRADIENT_TOL, run_gradcheck)
from .scoring import evaluate_pair
from .stylizer import stylize, sweep
from .validation import check_identifier

IMAGE_SUFFIXES = (".ppm", ".pgm")


# ---------------------------------------------------------------------------
# argument plumbing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="JSON", help="run configuration file")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed feeding the network and the optimizer")
    p.add_argument("--weights", metavar="FILE", default=None,
                   help="load network weights instead of seeding them")


def _add_optimize(p: argparse.ArgumentParser) -> None:
    p.add_argument("--steps", type=int, default=None, help="optimization steps")
    p.add_argument("--step-size", type=float, default=None, dest="step_size")
    p.add_argument("--init", choices=["content", "noise"], default=None,
                   help="starting pixels")
    p.add_argument("--loss", choices=["classic", "balanced"], default=None,
                   dest="loss_kind", help="style metric driving the optimization")
    p.add_argument("--beta", type=float, default=None,
                   help="style weight in the combined objective")
    p.add_argument("--auto-beta", action="store_true", default=None, dest="auto_beta",
                   help="calibrate beta from the initial content/style ratio")


def _resolve_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    net, opt = cfg.net, cfg.optimize
    if args.seed is not None:
        net = replace(net, seed=args.seed)
        opt = replace(opt, seed=args.seed)
    if getattr(args, "weights", None):
        net = replace(net, weights_file=args.weights)
    loss = opt.loss
    if getattr(args, "beta", None) is not None:
        loss = replace(loss, beta=args.beta)
    overrides = {}
    for name in ("steps", "step_size", "init", "loss_kind", "auto_beta"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    opt = replace(opt, loss=loss, **overrides)
    return RunConfig(net=net, loss=loss, optimize=opt, paths=dict(cfg.paths))


def _image_id(path: Path) -> str:
    return check_identifier(path.stem, "image id", str(path))


def _images_from_dir(directory: str):
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"{directory}: not a directory")
    paths = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    images = [fileio.read_image(p) for p in paths]
    ids = [_image_id(p) for p in paths]
    return images, ids


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_loss(args) -> int:
    cfg = _resolve_config(args)
    net = build(cfg.net)
    content = fileio.read_image(args.content)
    style = fileio.read_image(args.style)
    content_id = _image_id(Path(args.content))
    style_id = _image_id(Path(args.style))
    rows = []
    if args.pastiche:
        report = evaluate_pair(net, content, style, fileio.read_image(args.pastiche),
                               cfg.loss)
        rows += fileio.report_rows(content_id, style_id, report, cfg.loss)
    else:
        pastiches, ids = _images_from_dir(args.pastiche_dir)
        if not pastiches:
            print(f"error: no {'/'.join(IMAGE_SUFFIXES)} images in {args.pastiche_dir}",
                  file=sys.stderr)
            return 2
        for pastiche, pid in zip(pastiches, ids):
            report = evaluate_pair(net, content, style, pastiche, cfg.loss)
            rows += fileio.report_rows(pid, style_id, report, cfg.loss)
    fileio.write_report_csv(args.output, rows)
    return 0


def cmd_stylize(args) -> int:
    cfg = _resolve_config(args)
    net = build(cfg.net)
    content = fileio.read_image(args.content)
    style = fileio.read_image(args.style)
    pastiche, trajectory = stylize(net, content, style, cfg.optimize)
    fileio.write_image(pastiche, args.output)
    if args.trajectory:
        fileio.write_trajectory_csv(args.trajectory, trajectory)
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    net = build(cfg.net)
    contents, content_ids = _images_from_dir(args.contents)
    styles, style_ids = _images_from_dir(args.styles)
    if not contents or not styles:
        which = args.contents if not contents else args.styles
        print(f"error: no {'/'.join(IMAGE_SUFFIXES)} images in {which}", file=sys.stderr)
        return 2
    keep = args.pastiche_dir is not None
    result = sweep(net, contents, styles, cfg.optimize, pairing=args.pairing,
                   content_ids=content_ids, style_ids=style_ids, keep_pastiches=keep)
    fileio.write_sweep_csv(args.output, result)
    if keep:
        out = Path(args.pastiche_dir)
        out.mkdir(parents=True, exist_ok=True)
        for row, img in zip(result.rows, result.pastiches):
            fileio.write_image(img, out / f"{row.content_id}__{row.style_id}.ppm")
    return 0


def cmd_analyze_corr(args) -> int:
    rows = fileio.read_report_csv(args.report)
    table = fileio.loss_table_from_reports(rows, column=args.column)
    annotations = fileio.read_annotations(args.annotations)
    result = correlation_report(table, annotations)
    out_rows = [[col, format_float(result[col])] for col in table.columns]
    _emit(_csv_text(["column", "pearson_r"], out_rows), args.output)
    return 0


def cmd_analyze_hist(args) -> int:
    rows = fileio.read_report_csv(args.report)
    values = [getattr(r, args.column) for r in rows if r.tap == args.tap]
    if not values:
        raise DataError(f"{args.report}: no rows with tap {args.tap!r}")
    lo = args.lo if args.lo is not None else min(values)
    hi = args.hi if args.hi is not None else max(values)
    h = histogram(values, args.bins, lo, hi)
    out_rows = [[format_float(-float("inf")), format_float(h.lo), str(h.underflow)]]
    edges = h.edges()
    for i, count in enumerate(h.counts):
        out_rows.append([format_float(edges[i]), format_float(edges[i + 1]), str(count)])
    out_rows.append([format_float(h.hi), format_float(float("inf")), str(h.overflow)])
    _emit(_csv_text(["bin_lo", "bin_hi", "count"], out_rows), args.output)
    return 0


def cmd_analyze_fit(args) -> int:
    rows = fileio.read_report_csv(args.report)
    table_x = fileio.loss_table_from_reports(rows, column=args.x_column)
    table_y = fileio.loss_table_from_reports(rows, column=args.y_column)
    taps = [args.tap] if args.tap else list(table_x.columns)
    out_rows = []
    for tap in taps:
        if tap not in table_x.columns:
            raise DataError(f"{args.report}: no column for tap {tap!r}")
        i = table_x.columns.index(tap)
        slope, intercept, r = linear_fit(table_x.values[:, i], table_y.values[:, i])
        out_rows.append([tap, format_float(slope), format_float(intercept),
                         format_float(r)])
    _emit(_csv_text(["tap", "slope", "intercept", "pearson_r"], out_rows), args.output)
    return 0


def cmd_deception(args) -> int:
    stylized = fileio.read_feature_bank(args.stylized)
    styles = fileio.read_feature_bank(args.styles)
    rate = deception_rate(stylized, styles)
    sys.stdout.write(format_float(rate) + "\n")
    return 0


_MOMENT_KEYS = {
    "discrete": {"kind", "values", "probs"},
    "point": {"kind", "value"},
    "uniform": {"kind", "lo", "hi"},
}


def _moment_from_json(doc, where: str) -> MomentSpec:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise DataError(f"{where}: expected an object with a \"kind\" field")
    kind = doc["kind"]
    if kind not in _MOMENT_KEYS:
        raise DataError(f"{where}: unknown kind {kind!r} "
                        f"(one of {sorted(_MOMENT_KEYS)})")
    unknown = sorted(set(doc) - _MOMENT_KEYS[kind])
    if unknown:
        raise DataError(f"{where}: unknown keys {unknown} for kind {kind!r}")
    if kind == "discrete":
        if "values" not in doc:
            raise DataError(f"{where}: discrete spec needs \"values\"")
        return MomentSpec.discrete(doc["values"], doc.get("probs"))
    if kind == "point":
        if "value" not in doc:
            raise DataError(f"{where}: point spec needs \"value\"")
        return MomentSpec.point(doc["value"])
    if "lo" not in doc or "hi" not in doc:
        raise DataError(f"{where}: uniform spec needs \"lo\" and \"hi\"")
    return MomentSpec.uniform(doc["lo"], doc["hi"])


def cmd_mcbounds(args) -> int:
    path = args.spec
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise DataError(f"{path}: top level must be an object")
    allowed = {"a", "b", "trials", "k"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise DataError(f"{path}: unknown keys {unknown} (allowed: {sorted(allowed)})")
    if "a" not in doc or "b" not in doc:
        raise DataError(f"{path}: needs \"a\" and \"b\" moment specs")
    a = _moment_from_json(doc["a"], f"{path}: a")
    b = _moment_from_json(doc["b"], f"{path}: b")
    trials = args.trials if args.trials is not None else int(doc.get("trials", 100_000))
    seed = args.seed if args.seed is not None else 0
    result = mc_expectation_bounds(a, b, trials=trials, seed=seed)
    out_rows = [
        ["estimate", format_float(result.estimate)],
        ["stderr", format_float(result.stderr)],
        ["lower", format_float(result.lower)],
        ["upper", format_float(result.upper)],
        ["within", "true" if result.within else "false"],
    ]
    if "k" in doc:
        rl, ru = relaxed_bounds(a, b, float(doc["k"]))
        out_rows.append(["relaxed_lower", format_float(rl)])
        out_rows.append(["relaxed_upper", format_float(ru)])
    _emit(_csv_text(["name", "value"], out_rows), args.output)
    return 0


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 0
    summary = run_gradcheck(seed=seed, feature_instances=args.instances,
                            pixel_instances=args.pixel_instances,
                            pixel_size=args.size)
    print(f"content gradient max relative error: {summary.content:.3e}")
    print(f"classic style gradient max relative error: {summary.classic:.3e}")
    print(f"balanced style gradient max relative error: {summary.balanced:.3e}")
    print(f"pixel backprop max relative error: {summary.pixels:.3e}")
    print(f"stop-gradient identity max relative gap: {summary.stop_gradient:.3e}")
    if summary.passed():
        print(f"gradcheck: PASS (feature tolerance {FEATURE_TOL:g}, "
              f"pixel tolerance {PIXEL_TOL:g}, identity tolerance {STOP_GRADIENT_TOL:g})")
        return 0
    print("gradcheck: FAIL", file=sys.stderr)
    return 1


def cmd_selftest(args) -> int:
    results = selftest.run()
    for r in results:
        print(f"{'ok  ' if r.ok else 'FAIL'} {r.name}" + ("" if r.ok else f": {r.message}"))
    failures = [r for r in results if not r.ok]
    if args.out_dir and not failures:
        for name in selftest.write_artifacts(args.out_dir):
            print(f"wrote {Path(args.out_dir) / name}")
    print(f"selftest: {len(results) - len(failures)}/{len(results)} fixtures passed")
    if failures:
        print(f"selftest: first failure: {failures[0].name}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylebalance",
        description="Gram-based style losses with normalization-aware scoring, "
                    "pixel-space stylization, and loss-statistics tooling.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("loss", help="score pastiches against a content/style pair")
    _add_common(p)
    p.add_argument("--content", required=True, metavar="IMAGE")
    p.add_argument("--style", required=True, metavar="IMAGE")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pastiche", metavar="IMAGE")
    group.add_argument("--pastiche-dir", metavar="DIR", dest="pastiche_dir")
    p.add_argument("-o", "--output", required=True, metavar="CSV",
                   help="report table destination")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("stylize", help="optimize a pastiche for one pair")
    _add_common(p)
    _add_optimize(p)
    p.add_argument("--content", required=True, metavar="IMAGE")
    p.add_argument("--style", required=True, metavar="IMAGE")
    p.add_argument("-o", "--output", required=True, metavar="IMAGE",
                   help="pastiche destination (binary pixmap)")
    p.add_argument("--trajectory", metavar="CSV",
                   help="write per-step totals of the driving objective")
    p.set_defaults(func=cmd_stylize)

    p = sub.add_parser("sweep", help="stylize a grid of content/style pairs")
    _add_common(p)
    _add_optimize(p)
    p.add_argument("--contents", required=True, metavar="DIR")
    p.add_argument("--styles", required=True, metavar="DIR")
    p.add_argument("--pairing", choices=["pairs", "zip"], default="pairs")
    p.add_argument("-o", "--output", required=True, metavar="CSV")
    p.add_argument("--pastiche-dir", metavar="DIR", dest="pastiche_dir",
                   help="also write every final pastiche here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="statistics over report CSVs")
    asub = p.add_subparsers(dest="analysis", required=True, metavar="kind")

    pa = asub.add_parser("corr", help="per-column correlation against annotations")
    pa.add_argument("--report", required=True, metavar="CSV")
    pa.add_argument("--annotations", required=True, metavar="CSV")
    pa.add_argument("--column", choices=["classic", "sup", "inf", "balanced"],
                    default="balanced", help="which measured value to correlate")
    pa.add_argument("-o", "--output", metavar="CSV", help="default: stdout")
    pa.set_defaults(func=cmd_analyze_corr)

    pa = asub.add_parser("hist", help="histogram of one report column")
    pa.add_argument("--report", required=True, metavar="CSV")
    pa.add_argument("--column", choices=["classic", "sup", "inf", "balanced"],
                    default="classic")
    pa.add_argument("--tap", default="total", help="which per-tap rows to read")
    pa.add_argument("--bins", type=int, default=10)
    pa.add_argument("--lo", type=float, default=None, help="default: data minimum")
    pa.add_argument("--hi", type=float, default=None, help="default: data maximum")
    pa.add_argument("-o", "--output", metavar="CSV", help="default: stdout")
    pa.set_defaults(func=cmd_analyze_hist)

    pa = asub.add_parser("fit", help="least-squares fit between two report columns")
    pa.add_argument("--report", required=True, metavar="CSV")
    pa.add_argument("--x-column", choices=["classic", "sup", "inf", "balanced"],
                    default="sup", dest="x_column")
    pa.add_argument("--y-column", choices=["classic", "sup", "inf", "balanced"],
                    default="classic", dest="y_column")
    pa.add_argument("--tap", default=None, help="default: every tap plus the totals")
    pa.add_argument("-o", "--output", metavar="CSV", help="default: stdout")
    pa.set_defaults(func=cmd_analyze_fit)

    p = sub.add_parser("deception",
                       help="nearest-neighbor artist agreement of two feature banks")
    p.add_argument("--stylized", required=True, metavar="CSV")
    p.add_argument("--styles", required=True, metavar="CSV")
    p.set_defaults(func=cmd_deception)

    p = sub.add_parser("mcbounds", help="simulate the loss-expectation bounds")
    p.add_argument("--spec", required=True, metavar="JSON",
                   help="moment specifications for the two Gram distributions")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--output", metavar="CSV", help="default: stdout")
    p.set_defaults(func=cmd_mcbounds)

    p = sub.add_parser("gradcheck", help="verify analytic gradients numerically")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--instances", type=int, default=25,
                   help="feature-level random instances")
    p.add_argument("--pixel-instances", type=int, default=4, dest="pixel_instances",
                   help="through-network instances")
    p.add_argument("--size", type=int, default=8, help="image side for pixel checks")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("selftest", help="run the embedded example suite")
    p.add_argument("--out-dir", metavar="DIR", dest="out_dir",
                   help="also write the deterministic artifact set here")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        return args.func(args)
    except StyleBalanceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    raise SystemExit(main(sys.argv[1:]))
