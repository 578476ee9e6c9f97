"""``calibkit`` command line.

Every subcommand writes its outputs under ``--out-dir`` (default
``$CALIBKIT_OUT_DIR`` or ``./calibkit_out``) and prints a JSON summary to
stdout. Failures print ``{"error": ..., "message": ...}`` to stderr and exit
nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..biaslab import bias_vs_bins_study, mc_bias
from ..core import BinningScheme, BinningSpec, top_label_view
from ..decision import cost_plane
from ..analysis import fit_power_law
from ..errors import CalibkitError, ConfigError
from ..metrics import EceConfig, Norm, brier, classification_error, ece, nll, reliability_data
from ..recal import apply_temperature, fit_temperature, split_holdout
from ..synth import GeneratorSpec, generate
from .evaluate import run_evaluate
from .io import (
    atomic_write,
    default_out_dir,
    dump_json,
    format_of,
    load_manifest,
    load_points,
    load_predictions,
    write_predictions,
)
from .plots import emit_plot_data

EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _seed(args, default=0):
    return default if args.seed is None else args.seed


def _out(args) -> Path:
    return Path(args.out_dir) if args.out_dir else default_out_dir()


def cmd_evaluate(args):
    manifest = load_manifest(args.manifest)
    if args.seed is not None:
        manifest.config.seed = args.seed
    out = _out(args)
    report = run_evaluate(manifest, out_dir=out)
    files = emit_plot_data(report, out, name="report")
    return {"report": str(files[0]), "table": str(files[1]),
            "entries": len(report["entries"]), "failures": len(report["failures"])}


def cmd_recalibrate(args):
    preds = load_predictions(args.preds, args.input_format)
    fit_set, eval_set = split_holdout(preds, args.fraction, _seed(args))
    temp = fit_temperature(fit_set)
    scaled = apply_temperature(eval_set, temp.value)
    cfg = EceConfig()
    result = {
        "source": str(args.preds),
        "fraction": args.fraction,
        "seed": _seed(args),
        "n_fit": fit_set.n,
        "n_eval": eval_set.n,
        "temperature": temp.to_dict(),
        "ece_config": cfg.to_dict(),
        "unscaled": {"classification_error": classification_error(eval_set), "ece": ece(eval_set, cfg),
                     "nll": nll(eval_set), "brier": brier(eval_set)},
        "scaled": {"classification_error": classification_error(scaled), "ece": ece(scaled, cfg),
                   "nll": nll(scaled), "brier": brier(scaled)},
    }
    out = _out(args)
    stem = Path(args.preds).stem
    pred_path = write_predictions(scaled, out / f"{stem}_scaled.csv")
    res_path = atomic_write(out / f"{stem}_recalibration.json", dump_json(result))
    return {"result": str(res_path), "scaled_predictions": str(pred_path),
            "temperature": temp.value}


def cmd_bias_study(args):
    gen = GeneratorSpec(law=args.law, params=tuple(args.params), k=args.k, seed=_seed(args))
    rows = bias_vs_bins_study(gen, args.n, args.bins, args.trials, _seed(args), norm=args.norm)
    out = _out(args)
    summary = {"generator": gen.to_dict(), "n": args.n, "rows": rows}
    if args.lemma_bins:
        cfg = EceConfig(BinningSpec(BinningScheme.EQUAL_MASS, args.lemma_bins), norm=Norm.L2)
        summary["lemma"] = mc_bias(gen, cfg, args.n, args.trials, _seed(args)).to_dict()
    files = [atomic_write(out / "bias_study.json", dump_json(summary))]
    if args.format == "csv":
        files += emit_plot_data(rows, out, name="bias_vs_bins")
    return {"files": [str(f) for f in files], "rows": rows}


def cmd_cost_plane(args):
    a = load_predictions(args.preds_a, args.input_format)
    b = load_predictions(args.preds_b, args.input_format)
    plane = cost_plane(top_label_view(a), top_label_view(b), args.rho, args.rates,
                       model_a=Path(args.preds_a).stem, model_b=Path(args.preds_b).stem)
    files = emit_plot_data(plane, _out(args), name="cost_plane", svg=not args.no_svg)
    return {"files": [str(f) for f in files], "shape": list(plane.relative.shape)}


def cmd_fit_powerlaw(args):
    fit = fit_power_law(load_points(args.points), args.resamples, _seed(args))
    path = atomic_write(_out(args) / "powerlaw.json", dump_json(fit.to_dict()))
    return {"file": str(path), **fit.to_dict()}


def cmd_reliability(args):
    preds = load_predictions(args.preds, args.input_format)
    rel = reliability_data(preds, BinningSpec(args.scheme, args.bins), args.hist_bins)
    files = emit_plot_data(rel, _out(args), name=f"reliability_{Path(args.preds).stem}",
                           svg=not args.no_svg)
    return {"files": [str(f) for f in files]}


def cmd_synth(args):
    try:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read generator spec {args.spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"generator spec is not valid JSON: {exc}") from exc
    n = args.n if args.n is not None else raw.pop("n", None)
    raw.pop("n", None)
    name = args.name or raw.pop("name", None)
    raw.pop("name", None)
    if n is None:
        raise ConfigError("generator spec needs 'n' (or pass --n)")
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        spec = GeneratorSpec.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(f"bad generator spec: {exc}") from exc
    preds = generate(spec, int(n))
    name = name or f"synth_seed{spec.seed}"
    path = write_predictions(preds, _out(args) / f"{name}.csv")
    return {"file": str(path), "format": format_of(preds.kind), "n": preds.n, "k": preds.k,
            "generator": spec.to_dict()}


def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, default):
        parser.add_argument("--out-dir", default=default(None),
                            help="output directory (env CALIBKIT_OUT_DIR)")
        parser.add_argument("--format", choices=["json", "csv"], default=default("json"),
                            help="extra table format for study outputs")
        parser.add_argument("--seed", type=int, default=default(None))
        parser.add_argument("-v", "--verbose", action="store_true", default=default(False))

    p = argparse.ArgumentParser(prog="calibkit", description=__doc__.splitlines()[0])
    global_flags(p, lambda v: v)
    # same flags after the subcommand; SUPPRESS keeps them from clobbering
    # values given before it
    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, lambda v: argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    def preds_format(sp):
        sp.add_argument("--input-format", choices=["csv_logits", "csv_probs"], default="csv_logits")

    sp = add("evaluate", help="run a manifest")
    sp.add_argument("manifest")
    sp.set_defaults(func=cmd_evaluate)

    sp = add("recalibrate", help="fit a temperature on a holdout split")
    sp.add_argument("preds")
    sp.add_argument("--fraction", type=float, default=0.2)
    preds_format(sp)
    sp.set_defaults(func=cmd_recalibrate)

    sp = add("bias-study", help="estimator bias vs bin count on a calibrated generator")
    sp.add_argument("--bins", type=_ints, default=[10, 100, 1000])
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--law", choices=["uniform", "beta", "point"], default="uniform")
    sp.add_argument("--params", type=_floats, default=[0.5, 1.0])
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--norm", choices=["l1", "l2", "rms"], default="l1")
    sp.add_argument("--lemma-bins", type=int, default=None,
                    help="also compare the squared estimator's bias with its closed form")
    sp.set_defaults(func=cmd_bias_study)

    sp = add("cost-plane", help="relative selective-prediction cost of two models")
    sp.add_argument("preds_a")
    sp.add_argument("preds_b")
    sp.add_argument("--rho", type=_floats, default=[round(0.1 * i, 10) for i in range(1, 11)])
    sp.add_argument("--rates", type=_floats, default=[round(0.1 * i, 10) for i in range(10)])
    sp.add_argument("--no-svg", action="store_true")
    preds_format(sp)
    sp.set_defaults(func=cmd_cost_plane)

    sp = add("fit-powerlaw", help="fit y = a x^k with bootstrap intervals")
    sp.add_argument("points")
    sp.add_argument("--resamples", type=int, default=2000)
    sp.set_defaults(func=cmd_fit_powerlaw)

    sp = add("reliability", help="reliability diagram data")
    sp.add_argument("preds")
    sp.add_argument("--bins", type=int, default=15)
    sp.add_argument("--scheme", choices=["equal_width", "equal_mass"], default="equal_width")
    sp.add_argument("--hist-bins", type=int, default=20)
    sp.add_argument("--no-svg", action="store_true")
    preds_format(sp)
    sp.set_defaults(func=cmd_reliability)

    sp = add("synth", help="write a synthetic prediction file from a JSON generator spec")
    sp.add_argument("spec")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--name", default=None)
    sp.set_defaults(func=cmd_synth)
    return p


def _fail(payload, code):
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = args.func(args)
    except ConfigError as exc:
        payload = exc.to_dict()
        report = getattr(exc, "report", None)
        if report is not None:
            payload["failures"] = report["failures"]
        return _fail(payload, EXIT_CONFIG)
    except CalibkitError as exc:
        return _fail(exc.to_dict(), EXIT_RUNTIME)
    sys.stdout.write(json.dumps(summary, default=_jsonable) + "\n")
    return 0


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    return str(o)


if __name__ == "__main__":
    sys.exit(main())
