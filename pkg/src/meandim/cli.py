"""Command-line experiment runner.

Subcommands::

    estimate          one estimate per strategy -> CSV + JSON
    compare-variance  replicated variances vs closed-form oracles -> CSV + JSON
    oracles           dump closed-form values for a configured function
    histograms        build per-pixel MDHS fixtures from an image archive
    maps              per-pixel index maps -> 16-bit PGM + JSON
    report            mean-dimension table over samplers/outputs -> CSV

All randomness flows from one required seed (config ``seed`` or ``--seed``),
so every artifact is byte-reproducible.  Exit codes: 0 success, 2 config
problem, 3 evaluation failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import nn, testfns
from .blackbox import EvaluationError
from .estimators import Strategy, estimate_delta, replicate_variance
from .inputs import Bernoulli01, InputModel, Uniform01
from .oracles import covariance_sign_condition, var_additive, var_product
from .output import ESTIMATE_FIELDS, write_csv, write_json, write_pgm16

EXIT_CONFIG = 2
EXIT_EVAL = 3

REPORT_FIELDS = [
    "sampler", "target", "y", "nu_hat", "delta_hat", "sigma2_hat",
    "se_delta", "degenerate", "n_evals", "strategy", "N", "seed",
]
VARIANCE_FIELDS = [
    "strategy", "N", "R", "d", "nvar_emp", "nvar_se", "nvar_oracle",
    "ratio_emp_oracle", "mean_delta", "seed",
]
ORACLE_FIELDS = ["strategy", "N", "d", "variance", "n_times_variance"]


class ConfigError(ValueError):
    pass


def _load_config(args) -> dict:
    config = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            config = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad config JSON: {exc}") from exc
    for key in ("seed", "N", "R", "threads"):
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    if getattr(args, "strategy", None):
        config["strategies"] = args.strategy
    if getattr(args, "order", None):
        config["order"] = [int(t) for t in args.order.split(",")]
    if config.get("seed") is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    return config


def _strategies(config) -> list[Strategy]:
    names = config.get("strategies") or [s.value for s in Strategy]
    try:
        return [Strategy(name) for name in names]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _model_from_config(desc: dict) -> InputModel:
    # histogram coordinates may reference an MDHS fixture file instead of
    # carrying inline parameters
    if "mdhs" in desc:
        path = Path(desc["mdhs"])
        if not path.exists():
            raise ConfigError(f"MDHS fixture not found: {path}")
        _, hists = nn.load_histograms(path, mode=desc.get("mode", "smooth"))
        return InputModel(hists)
    return InputModel.from_dict(desc)


def _function(config) -> testfns.TestFunction:
    desc = config.get("function")
    if not isinstance(desc, dict):
        raise ConfigError("config needs a 'function' descriptor object")
    try:
        fn = testfns.from_descriptor(desc)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad function descriptor: {exc}") from exc
    if "model" in config:
        try:
            fn.model = _model_from_config(config["model"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad model descriptor: {exc}") from exc
        if fn.model.dims != fn.blackbox.dims:
            raise ConfigError("model dimension does not match the function")
    return fn


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _positive(config, key, minimum=1) -> int:
    value = config.get(key)
    if value is None or int(value) < minimum:
        raise ConfigError(f"config '{key}' must be an integer >= {minimum}")
    return int(value)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_estimate(args) -> int:
    config = _load_config(args)
    fn = _function(config)
    N = _positive(config, "N")
    seed = int(config["seed"])
    order = config.get("order")
    records = []
    for strategy in _strategies(config):
        est = estimate_delta(
            fn.blackbox, fn.model, strategy, N, seed,
            order=order, variance_floor=config.get("variance_floor"),
        )
        records.append(est.to_record(R=1))
    out = _out_dir(args)
    write_csv(out / "estimates.csv", ESTIMATE_FIELDS, records)
    write_json(out / "estimates.json", {"function": fn.name, "records": records})
    for rec in records:
        print(f"{rec['strategy']:18s} delta={rec['delta_hat']:.6g} "
              f"nu={rec['nu_hat']:.6g} evals={rec['n_evals']}")
    return 0


def _oracle_value(fn: testfns.TestFunction, strategy: Strategy, N: int, order) -> float | None:
    if fn.profiles is None:
        return None
    kind = (fn.descriptor or {}).get("kind", fn.name)
    if kind.startswith("additive") or fn.name.startswith("additive"):
        return var_additive(strategy.value, fn.profiles, N)
    return var_product(strategy.value, fn.profiles, N, order=order)


def cmd_compare_variance(args) -> int:
    config = _load_config(args)
    fn = _function(config)
    N = _positive(config, "N")
    R = _positive(config, "R", minimum=2)
    if R < 100:
        print(f"warning: R={R} gives noisy variance estimates; use R >= 100",
              file=sys.stderr)
    seed = int(config["seed"])
    order = config.get("order")
    threads = int(config.get("threads", 1))
    rows = []
    emp = {}
    for strategy in _strategies(config):
        rr = replicate_variance(
            fn.blackbox, fn.model, strategy, N, R, seed,
            order=order, threads=threads,
        )
        oracle = _oracle_value(fn, strategy, N, order)
        emp[strategy.value] = rr.var_delta
        rows.append({
            "strategy": strategy.value,
            "N": N, "R": R, "d": fn.model.dims,
            "nvar_emp": N * rr.var_delta,
            "nvar_se": N * rr.se_var_delta,
            "nvar_oracle": None if oracle is None else N * oracle,
            "ratio_emp_oracle": None if oracle is None else rr.var_delta / oracle,
            "mean_delta": rr.mean_delta,
            "seed": seed,
        })
    out = _out_dir(args)
    write_csv(out / "variances.csv", VARIANCE_FIELDS, rows)
    summary: dict = {"function": fn.name, "rows": rows}
    if Strategy.RADIAL.value in emp and Strategy.NAIVE.value in emp:
        summary["ratio_radial_over_naive"] = emp[Strategy.RADIAL.value] / emp[Strategy.NAIVE.value]
    if Strategy.RADIAL.value in emp and Strategy.WINDING_TRUNCATED.value in emp:
        summary["ratio_radial_over_truncated"] = (
            emp[Strategy.RADIAL.value] / emp[Strategy.WINDING_TRUNCATED.value]
        )
    if fn.profiles is not None:
        summary["kurtosis_flags"] = covariance_sign_condition(fn.profiles).tolist()
    write_json(out / "variances.json", summary)
    for row in rows:
        oracle = row["nvar_oracle"]
        suffix = "" if oracle is None else f" oracle={oracle:.6g}"
        print(f"{row['strategy']:18s} N*var={row['nvar_emp']:.6g}{suffix}")
    return 0


def cmd_oracles(args) -> int:
    config = _load_config(args)
    fn = _function(config)
    if fn.profiles is None:
        raise ConfigError(f"function {fn.name!r} has no closed-form variance oracle")
    N = _positive(config, "N")
    order = config.get("order")
    rows = []
    for strategy in _strategies(config):
        value = _oracle_value(fn, strategy, N, order)
        rows.append({
            "strategy": strategy.value, "N": N, "d": fn.model.dims,
            "variance": value, "n_times_variance": N * value,
        })
    out = _out_dir(args)
    write_csv(out / "oracles.csv", ORACLE_FIELDS, rows)
    payload = {
        "function": fn.name,
        "nu": fn.nu,
        "sigma2": fn.sigma2,
        "delta": fn.delta,
        "kurtosis_flags": covariance_sign_condition(fn.profiles).tolist(),
        "rows": rows,
    }
    write_json(out / "oracles.json", payload)
    for row in rows:
        print(f"{row['strategy']:18s} N*var={row['n_times_variance']:.6g}")
    return 0


def cmd_histograms(args) -> int:
    if args.csv:
        images, labels = nn.load_archive(args.csv)
    else:
        if not args.images or not args.labels:
            raise ConfigError("need --images and --labels (or --csv)")
        images, labels = nn.load_archive(args.images, args.labels)
    histset = nn.build_histograms(images, labels, levels=args.levels)
    out = _out_dir(args)
    paths = histset.save(out)
    write_json(out / "histograms.json", {
        "levels": histset.levels,
        "height": histset.height,
        "width": histset.width,
        "counts": {str(k): v for k, v in histset.counts.items()},
        "metadata": histset.metadata,
        "files": [p.name for p in paths],
    })
    print(f"wrote {len(paths)} MDHS files to {out}")
    return 0


def _sampler_model(args, net: nn.NetworkSpec) -> tuple[str, InputModel]:
    dims = net.n_inputs
    if args.sampler == "binary":
        return "binary", InputModel.iid(Bernoulli01(), dims)
    if args.sampler == "uniform":
        return "uniform", InputModel.iid(Uniform01(), dims)
    if args.sampler == "mdhs":
        if not args.mdhs:
            raise ConfigError("--sampler mdhs needs --mdhs FILE")
        class_id, hists = nn.load_histograms(args.mdhs, mode=args.hist_mode)
        if len(hists) != dims:
            raise ConfigError(f"{args.mdhs} has {len(hists)} pixels, network wants {dims}")
        name = "combined" if class_id < 0 else f"h{class_id}"
        return name, InputModel(hists)
    raise ConfigError(f"unknown sampler {args.sampler!r}")


def cmd_maps(args) -> int:
    if args.seed is None:
        raise ConfigError("a seed is required (--seed)")
    net = nn.load_network(args.net)
    name, model = _sampler_model(args, net)
    out = _out_dir(args)
    records = []
    for y in args.y:
        imap = nn.index_maps(
            net, y, args.target, model, name,
            kind=args.kind, strategy=args.strategy, N=args.N, seed=args.seed,
        )
        stem = f"map_{args.kind}_{args.target}{y}_{name}"
        write_pgm16(out / f"{stem}.pgm", imap.values)
        write_json(out / f"{stem}.json", imap.to_record())
        records.append(stem)
        print(f"{stem}: max={imap.values.max():.6g} argmax={int(imap.values.argmax())}")
    return 0


def cmd_report(args) -> int:
    if args.seed is None:
        raise ConfigError("a seed is required (--seed)")
    net = nn.load_network(args.net)
    dims = net.n_inputs
    samplers: dict[str, InputModel] = {}
    for name in args.samplers:
        if name == "binary":
            samplers["binary"] = InputModel.iid(Bernoulli01(), dims)
        elif name == "uniform":
            samplers["uniform"] = InputModel.iid(Uniform01(), dims)
        else:
            raise ConfigError(f"unknown builtin sampler {name!r}")
    for path in args.mdhs or []:
        class_id, hists = nn.load_histograms(path, mode=args.hist_mode)
        if len(hists) != dims:
            raise ConfigError(f"{path} has {len(hists)} pixels, network wants {dims}")
        key = "combined" if class_id < 0 else f"h{class_id}"
        samplers[key] = InputModel(hists)
    if not samplers:
        raise ConfigError("no samplers selected")
    outputs = args.y or list(range(net.n_outputs))
    report = nn.mean_dimension_report(
        net, samplers, outputs, targets=args.targets,
        strategy=args.strategy, N=args.N, seed=args.seed,
        variance_floor=args.variance_floor,
    )
    out = _out_dir(args)
    write_csv(out / "report.csv", REPORT_FIELDS, report.rows())
    # pivot view per target: sampler rows x output columns, mirroring the
    # usual mean-dimension table layout
    for target in args.targets:
        rows = []
        for name in samplers:
            row = {"sampler": name}
            for y in outputs:
                cell = report.cell(name, target, int(y))
                row[str(y)] = "degenerate" if cell.degenerate else cell.nu_hat
            rows.append(row)
        write_csv(out / f"report_{target}.csv",
                  ["sampler", *[str(y) for y in outputs]], rows)
    flagged = sum(1 for c in report.cells if c.degenerate)
    print(f"report: {len(report.cells)} cells, {flagged} degenerate, -> {out / 'report.csv'}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--strategy", action="append",
                   choices=[s.value for s in Strategy])
    p.add_argument("--order", help="comma-separated update-cycle permutation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meandim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate the total-index sum and mean dimension")
    _add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("compare-variance", help="replicated variances vs oracles")
    _add_common(p)
    p.add_argument("--R", type=int, default=None)
    p.set_defaults(func=cmd_compare_variance)

    p = sub.add_parser("oracles", help="dump closed-form variance values")
    _add_common(p)
    p.set_defaults(func=cmd_oracles)

    p = sub.add_parser("histograms", help="build per-pixel MDHS fixtures")
    p.add_argument("--images")
    p.add_argument("--labels")
    p.add_argument("--csv")
    p.add_argument("--levels", type=int, default=256)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_histograms)

    p = sub.add_parser("maps", help="per-pixel index maps as PGM + JSON")
    p.add_argument("--net", required=True)
    p.add_argument("--sampler", default="uniform", choices=["binary", "uniform", "mdhs"])
    p.add_argument("--mdhs")
    p.add_argument("--hist-mode", default="smooth", choices=["smooth", "atoms"])
    p.add_argument("--y", type=int, action="append", required=True)
    p.add_argument("--target", default="g", choices=["g", "f"])
    p.add_argument("--kind", default="total", choices=["total", "lower"])
    p.add_argument("--strategy", default=Strategy.WINDING_TRUNCATED.value,
                   choices=[s.value for s in Strategy])
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_maps)

    p = sub.add_parser("report", help="mean-dimension table")
    p.add_argument("--net", required=True)
    p.add_argument("--samplers", nargs="*", default=["binary", "uniform"])
    p.add_argument("--mdhs", nargs="*")
    p.add_argument("--hist-mode", default="smooth", choices=["smooth", "atoms"])
    p.add_argument("--y", type=int, nargs="*")
    p.add_argument("--targets", nargs="*", default=["g", "f"], choices=["g", "f"])
    p.add_argument("--strategy", default=Strategy.WINDING_TRUNCATED.value,
                   choices=[s.value for s in Strategy])
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variance-floor", type=float, default=None)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, nn.FormatError, nn.ArchiveError, nn.ShapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvaluationError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
