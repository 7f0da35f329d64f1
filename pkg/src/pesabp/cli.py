"""Command-line driver: generate, label, extract, train-quality, train-detector,
evaluate, report, and pipeline (all stages in one working directory).

Settings resolve as built-in defaults < ``--config`` JSON < explicit flags.
Exit codes: 0 success, 2 validation error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import pipeline
from .environment import GenConfig, PlacementError, SchemaError
from .gnn import GinConfig
from .oracle import RadioConfig
from .plotting import render_report
from .svm import KERNELS, ConvergenceError, KernelSpec

log = logging.getLogger("pesabp")

DEFAULTS = {
    "seed": 0, "threads": 1, "count": 100, "nlos_only": True, "min_scatterers": 3, "max_scatterers": 12,
    "min_gap": 0.05, "floating": False,
    "frequency": 28e9, "tx_power": 0.0, "reflection_loss": 6.0, "diffraction_loss": 20.0,
    "diffraction": True, "wall_reflections": False,
    "q": 0.6, "test_counts": "4,8,12", "relabel": False, "blockage_reduce": "max",
    "kernel": "polynomial", "degree": 3, "sigma": 1.0, "gamma": 0.01, "offset": -1.0,
    "rbf_paper_literal": False, "C": 1.0, "tol": 1e-3, "max_passes": 20,
    "layers": 3, "mlp_hidden_layers": 2, "hidden_width": 64, "epochs": 50, "lr": 1e-3,
    "batch_size": 32, "paper_literal": False, "timing_repeats": 100,
}


def _bool(text: str) -> bool:
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _flag(p, name, **kw):
    p.add_argument(name, default=argparse.SUPPRESS, **kw)


def _bool_flag(p, name, help=None):
    p.add_argument(name, type=_bool, nargs="?", const=True, default=argparse.SUPPRESS, help=help)


def _radio_flags(p):
    _flag(p, "--frequency", type=float, help="carrier frequency in Hz (28e9)")
    _flag(p, "--tx-power", type=float, help="transmit power in dBm (0)")
    _flag(p, "--reflection-loss", type=float, help="loss per specular bounce in dB (6)")
    _flag(p, "--diffraction-loss", type=float, help="loss per edge diffraction in dB (20)")
    _bool_flag(p, "--diffraction", help="include first-order edge diffraction (true)")
    _bool_flag(p, "--wall-reflections", help="add room-wall bounces (false)")


def _split_flag(p):
    _flag(p, "--test-counts", help="scatterer counts held out for testing (4,8,12)")


def _kernel_flags(p):
    _flag(p, "--kernel", choices=KERNELS)
    _flag(p, "--degree", type=int)
    _flag(p, "--sigma", type=float)
    _flag(p, "--gamma", type=float)
    _flag(p, "--offset", type=float)
    _bool_flag(p, "--rbf-paper-literal", help="use exp(-|a-b| / 2 sigma^2) without the square")
    _flag(p, "--C", type=float)
    _flag(p, "--tol", type=float)
    _flag(p, "--max-passes", type=int)


def _gin_flags(p):
    _flag(p, "--layers", type=int)
    _flag(p, "--mlp-hidden-layers", type=int)
    _flag(p, "--hidden-width", type=int)
    _flag(p, "--epochs", type=int)
    _flag(p, "--lr", type=float)
    _flag(p, "--batch-size", type=int, help="0 trains full batch")
    _bool_flag(p, "--paper-literal", help="8 layers of 6 x 1024 MLPs")


def _gen_flags(p):
    _flag(p, "--count", type=int, help="number of environments to keep")
    _bool_flag(p, "--nlos-only", help="keep only LOS-blocked environments (true)")
    _flag(p, "--min-scatterers", type=int)
    _flag(p, "--max-scatterers", type=int)
    _flag(p, "--min-gap", type=float)
    _bool_flag(p, "--floating", help="boxes float instead of standing on the floor")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pesabp", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    common = argparse.ArgumentParser(add_help=False)
    _flag(common, "--config", help="JSON file with defaults for any flag")
    _flag(common, "--seed", type=int)
    _flag(common, "--threads", type=int)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="random environments with oracle labels")
    _flag(p, "--out", required=True)
    _gen_flags(p)
    _radio_flags(p)

    p = sub.add_parser("label", parents=[common], help="set quality classes from the training split")
    _flag(p, "--in", dest="input", required=True)
    _flag(p, "--out", required=True)
    _flag(p, "--q", type=float, help="CDF fraction of the quality threshold (0.6)")
    _bool_flag(p, "--relabel", help="recompute oracle labels first")
    _split_flag(p)
    _radio_flags(p)

    p = sub.add_parser("extract", parents=[common], help="evaluation features CSV and pending graphs JSONL")
    _flag(p, "--in", dest="input", required=True)
    _flag(p, "--features", required=True)
    _flag(p, "--graphs", required=True)
    _flag(p, "--blockage-reduce", choices=("max", "min"))

    p = sub.add_parser("train-quality", parents=[common], help="SMO SVM for channel quality")
    _flag(p, "--features", required=True)
    _flag(p, "--envs", required=True)
    _flag(p, "--model", required=True)
    _kernel_flags(p)
    _split_flag(p)

    p = sub.add_parser("train-detector", parents=[common], help="GIN for max-power scatterer detection")
    _flag(p, "--graphs", required=True)
    _flag(p, "--envs", required=True)
    _flag(p, "--model", required=True)
    _gin_flags(p)
    _split_flag(p)

    p = sub.add_parser("evaluate", parents=[common], help="held-out metrics, ROC CSVs and timing")
    for name in ("--envs", "--features", "--graphs", "--svm", "--gin", "--out-dir"):
        _flag(p, name, required=True)
    _flag(p, "--timing-repeats", type=int, help="0 skips timing")
    _split_flag(p)

    p = sub.add_parser("report", parents=[common], help="figures and TSV table from evaluate output")
    _flag(p, "--results", required=True)
    _flag(p, "--out-dir")

    p = sub.add_parser("pipeline", parents=[common], help="run every stage into one directory")
    _flag(p, "--workdir", required=True)
    _gen_flags(p)
    _radio_flags(p)
    _kernel_flags(p)
    _gin_flags(p)
    _split_flag(p)
    _flag(p, "--timing-repeats", type=int)
    return ap


def resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        if not isinstance(doc, dict):
            raise SchemaError(f"{args.config}: config must be a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in doc.items()})
    opts.update(vars(args))
    return opts


def _counts(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def gen_config(o) -> GenConfig:
    return GenConfig(seed=o["seed"], count_target=o["count"],
                     scatterer_count_range=(o["min_scatterers"], o["max_scatterers"]),
                     min_gap=o["min_gap"], nlos_only=o["nlos_only"], on_floor=not o["floating"])


def radio_config(o) -> RadioConfig:
    return RadioConfig(frequency=o["frequency"], tx_power=o["tx_power"], reflection_loss=o["reflection_loss"],
                       include_wall_reflections=o["wall_reflections"], include_diffraction=o["diffraction"],
                       diffraction_loss=o["diffraction_loss"])


def kernel_spec(o) -> KernelSpec:
    return KernelSpec(kind=o["kernel"], degree=o["degree"], sigma=o["sigma"], gamma=o["gamma"],
                      offset=o["offset"], rbf_paper_literal=o["rbf_paper_literal"])


def gin_config(o) -> GinConfig:
    if o["paper_literal"]:
        layers, mlp, width = 8, 6, 1024
    else:
        layers, mlp, width = o["layers"], o["mlp_hidden_layers"], o["hidden_width"]
    return GinConfig(num_layers=layers, mlp_hidden_layers=mlp, hidden_width=width, epochs=o["epochs"],
                     learning_rate=o["lr"], batch_size=o["batch_size"], seed=o["seed"])


def run(o: dict) -> None:
    cmd = o["command"]
    counts = _counts(o["test_counts"])
    if cmd == "generate":
        n = pipeline.generate(gen_config(o), radio_config(o), o["out"], o["threads"])
        log.info("wrote %d environments to %s", n, o["out"])
    elif cmd == "label":
        radio = radio_config(o) if o["relabel"] else None
        thr = pipeline.label(o["input"], o["out"], radio, o["q"], counts)
        log.info("quality threshold %.6f dBm", thr)
    elif cmd == "extract":
        n, g = pipeline.extract(o["input"], o["features"], o["graphs"], o["blockage_reduce"])
        log.info("wrote %d feature rows and %d graphs", n, g)
    elif cmd == "train-quality":
        m = pipeline.train_quality(o["features"], o["envs"], o["model"], kernel_spec(o), o["C"], o["tol"],
                                   o["max_passes"], counts)
        log.info("%d support vectors", len(m.dual_coef))
    elif cmd == "train-detector":
        m = pipeline.train_gin(o["graphs"], o["envs"], o["model"], gin_config(o), counts)
        log.info("final epoch loss %s", m.history[-1] if m.history else None)
    elif cmd == "evaluate":
        s = pipeline.evaluate(o["envs"], o["features"], o["graphs"], o["svm"], o["gin"], o["out_dir"], counts,
                              o["timing_repeats"])
        print(json.dumps({k: s[k] for k in ("accuracy", "auc", "detection_accuracy")}))
    elif cmd == "report":
        for path in render_report(o["results"], o.get("out_dir")):
            print(path)
    elif cmd == "pipeline":
        t0 = time.perf_counter()
        s = pipeline.run_all(o["workdir"], gen_config(o), radio_config(o), kernel_spec(o), gin_config(o),
                             o["threads"], o["timing_repeats"], counts, o["C"])
        render_report(Path(o["workdir"]) / "results")
        log.info("pipeline finished in %.1f s", time.perf_counter() - t0)
        print(json.dumps({k: s[k] for k in ("accuracy", "auc", "detection_accuracy")}))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(resolve(args))
    except (SchemaError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, PlacementError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
