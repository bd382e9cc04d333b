"""Command-line access to training, prediction, evaluation, and serving.

Thin adapters only: each subcommand calls the same module operations the
HTTP service uses, so outputs match byte for byte.  Exit codes: 0 success,
1 user/input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataset import default_label_column, encode_with, parse_csv
from .demo import artifact_from_report
from .errors import AgentError
from .gridsearch import GridSpec, default_grid, run_grid_search
from .metrics import plot_series, roc_curve
from .network import predict_batch
from .service.config import DEFAULT_TRAINING_SEED, load_config
from .vault import deserialize
from .vault import save as save_model

EXIT_OK = 0
EXIT_USER = 1
EXIT_INTERNAL = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; bad flags are user errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="medagent",
                     description="Train, inspect, and serve categorical "
                                 "risk-prediction models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", parents=[], help="grid-search a model "
                             "from a CSV dataset")
    p_train.add_argument("--dataset", required=True, help="CSV file path")
    p_train.add_argument("--label", default=None,
                         help="label column (default: last header column)")
    grid_group = p_train.add_mutually_exclusive_group()
    grid_group.add_argument("--grid", default=None,
                            help="JSON file of per-hyperparameter value lists "
                                 "(unnamed fields keep their defaults)")
    grid_group.add_argument("--defaults", action="store_true",
                            help="use the documented default grid (12 settings)")
    p_train.add_argument("--seed", type=int, default=DEFAULT_TRAINING_SEED,
                         help=f"master seed (default {DEFAULT_TRAINING_SEED})")
    p_train.add_argument("--workers", type=int, default=1,
                         help="parallel grid evaluation threads (default 1)")
    p_train.add_argument("--output", default="model.imbm",
                         help="output model path (default model.imbm)")
    p_train.add_argument("--report", default=None,
                         help="JSON report path (default: report.json beside "
                              "the model)")
    p_train.add_argument("--roc", default=None,
                         help="ROC plot path (default: roc.svg beside the model)")

    p_predict = sub.add_parser("predict", help="predict from a saved model")
    p_predict.add_argument("--model", required=True, help="path to a .imbm file")
    p_predict.add_argument("answers", nargs="*", metavar="predictor=value",
                           help="one value per model predictor")

    p_eval = sub.add_parser("evaluate", help="score a model on a labeled CSV")
    p_eval.add_argument("--model", required=True, help="path to a .imbm file")
    p_eval.add_argument("--dataset", required=True, help="CSV file path")
    p_eval.add_argument("--roc", default="roc.svg",
                        help="ROC plot output path (default roc.svg)")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--config", default=None, help="JSON config file")
    p_serve.add_argument("--host", default=None, help="listen address override")
    p_serve.add_argument("--port", type=int, default=None, help="port override")
    p_serve.add_argument("--static-dir", default=None,
                         help="directory of UI files to serve at /")

    return parser


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise AgentError(f"cannot read {path}: {e.strerror or e}") from e


def _cmd_train(args) -> int:
    data = _read_bytes(args.dataset)
    label = args.label or default_label_column(data)
    dataset = parse_csv(data, label)

    if args.grid:
        doc = json.loads(_read_bytes(args.grid).decode("utf-8"))
        grid = GridSpec.from_dict(doc, base=default_grid())
    else:
        grid = default_grid()

    report = run_grid_search(dataset, grid, args.seed, workers=args.workers)

    out = Path(args.output)
    provenance = (f"dataset {Path(args.dataset).name} ({len(dataset.rows)} rows, "
                  f"label {label!r}), grid-search seed {args.seed}, "
                  f"validation AUC {report.validation_auc:.4f}")
    artifact = artifact_from_report(report, provenance)
    save_model(artifact, out)

    report_path = Path(args.report) if args.report else out.parent / "report.json"
    report_path.write_text(json.dumps(report.summary_dict(), indent=2,
                                      sort_keys=True) + "\n", encoding="utf-8")
    roc_path = Path(args.roc) if args.roc else out.parent / "roc.svg"
    roc_path.write_text(plot_series(report.validation_roc), encoding="utf-8")

    print(f"validation AUC {report.validation_auc:.6f}")
    return EXIT_OK


def _parse_answers(pairs: list[str]) -> dict[str, str]:
    answers: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise AgentError(f"answers must look like predictor=value, got {pair!r}")
        key, _, value = pair.partition("=")
        if key in answers:
            raise AgentError(f"predictor {key!r} given twice")
        answers[key] = value
    return answers


def _cmd_predict(args) -> int:
    artifact = deserialize(_read_bytes(args.model))
    probability = artifact.predict(_parse_answers(args.answers))
    print(f"{probability:.6f}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    artifact = deserialize(_read_bytes(args.model))
    dataset = parse_csv(_read_bytes(args.dataset), artifact.encoder.label_column)
    m = encode_with(artifact.encoder, dataset)
    scores = predict_batch(artifact.weights, artifact.setting, m.features)
    roc = roc_curve(list(scores), [int(v) for v in m.labels])
    Path(args.roc).write_text(plot_series(roc), encoding="utf-8")
    print(f"{roc.auc:.6f}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .service.http import run_service

    config = load_config(args.config)
    if args.host is not None:
        config.host = args.host
    if args.port is not None:
        config.port = args.port
    if args.static_dir is not None:
        config.static_dir = args.static_dir
    run_service(config)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"train": _cmd_train, "predict": _cmd_predict,
                "evaluate": _cmd_evaluate, "serve": _cmd_serve}
    try:
        return handlers[args.command](args)
    except AgentError as e:
        print(f"error [{e.code}]: {e}", file=sys.stderr)
        return EXIT_USER
    except json.JSONDecodeError as e:
        print(f"error [invalid_json]: {e}", file=sys.stderr)
        return EXIT_USER
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as e:  # noqa: BLE001 - boundary: report, don't crash
        print(f"internal error: {e!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
