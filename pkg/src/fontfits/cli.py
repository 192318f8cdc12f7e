"""Command-line entry points for the full lifecycle.

Subcommands: synth, train, eval, ablate, font-classifier, serve.
Exit codes: 0 success, 2 usage/config error, 1 runtime failure.
Paths and ports may also come from FONTFITS_* environment variables
(flags win over the environment).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigurationError, InvalidArgumentError


def _env(name: str, default=None):
    return os.environ.get(f"FONTFITS_{name}", default)


def _positive_int(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not an integer")
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fontfits", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="write a synthetic training corpus")
    sp.add_argument("--out", default=_env("OUT"), required=_env("OUT") is None,
                    help="corpus root directory")
    sp.add_argument("--count", type=_positive_int, required=True,
                    help="number of training records (>= 1)")
    sp.add_argument("--eval-count", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--uncorrelated", action="store_true",
                    help="draw title style independently of the cover")

    tp = sub.add_parser("train", help="train from a JSON config file")
    tp.add_argument("--config", required=True)
    tp.add_argument("--resume", default=None, help="checkpoint to resume from")

    ep = sub.add_parser("eval", help="score a checkpoint on a corpus split")
    ep.add_argument("--checkpoint", default=_env("CHECKPOINT"),
                    required=_env("CHECKPOINT") is None)
    ep.add_argument("--corpus", required=True)
    ep.add_argument("--split", default="eval")
    ep.add_argument("--classifier", default=None, help="font classifier file for Font MSE")
    ep.add_argument("--identity", action="store_true",
                    help="score ground truth against itself (sanity check)")
    ep.add_argument("--substitute-text", default=None,
                    help="generate this text instead of each record's own")
    ep.add_argument("--out", default=None, help="write the JSON report here")

    ap = sub.add_parser("ablate", help="train and score the ablation variants")
    ap.add_argument("--config", required=True)
    ap.add_argument("--classifier", default=None)
    ap.add_argument("--variants", nargs="*", default=None)
    ap.add_argument("--no-train", action="store_true",
                    help="fail instead of training a missing variant")

    fp = sub.add_parser("font-classifier", help="font style classifier tasks")
    fsub = fp.add_subparsers(dest="fc_command", required=True)
    ftp = fsub.add_parser("train", help="train the six-class style classifier")
    ftp.add_argument("--out", required=True, help="output classifier file")
    ftp.add_argument("--steps", type=_positive_int, default=700)
    ftp.add_argument("--seed", type=int, default=0)
    ftp.add_argument("--report-accuracy", action="store_true")

    vp = sub.add_parser("serve", help="run the HTTP inference service")
    vp.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    vp.add_argument("--port", type=int, default=int(_env("PORT", "8000")))
    vp.add_argument("--checkpoint", default=_env("CHECKPOINT"),
                    required=_env("CHECKPOINT") is None)
    vp.add_argument("--frontend", default=_env("FRONTEND"),
                    help="directory of built UI assets to serve at /")
    return p


def _cmd_synth(args) -> int:
    from .data import synth_corpus

    manifest = synth_corpus(
        args.out, count=args.count, seed=args.seed, eval_count=args.eval_count,
        correlate_style=not args.uncorrelated,
    )
    total = sum(len(v) for v in manifest.splits.values())
    print(f"wrote {total} records under {args.out} "
          f"(splits: {', '.join(f'{k}={len(v)}' for k, v in manifest.splits.items())})")
    return 0


def _load_train_config(path: str):
    from .train import train_config_from_dict

    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise InvalidArgumentError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InvalidArgumentError(f"config {path} is not valid JSON: {e}") from e
    return train_config_from_dict(raw)


def _cmd_train(args) -> int:
    from .train import fit

    cfg = _load_train_config(args.config)
    result = fit(cfg, resume_from=args.resume, log=print)
    print(f"finished at iteration {result.iterations_run}"
          f"{' (early stop)' if result.stopped_early else ''}; "
          f"checkpoint: {result.checkpoint_path}")
    return 0


def _cmd_eval(args) -> int:
    from .data import load_corpus, load_manifest
    from .fontclass import load_classifier
    from .metrics import EvalReport, evaluate_corpus, write_report
    from .networks import load_checkpoint

    bundle, _ = load_checkpoint(args.checkpoint)
    records = list(load_corpus(load_manifest(args.corpus), args.split))
    classifier = load_classifier(args.classifier) if args.classifier else None
    report = evaluate_corpus(
        bundle, records, classifier=classifier,
        substitute_text=args.substitute_text, identity=args.identity,
        variant="identity" if args.identity else "model",
    )
    print(EvalReport.table_header())
    print(report.table_row())
    if report.color_excluded:
        print(f"({report.color_excluded} records excluded from Color MSE: empty strokes)")
    if args.out:
        write_report(report, args.out)
    return 0


def _cmd_ablate(args) -> int:
    from .fontclass import load_classifier
    from .train import ablation_table, run_ablation_suite

    cfg = _load_train_config(args.config)
    classifier = load_classifier(args.classifier) if args.classifier else None
    reports = run_ablation_suite(
        cfg, variants=args.variants, classifier=classifier,
        train_if_missing=not args.no_train, log=print,
    )
    print(ablation_table(reports))
    out = Path(cfg.out_dir) / "ablation_report.json"
    out.write_text(json.dumps({k: r.to_json() for k, r in reports.items()}, indent=1))
    print(f"report written to {out}")
    return 0


def _cmd_font_classifier(args) -> int:
    from .fontclass import (
        ClassifierTrainConfig,
        holdout_accuracy,
        save_classifier,
        train_font_classifier,
    )

    cfg = ClassifierTrainConfig(steps=args.steps, seed=args.seed)
    model = train_font_classifier(cfg=cfg, log=print)
    save_classifier(model, args.out)
    print(f"classifier written to {args.out}")
    if args.report_accuracy:
        acc = holdout_accuracy(model)
        print(f"held-out top-1 accuracy (class representatives): {acc:.3f}")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    serve(args.host, args.port, args.checkpoint, frontend_dir=args.frontend)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "font-classifier": _cmd_font_classifier,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InvalidArgumentError, ConfigurationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
