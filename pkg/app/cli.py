"""
Command-line entry point: generate-data, train, reconstruct, evaluate, ablate
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.core.config import settings
from app.core.database import SessionLocal, init_db
from app.core.errors import ReconstructionError
from app.schemas import AblationVariant
from app.services import ExperimentService, InferenceService

logger = logging.getLogger("twist_recon")


def _config(args):
    path = args.config
    if path is None and Path(settings.default_config).exists():
        path = settings.default_config
    return ExperimentService.load_config(path, args.seed)


def cmd_generate_data(args) -> int:
    config = _config(args)
    out = Path(args.out or Path(settings.data_dir) / config.name)
    manifest = ExperimentService.generate_data(config, out)
    logger.info(f"Dataset {out}: {len(manifest.arrays)} arrays, {len(manifest.sequences)} sequences")
    return 0


def cmd_train(args) -> int:
    config = _config(args)
    out = Path(args.out or Path(settings.runs_dir) / config.name)
    summary = ExperimentService.train(config, Path(args.dataset), out, resume_from=args.checkpoint)
    logger.info(f"Training finished: {summary.epochs_completed} epochs, {summary.steps} steps, "
                f"last checkpoint {summary.checkpoints[-1] if summary.checkpoints else 'none'}")
    return 0


def cmd_reconstruct(args) -> int:
    out = Path(args.out or Path(args.checkpoint).parent / "reconstructions")
    manifest = ExperimentService.reconstruct(Path(args.checkpoint), Path(args.dataset), out,
                                             vs_list=args.vs)
    logger.info(f"Reconstructions written to {out}; max latency {manifest.extra['max_latency_s']:.4f} s/frame")
    return 0


def cmd_evaluate(args) -> int:
    config = _config(args)
    evaluation = config.evaluation
    if args.reference is not None:
        evaluation = evaluation.model_copy(update={"reference_policy": args.reference})
    out = Path(args.out or "evaluation")
    db = None
    if not args.no_db:
        init_db()
        db = SessionLocal()
    try:
        report = ExperimentService.evaluate(Path(args.dataset), Path(args.recon) if args.recon else None,
                                            evaluation, out, name=args.name or config.name, db=db)
    finally:
        if db is not None:
            db.close()
    logger.info(f"Report written to {out / 'report.json'} ({len(report.records)} records)")
    return 0


def cmd_ablate(args) -> int:
    config = _config(args)
    out = Path(args.out or Path(settings.runs_dir) / f"{config.name}_ablation")
    variants = [AblationVariant(v) for v in args.variants] if args.variants else None
    ExperimentService.ablate(config, Path(args.dataset), out, variants)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twist-recon", description="TWIST MR angiography reconstruction")
    parser.add_argument("--log-level", default=settings.log_level)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset: bool = True):
        p.add_argument("--config", type=Path, default=None, help="experiment config (JSON)")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        if dataset:
            p.add_argument("--dataset", type=Path, required=True, help="dataset directory")

    p = sub.add_parser("generate-data", help="phantoms, aliased inputs and GRAPPA labels")
    common(p, dataset=False)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="unsupervised training")
    common(p)
    p.add_argument("--checkpoint", type=Path, default=None, help="resume from this checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="reconstruct held-out frames")
    common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--vs", type=int, nargs="+", default=None, help="view-sharing numbers")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="metrics, start-to-peak table and plots")
    common(p)
    p.add_argument("--recon", type=Path, default=None, help="reconstruction directory")
    p.add_argument("--reference", choices=["ground_truth", "grappa_vs_max"], default=None)
    p.add_argument("--name", default=None, help="run name in the metric store")
    p.add_argument("--no-db", action="store_true", help="skip the metric store")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="loss ablations and the two-generator baseline")
    common(p)
    p.add_argument("--variants", nargs="+", choices=[v.value for v in AblationVariant], default=None)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    InferenceService.set_threads(settings.num_threads)
    try:
        return args.func(args)
    except ReconstructionError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
