"""
Experiment service: dataset generation, training, reconstruction, evaluation and ablation runs
"""

import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sqlalchemy.orm import Session

from app.core.errors import DatasetError, ParameterError, UndefinedDynamicsError
from app.models.models import ExperimentRun, MetricRecord
from app.schemas import (
    AblationReport,
    AblationResult,
    AblationVariant,
    AliasedSample,
    DatasetManifest,
    EvaluationConfig,
    ExperimentConfig,
    ExperimentReport,
    KSpaceFrame,
    MetricRecordSchema,
    MultiCoilImage,
    PhantomSpec,
    ReconstructResponse,
    SSoSImage,
    StartToPeakRecord,
    StructureSpec,
    TrainingSummary,
)
from app.schemas.schemas import validate_payload
from app.services.baseline_service import BaselineService
from app.services.dataset_service import DatasetService, aliased_name, mask_name, sequence_name
from app.services.grappa_service import GrappaService
from app.services.inference_service import InferenceService
from app.services.metrics_service import MetricsService
from app.services.network_service import NetworkService
from app.services.phantom_service import PhantomService
from app.services.plot_service import PlotService
from app.services.sampling_service import SamplingService
from app.services.training_service import TrainingService

logger = logging.getLogger(__name__)


@lru_cache(maxsize=4)
def _cached_generator(path: str, mtime_ns: int):
    payload = NetworkService.load_checkpoint(Path(path))
    modules = NetworkService.modules_from_checkpoint(payload)
    if "generator" not in modules:
        raise ParameterError(f"checkpoint {path} holds no generator")
    return modules["generator"], payload.get("meta", {})


class ExperimentService:
    """End-to-end orchestration over the dataset container"""

    # ============= Configuration =============
    @staticmethod
    def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
        return config.model_copy(update={"seed": seed, "train": config.train.model_copy(update={"seed": seed})})

    @classmethod
    def load_config(cls, path: Optional[Path] = None, seed: Optional[int] = None) -> ExperimentConfig:
        payload = {}
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ParameterError(f"config file not found: {path}")
            try:
                payload = json.loads(path.read_text())
            except json.JSONDecodeError as e:
                raise ParameterError(f"config {path} is not valid JSON: {e}") from e
        config = validate_payload(ExperimentConfig, payload)
        return cls.with_seed(config, seed) if seed is not None else config

    @staticmethod
    def vs_values(config: ExperimentConfig) -> List[int]:
        """Raw (1), every training VS and the fully view-shared count"""
        return sorted({1} | set(config.train.vs_choices) | {config.sampling.b_interleaves})

    @staticmethod
    def roi_structures(config: ExperimentConfig, spec: PhantomSpec) -> List[StructureSpec]:
        names = config.evaluation.roi_structures
        if names:
            by_name = {s.name: s for s in spec.structures}
            unknown = [n for n in names if n not in by_name]
            if unknown:
                raise ParameterError(f"unknown ROI structures: {unknown}")
            return [by_name[n] for n in names]
        return [s for s in spec.structures if s.bolus is not None and s.bolus.amplitude > 0]

    @staticmethod
    def start_to_peak_or_none(series: Sequence[float], threshold_frac: float) -> Optional[int]:
        try:
            return MetricsService.start_to_peak(series, threshold_frac)
        except UndefinedDynamicsError:
            return None

    # ============= generate-data =============
    @classmethod
    def generate_data(cls, config: ExperimentConfig, out_dir: Path) -> DatasetManifest:
        """Phantom suite, TWIST acquisitions, aliased inputs at every VS, GRAPPA labels and ROIs"""
        template = config.phantom.template
        schedule = SamplingService.build_schedule(
            template.grid_height, template.grid_width, config.sampling.a_radius, config.sampling.lattice,
            template.num_frames, config.sampling.b_interleaves,
        )
        vs_values = cls.vs_values(config)
        arrays: Dict[str, Tuple[np.ndarray, str]] = {}
        acceleration = {}
        for t in range(schedule.num_frames):
            for vs in vs_values:
                mask = SamplingService.mask_for_frame(schedule, t, vs)
                arrays[mask_name(t, vs)] = (mask.mask, "mask")
                acceleration[f"t{t:03d}_vs{vs}"] = mask.acceleration

        sequences = []
        for i, spec in enumerate(PhantomService.suite_specs(config.phantom, config.seed)):
            frames, sens = PhantomService.make_phantom_sequence(spec)
            acquired = SamplingService.acquire_sequence(frames, schedule)
            truth = np.stack([f.data for f in frames])
            arrays[sequence_name(i, "ground_truth")] = (truth, "ground_truth")
            arrays[sequence_name(i, "sensitivities")] = (sens.maps, "sensitivities")
            arrays[sequence_name(i, "kspace")] = (np.stack([k.data for k in acquired]), "kspace")
            for t in range(schedule.num_frames):
                for vs in vs_values:
                    combined = SamplingService.view_share_combine(acquired, t, vs, schedule)
                    arrays[aliased_name(i, t, vs)] = (SamplingService.adjoint(combined).data, "aliased")
            grappa = [
                GrappaService.grappa_reconstruct(acquired, schedule, t, config.grappa.kernel_size,
                                                 config.grappa.regularization).data
                for t in range(schedule.num_frames)
            ]
            arrays[sequence_name(i, "grappa")] = (np.stack(grappa), "grappa")

            truth_ssos = MetricsService.ssos_array(truth)
            rois, truth_s2p = [], {}
            for s in cls.roi_structures(config, spec):
                roi = PhantomService.structure_mask(s, spec.grid_height, spec.grid_width)
                arrays[sequence_name(i, f"roi_{s.name}")] = (roi, "roi")
                rois.append(s.name)
                truth_s2p[s.name] = cls.start_to_peak_or_none(
                    MetricsService.roi_series(truth_ssos, roi), config.evaluation.threshold_frac
                )
            sequences.append({
                "index": i,
                "split": "held_out" if i in config.phantom.held_out else "train",
                "seed": spec.seed,
                "rois": rois,
                "bolus": {s.name: s.bolus.model_dump() for s in spec.structures if s.bolus is not None},
                "start_to_peak_truth": truth_s2p,
            })
            logger.info(f"Sequence {i}: {schedule.num_frames} frames, VS {vs_values}, split {sequences[-1]['split']}")

        extra = {
            "vs_values": vs_values,
            "acceleration": acceleration,
            "grappa_acceleration": float(schedule.lattice_mask().size / schedule.lattice_mask().sum()),
            "config": config.model_dump(mode="json"),
        }
        return DatasetService.write_container(out_dir, arrays, config.seed, schedule.descriptor(), sequences, extra)

    # ============= train =============
    @staticmethod
    def train(config: ExperimentConfig, dataset_dir: Path, out_dir: Path,
              resume_from: Optional[Path] = None) -> TrainingSummary:
        manifest = DatasetService.verify(dataset_dir)
        schedule = DatasetService.schedule_from_manifest(manifest)
        dataset_x, dataset_y = DatasetService.load_training_data(dataset_dir, config.train.vs_choices)
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(config.model_dump_json(indent=2))
        _, summary = TrainingService.train(dataset_x, dataset_y, config.train, config.network, out_dir,
                                           schedule, resume_from=resume_from)
        (out_dir / "train_summary.json").write_text(summary.model_dump_json(indent=2))
        return summary

    # ============= reconstruct =============
    @staticmethod
    def load_generator(checkpoint: Path):
        """(generator, checkpoint meta), cached per file version"""
        checkpoint = Path(checkpoint)
        if not checkpoint.exists():
            raise ParameterError(f"checkpoint not found: {checkpoint}")
        return _cached_generator(str(checkpoint.resolve()), checkpoint.stat().st_mtime_ns)

    @staticmethod
    def aliased_input(directory: Path, manifest: DatasetManifest, sequence: int, frame: int,
                      vs: int) -> AliasedSample:
        """Stored aliased array, or view sharing of the acquired k-space for any other VS"""
        if aliased_name(sequence, frame, vs) in manifest.arrays:
            return DatasetService.read_aliased(directory, manifest, sequence, frame, vs)
        schedule = DatasetService.schedule_from_manifest(manifest)
        stack = DatasetService.read_array(directory, sequence_name(sequence, "kspace"), manifest)
        acquired = [
            KSpaceFrame(data=stack[t], mask=SamplingService.mask_for_frame(schedule, t, 1), frame_index=t)
            for t in SamplingService.window(schedule, frame, vs)
        ]
        combined = SamplingService.view_share_combine(acquired, frame, vs, schedule)
        image = SamplingService.adjoint(combined)
        return AliasedSample(image=image, mask=combined.mask.model_copy(update={"vs": vs}), sequence=sequence)

    @staticmethod
    def _vs_seen(vs: int, meta: Dict) -> bool:
        seen = meta.get("vs_choices")
        ok = seen is None or vs in seen
        if not ok:
            logger.warning(f"VS {vs} was not among the training choices {seen}; reconstructing anyway")
        return ok

    @classmethod
    def reconstruct(cls, checkpoint: Path, dataset_dir: Path, out_dir: Path,
                    vs_list: Optional[Sequence[int]] = None,
                    sequences: Optional[Sequence[int]] = None) -> DatasetManifest:
        """Denormalized reconstructions of every frame, one array per (sequence, vs)"""
        generator, meta = cls.load_generator(checkpoint)
        manifest = DatasetService.verify(dataset_dir)
        if vs_list is None:
            vs_list = meta.get("vs_choices") or [v for v in manifest.extra.get("vs_values", []) if v > 1]
        if sequences is None:
            sequences = DatasetService.split(manifest, "held_out") or [s["index"] for s in manifest.sequences]
        num_frames = manifest.schedule["num_frames"]

        arrays, latency, seen = {}, {}, {}
        for vs in vs_list:
            seen[str(vs)] = cls._vs_seen(vs, meta)
            for seq in sequences:
                frames = []
                for t in range(num_frames):
                    sample = cls.aliased_input(dataset_dir, manifest, seq, t, vs)
                    recon, seconds = InferenceService.reconstruct(generator, sample.image)
                    frames.append(recon.data)
                    latency[f"s{seq:02d}_t{t:03d}_vs{vs}"] = seconds
                arrays[sequence_name(seq, f"recon_vs{vs}")] = (np.stack(frames), "reconstruction")
        logger.info(f"Reconstructed {len(latency)} frames, max latency {max(latency.values()):.4f} s")
        extra = {
            "checkpoint": str(checkpoint),
            "dataset": str(dataset_dir),
            "vs_values": list(vs_list),
            "vs_seen_in_training": seen,
            "latency_s": latency,
            "max_latency_s": max(latency.values()),
        }
        kept = [s for s in manifest.sequences if s["index"] in sequences]
        return DatasetService.write_container(out_dir, arrays, manifest.seed, manifest.schedule, kept, extra)

    @classmethod
    def reconstruct_frame(cls, checkpoint: Path, dataset_dir: Path, sequence: int, frame: int,
                          vs: int) -> Tuple[MultiCoilImage, ReconstructResponse]:
        """Single-frame reconstruction with latency, acceleration and scores when ground truth exists"""
        generator, meta = cls.load_generator(checkpoint)
        manifest = DatasetService.load_manifest(dataset_dir)
        if sequence not in [s["index"] for s in manifest.sequences]:
            raise ParameterError(f"sequence {sequence} not in dataset")
        if not 0 <= frame < manifest.schedule["num_frames"]:
            raise ParameterError(f"frame {frame} outside the {manifest.schedule['num_frames']}-frame sequence")
        sample = cls.aliased_input(dataset_dir, manifest, sequence, frame, vs)
        recon, seconds = InferenceService.reconstruct(generator, sample.image)
        response = ReconstructResponse(
            sequence=sequence, frame=frame, vs=vs, shape=list(recon.shape),
            acceleration=sample.mask.acceleration, latency_ms=1000.0 * seconds,
            vs_seen_in_training=cls._vs_seen(vs, meta),
        )
        truth_name = sequence_name(sequence, "ground_truth")
        if truth_name in manifest.arrays:
            truth = DatasetService.read_array(dataset_dir, truth_name, manifest)[frame]
            psnr, ssim = InferenceService.score(recon, MultiCoilImage(data=truth, frame_index=frame))
            response.psnr_db = psnr if np.isfinite(psnr) else None  # identical images
            response.ssim = ssim
        return recon, response

    # ============= evaluate =============
    @staticmethod
    def _method_stacks(dataset_dir: Path, manifest: DatasetManifest, recon_dir: Optional[Path],
                       recon_manifest: Optional[DatasetManifest], seq: int) -> Dict[Tuple[str, int], np.ndarray]:
        """SSoS [T, H, W] stacks keyed by (method, vs)"""
        num_frames = manifest.schedule["num_frames"]
        k = manifest.schedule["b_interleaves"]
        read = lambda name: DatasetService.read_array(dataset_dir, name, manifest)  # noqa: E731
        stacks = {("ground_truth", 0): MetricsService.ssos_array(read(sequence_name(seq, "ground_truth")))}
        for vs in manifest.extra.get("vs_values", []):
            aliased = np.stack([read(aliased_name(seq, t, vs)) for t in range(num_frames)])
            stacks[("raw" if vs == 1 else "aliased", vs)] = MetricsService.ssos_array(aliased)
        stacks[("grappa", k)] = MetricsService.ssos_array(read(sequence_name(seq, "grappa")))
        if recon_manifest is not None:
            for vs in recon_manifest.extra.get("vs_values", []):
                name = sequence_name(seq, f"recon_vs{vs}")
                if name in recon_manifest.arrays:
                    recon = DatasetService.read_array(recon_dir, name, recon_manifest)
                    stacks[("proposed", vs)] = MetricsService.ssos_array(recon)
        return stacks

    @classmethod
    def evaluate(cls, dataset_dir: Path, recon_dir: Optional[Path], config: EvaluationConfig, out_dir: Path,
                 name: str = "experiment", db: Optional[Session] = None) -> ExperimentReport:
        """Metric records, start-to-peak table and plots over the evaluation sequences"""
        manifest = DatasetService.verify(dataset_dir)
        recon_manifest = DatasetService.verify(recon_dir) if recon_dir is not None else None
        sequences = DatasetService.split(manifest, "held_out") or [s["index"] for s in manifest.sequences]
        if recon_manifest is not None:
            reconstructed = {s["index"] for s in recon_manifest.sequences}
            missing = [s for s in sequences if s not in reconstructed]
            if missing:
                raise DatasetError(f"no reconstructions for evaluation sequences {missing}")
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        seq_info = {s["index"]: s for s in manifest.sequences}

        records: List[MetricRecordSchema] = []
        s2p_rows: List[StartToPeakRecord] = []
        plots: List[str] = []
        for seq in sequences:
            stacks = cls._method_stacks(dataset_dir, manifest, recon_dir, recon_manifest, seq)
            ref_key = ("ground_truth", 0) if config.reference_policy == "ground_truth" else (
                "grappa", manifest.schedule["b_interleaves"])
            reference = stacks[ref_key]
            for (method, vs), stack in stacks.items():
                for t in range(stack.shape[0]):
                    psnr, ssim = InferenceService.score_ssos(SSoSImage(data=stack[t]), SSoSImage(data=reference[t]),
                                                             config)
                    records.append(MetricRecordSchema(sequence=seq, frame=t, vs=vs, method=method,
                                                      psnr_db=psnr, ssim=ssim))

            for roi_name in seq_info[seq].get("rois", []):
                roi = DatasetService.read_array(dataset_dir, sequence_name(seq, f"roi_{roi_name}"), manifest)
                curves = {f"{m} vs{v}": MetricsService.roi_series(s, roi.astype(bool)) for (m, v), s in stacks.items()}
                truth = cls.start_to_peak_or_none(curves["ground_truth vs0"], config.threshold_frac)
                for (method, vs) in stacks:
                    value = cls.start_to_peak_or_none(curves[f"{method} vs{vs}"], config.threshold_frac)
                    error = value - truth if value is not None and truth is not None else None
                    s2p_rows.append(StartToPeakRecord(sequence=seq, roi=roi_name, method=method, vs=vs,
                                                      start_to_peak=value, error_vs_truth=error))
                if config.emit_plots:
                    path = out_dir / f"tic_s{seq:02d}_{roi_name}.png"
                    PlotService.time_intensity_curves(curves, roi_name, path)
                    plots.append(path.name)

            if config.emit_plots:
                truth_curve = stacks[("ground_truth", 0)].reshape(reference.shape[0], -1).mean(axis=1)
                peak = int(np.argmax(truth_curve))
                images = {f"{m} vs{v}": s[peak] for (m, v), s in stacks.items()}
                path = out_dir / f"mosaic_s{seq:02d}.png"
                PlotService.mosaic(images, f"sequence {seq}, frame {peak}", path)
                plots.append(path.name)

        if config.emit_plots and s2p_rows:
            groups: Dict[str, List[float]] = {}
            for row in s2p_rows:
                if row.method != "ground_truth" and row.error_vs_truth is not None:
                    groups.setdefault(f"{row.method}_vs{row.vs}", []).append(row.error_vs_truth)
            written = PlotService.boxplot(groups, "start-to-peak error (frames)", out_dir / "start_to_peak_box.png")
            plots.extend(p.name for p in written)

        report = ExperimentReport(name=name, reference_policy=config.reference_policy, records=records,
                                  start_to_peak=s2p_rows, plots=plots)
        report_path = out_dir / "report.json"
        report_path.write_text(report.model_dump_json(indent=2))
        logger.info(f"Evaluation {name}: {len(records)} records, {len(s2p_rows)} start-to-peak rows")
        if db is not None:
            cls.persist_report(db, report, manifest.seed, str(dataset_dir), str(report_path))
        return report

    @staticmethod
    def persist_report(db: Session, report: ExperimentReport, seed: int = 0, dataset_dir: str = "",
                       report_path: str = "") -> ExperimentRun:
        """Store the records; a rerun under the same name replaces the previous one"""
        existing = db.query(ExperimentRun).filter(ExperimentRun.name == report.name).first()
        if existing is not None:
            db.delete(existing)
            db.flush()
        run = ExperimentRun(name=report.name, reference_policy=report.reference_policy, seed=seed,
                            dataset_dir=dataset_dir, report_path=report_path)
        run.records = [
            MetricRecord(sequence=r.sequence, frame=r.frame, vs=r.vs, method=r.method,
                         psnr_db=r.psnr_db if np.isfinite(r.psnr_db) else None, ssim=r.ssim)
            for r in report.records
        ]
        db.add(run)
        db.commit()
        db.refresh(run)
        logger.info(f"Stored run {run.name} with {len(run.records)} records")
        return run

    # ============= ablate =============
    @staticmethod
    def ablation_margins(results: Dict[str, AblationResult]) -> Dict[str, Dict[int, float]]:
        """Median PSNR of the proposed run minus each other variant's, per shared VS"""
        proposed = results.get(AblationVariant.proposed.value)
        if proposed is None:
            return {}
        margins = {}
        for name, result in results.items():
            if name == AblationVariant.proposed.value:
                continue
            margins[name] = {vs: proposed.median_psnr_db[vs] - psnr
                             for vs, psnr in result.median_psnr_db.items() if vs in proposed.median_psnr_db}
        return margins

    @staticmethod
    def ablate(config: ExperimentConfig, dataset_dir: Path, out_dir: Path,
               variants: Optional[Sequence[AblationVariant]] = None) -> AblationReport:
        """Every variant under the same seed and budget, plus a comparison table"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report = AblationReport(seed=config.train.seed)
        for variant in variants or list(AblationVariant):
            result = BaselineService.run_ablation(variant, config, dataset_dir, out_dir)
            report.results[result.variant.value] = result
        report.margins_db = ExperimentService.ablation_margins(report.results)
        table = {name: {"median_psnr_db": r.median_psnr_db, "median_ssim": r.median_ssim,
                        "parameter_count": r.parameter_count, "margin_db": report.margins_db.get(name, {})}
                 for name, r in report.results.items()}
        (out_dir / "ablation_report.json").write_text(report.model_dump_json(indent=2))
        (out_dir / "ablation_table.json").write_text(json.dumps(table, indent=2))
        for name, row in table.items():
            logger.info(f"{name:>24}: " + ", ".join(f"VS{vs} {p:.2f} dB" for vs, p in row["median_psnr_db"].items()))
        for name, margins in report.margins_db.items():
            logger.info(f"proposed over {name}: " + ", ".join(f"VS{vs} {m:+.2f} dB" for vs, m in margins.items()))
        return report
