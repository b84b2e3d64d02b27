"""
Dataset service: on-disk container (manifest.json plus raw little-endian arrays)
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import DatasetError
from app.schemas import (
    AliasedSample,
    ArraySpec,
    DatasetManifest,
    MultiCoilImage,
    Role,
    SamplingMask,
    SamplingSchedule,
)
from app.schemas.schemas import validate_payload
from app.services.sampling_service import SamplingService

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
_NUMPY_DTYPES = {"complex64": "<c8", "float32": "<f4", "uint8": "u1"}


def aliased_name(sequence: int, frame: int, vs: int) -> str:
    return f"s{sequence:02d}_aliased_t{frame:03d}_vs{vs}"


def mask_name(frame: int, vs: int) -> str:
    return f"mask_t{frame:03d}_vs{vs}"


def sequence_name(sequence: int, what: str) -> str:
    return f"s{sequence:02d}_{what}"


class DatasetService:
    """Read / write named arrays and their manifest"""

    @staticmethod
    def dtype_name(array: np.ndarray) -> str:
        if np.iscomplexobj(array):
            return "complex64"
        if array.dtype == bool or array.dtype == np.uint8:
            return "uint8"
        return "float32"

    @classmethod
    def write_array(cls, directory: Path, manifest: DatasetManifest, name: str, array: np.ndarray,
                    role: str = "") -> ArraySpec:
        dtype = cls.dtype_name(array)
        data = np.ascontiguousarray(np.asarray(array).astype(_NUMPY_DTYPES[dtype]))
        spec = ArraySpec(file=f"{name}.bin", dtype=dtype, shape=list(data.shape), role=role)
        data.tofile(Path(directory) / spec.file)
        manifest.arrays[name] = spec
        return spec

    @staticmethod
    def save_manifest(directory: Path, manifest: DatasetManifest) -> Path:
        path = Path(directory) / MANIFEST
        path.write_text(manifest.model_dump_json(indent=2))
        return path

    @staticmethod
    def load_manifest(directory: Path) -> DatasetManifest:
        path = Path(directory) / MANIFEST
        if not path.exists():
            raise DatasetError(f"no {MANIFEST} in {directory}")
        try:
            payload = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise DatasetError(f"corrupt manifest {path}: {e}") from e
        return validate_payload(DatasetManifest, payload)

    @classmethod
    def write_container(cls, directory: Path, arrays: Dict[str, Tuple[np.ndarray, str]], seed: int = 0,
                        schedule: Optional[Dict] = None, sequences: Optional[List[Dict]] = None,
                        extra: Optional[Dict] = None) -> DatasetManifest:
        """Write every (array, role) under its name, then the manifest"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = DatasetManifest(seed=seed, schedule=schedule or {}, sequences=sequences or [],
                                   extra=extra or {})
        for name, (array, role) in arrays.items():
            cls.write_array(directory, manifest, name, array, role)
        cls.save_manifest(directory, manifest)
        logger.info(f"Dataset written to {directory}: {len(manifest.arrays)} arrays")
        return manifest

    @classmethod
    def verify(cls, directory: Path, manifest: Optional[DatasetManifest] = None) -> DatasetManifest:
        """Every declared array exists with its declared byte length"""
        manifest = manifest or cls.load_manifest(directory)
        for name in manifest.arrays:
            cls._checked_path(directory, manifest, name)
        return manifest

    @staticmethod
    def _checked_path(directory: Path, manifest: DatasetManifest, name: str) -> Path:
        spec = manifest.arrays.get(name)
        if spec is None:
            raise DatasetError(f"array {name!r} not in manifest")
        path = Path(directory) / spec.file
        if not path.exists():
            raise DatasetError(f"missing array file {path}")
        expected = int(np.prod(spec.shape)) * np.dtype(_NUMPY_DTYPES[spec.dtype]).itemsize
        if path.stat().st_size != expected:
            raise DatasetError(f"{path}: {path.stat().st_size} bytes, manifest declares {expected}")
        return path

    @classmethod
    def read_array(cls, directory: Path, name: str, manifest: Optional[DatasetManifest] = None) -> np.ndarray:
        manifest = manifest or cls.load_manifest(directory)
        path = cls._checked_path(directory, manifest, name)
        spec = manifest.arrays[name]
        return np.fromfile(path, dtype=_NUMPY_DTYPES[spec.dtype]).reshape(spec.shape)

    @staticmethod
    def schedule_from_manifest(manifest: DatasetManifest) -> SamplingSchedule:
        desc = manifest.schedule
        if not desc:
            raise DatasetError("manifest carries no sampling schedule")
        return SamplingService.build_schedule(desc["height"], desc["width"], desc["a_radius"],
                                              tuple(desc["lattice"]), desc["num_frames"], desc["b_interleaves"])

    @staticmethod
    def split(manifest: DatasetManifest, name: str) -> List[int]:
        """Sequence indices of a split ("train" or "held_out")"""
        return [s["index"] for s in manifest.sequences if s.get("split") == name]

    @classmethod
    def read_mask(cls, directory: Path, manifest: DatasetManifest, frame: int, vs: int) -> SamplingMask:
        schedule = manifest.schedule
        data = cls.read_array(directory, mask_name(frame, vs), manifest).astype(bool)
        return SamplingMask(mask=data, vs=vs, frame=frame, lattice=tuple(schedule["lattice"]) if schedule else None)

    @classmethod
    def read_aliased(cls, directory: Path, manifest: DatasetManifest, sequence: int, frame: int,
                     vs: int) -> AliasedSample:
        data = cls.read_array(directory, aliased_name(sequence, frame, vs), manifest)
        image = MultiCoilImage(data=data, frame_index=frame, role=Role.aliased)
        return AliasedSample(image=image, mask=cls.read_mask(directory, manifest, frame, vs), sequence=sequence)

    @classmethod
    def read_frames(cls, directory: Path, manifest: DatasetManifest, sequence: int, what: str,
                    role: Role = Role.ground_truth) -> List[MultiCoilImage]:
        """A [T, C, H, W] sequence array as per-frame images"""
        stack = cls.read_array(directory, sequence_name(sequence, what), manifest)
        return [MultiCoilImage(data=stack[t], frame_index=t, role=role) for t in range(stack.shape[0])]

    @classmethod
    def load_training_data(cls, directory: Path, vs_choices: Sequence[int],
                           sequences: Optional[Sequence[int]] = None,
                           ) -> Tuple[List[MultiCoilImage], List[AliasedSample]]:
        """Domain X (GRAPPA VS=max labels) and domain Y (aliased at every VS choice), indexed independently"""
        manifest = cls.verify(directory)
        if sequences is None:
            sequences = cls.split(manifest, "train") or [s["index"] for s in manifest.sequences]
        num_frames = manifest.schedule["num_frames"]
        dataset_x: List[MultiCoilImage] = []
        dataset_y: List[AliasedSample] = []
        for seq in sequences:
            dataset_x.extend(cls.read_frames(directory, manifest, seq, "grappa"))
            for vs in vs_choices:
                for t in range(num_frames):
                    dataset_y.append(cls.read_aliased(directory, manifest, seq, t, vs))
        logger.info(f"Loaded {len(dataset_x)} X and {len(dataset_y)} Y samples from {directory}")
        return dataset_x, dataset_y
