"""
GRAPPA service: 2-D k-space interpolation on the fully view-shared lattice
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import CalibrationError, ContractError, NumericalError, ParameterError
from app.core.fourier import ifft2c
from app.schemas import GrappaKernel, KSpaceFrame, MultiCoilImage, Role, SamplingMask, SamplingSchedule
from app.services.sampling_service import SamplingService

logger = logging.getLogger(__name__)


class GrappaService:
    """Autocalibrated parallel-imaging interpolation"""

    @staticmethod
    def offset_classes(lattice: Tuple[int, int]) -> List[Tuple[int, int]]:
        """Missing-point positions (dy, dz) inside one lattice cell"""
        ry, rz = lattice
        return [(dy, dz) for dy in range(ry) for dz in range(rz) if (dy, dz) != (0, 0)]

    @staticmethod
    def source_offsets(lattice: Tuple[int, int], kernel_size: Tuple[int, int]) -> np.ndarray:
        """[taps, 2] offsets of the sampled neighbors relative to the cell base point"""
        ry, rz = lattice
        ny, nz = kernel_size
        return np.array(
            [((i - ny // 2) * ry, (j - nz // 2) * rz) for i in range(ny) for j in range(nz)],
            dtype=int,
        )

    @staticmethod
    def _margins(offsets: np.ndarray, lattice: Tuple[int, int]) -> Tuple[int, int]:
        return int(np.abs(offsets[:, 0]).max()) + lattice[0], int(np.abs(offsets[:, 1]).max()) + lattice[1]

    @classmethod
    def gather_sources(cls, data: np.ndarray, base_y: np.ndarray, base_z: np.ndarray,
                       offsets: np.ndarray, margins: Tuple[int, int]) -> np.ndarray:
        """[n, C * taps] source matrix, coil-major, zero outside the grid"""
        py, pz = margins
        padded = np.pad(data, ((0, 0), (py, py), (pz, pz)))
        rows = base_y[:, None] + offsets[None, :, 0] + py
        cols = base_z[:, None] + offsets[None, :, 1] + pz
        src = padded[:, rows, cols]  # [C, n, taps]
        return src.transpose(1, 0, 2).reshape(len(base_y), -1)

    @classmethod
    def calibrate(cls, acs: KSpaceFrame, lattice: Tuple[int, int], kernel_size: Tuple[int, int] = (5, 5),
                  regularization: float = 1e-4) -> GrappaKernel:
        """Fit one weight set per offset class from every fully sampled sliding window"""
        if regularization < 0:
            raise ParameterError(f"regularization must be >= 0, got {regularization}")
        data, sampled = acs.data, acs.mask.mask
        num_coils, height, width = data.shape
        offsets = cls.source_offsets(lattice, kernel_size)
        margins = cls._margins(offsets, lattice)
        py, pz = margins
        sampled_p = np.pad(sampled, ((py, py), (pz, pz)))
        yy, zz = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")

        # A window is usable when every source lies inside the grid and is sampled
        src_ok = np.ones((height, width), dtype=bool)
        for oy, oz in offsets:
            inside = (yy + oy >= 0) & (yy + oy < height) & (zz + oz >= 0) & (zz + oz < width)
            src_ok &= inside & sampled_p[yy + oy + py, zz + oz + pz]

        classes = cls.offset_classes(lattice)
        weights = np.zeros((len(classes), num_coils, num_coils * len(offsets)), dtype=np.complex128)
        for c, (dy, dz) in enumerate(classes):
            inside = (yy + dy < height) & (zz + dz < width)
            ok = src_ok & inside & sampled_p[yy + dy + py, zz + dz + pz]
            base_y, base_z = np.nonzero(ok)
            if len(base_y) == 0:
                raise CalibrationError(
                    f"no calibration window for offset {(dy, dz)}: ACS smaller than the kernel footprint"
                )
            A = cls.gather_sources(data, base_y, base_z, offsets, margins).astype(np.complex128)
            T = data[:, base_y + dy, base_z + dz].T.astype(np.complex128)  # [n, C]
            AhA = A.conj().T @ A
            AhT = A.conj().T @ T
            if regularization == 0:
                if np.linalg.matrix_rank(AhA) < AhA.shape[0]:
                    raise NumericalError(
                        f"singular calibration system for offset {(dy, dz)} "
                        f"({len(base_y)} windows, {AhA.shape[0]} unknowns)"
                    )
                lam = 0.0
            else:
                lam = regularization * np.real(np.trace(AhA)) / AhA.shape[0]
            try:
                W = np.linalg.solve(AhA + lam * np.eye(AhA.shape[0]), AhT)
            except np.linalg.LinAlgError as e:
                raise NumericalError(f"calibration solve failed for offset {(dy, dz)}: {e}") from e
            weights[c] = W.T
            logger.debug(f"GRAPPA offset {(dy, dz)}: {len(base_y)} windows")

        return GrappaKernel(
            weights=weights, offsets=classes, kernel_size=tuple(kernel_size),
            lattice=tuple(lattice), regularization=regularization,
        )

    @classmethod
    def interpolate(cls, undersampled: KSpaceFrame, kernel: GrappaKernel) -> KSpaceFrame:
        """Fill every missing point from its lattice neighborhood; acquired points pass through"""
        data, sampled = undersampled.data, undersampled.mask.mask
        num_coils, height, width = data.shape
        if undersampled.mask.lattice is not None and tuple(undersampled.mask.lattice) != tuple(kernel.lattice):
            raise ContractError(f"mask lattice {undersampled.mask.lattice} != kernel lattice {kernel.lattice}")
        lattice = SamplingService.lattice_points(height, width, kernel.lattice)
        if np.any(lattice & ~sampled):
            raise ContractError(f"mask does not contain the {kernel.lattice} lattice the kernel was built for")
        if kernel.weights.shape[1] != num_coils:
            raise ContractError(f"kernel has {kernel.weights.shape[1]} coils, data has {num_coils}")

        offsets = cls.source_offsets(kernel.lattice, kernel.kernel_size)
        margins = cls._margins(offsets, kernel.lattice)
        ry, rz = kernel.lattice
        yy, zz = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
        cell_y, cell_z = (yy - height // 2) % ry, (zz - width // 2) % rz

        out = data.copy()
        for c, (dy, dz) in enumerate(kernel.offsets):
            ty, tz = np.nonzero(~sampled & (cell_y == dy) & (cell_z == dz))
            if len(ty) == 0:
                continue
            A = cls.gather_sources(data, ty - dy, tz - dz, offsets, margins)
            out[:, ty, tz] = (A @ kernel.weights[c].T).T

        mask = SamplingMask(mask=np.ones_like(sampled), vs=undersampled.mask.vs,
                            frame=undersampled.mask.frame, lattice=kernel.lattice)
        return KSpaceFrame(data=out, mask=mask, frame_index=undersampled.frame_index)

    @staticmethod
    def acs_frame(combined: KSpaceFrame, schedule: SamplingSchedule) -> KSpaceFrame:
        """The ACS block of a frame as its own fully sampled k-space"""
        mask = SamplingMask(mask=schedule.acs_mask, frame=combined.mask.frame)
        return KSpaceFrame(data=combined.data * schedule.acs_mask[None], mask=mask,
                           frame_index=combined.frame_index)

    @classmethod
    def grappa_reconstruct(cls, frames: Sequence[KSpaceFrame], schedule: SamplingSchedule, target_frame: int,
                           kernel_size: Tuple[int, int] = (5, 5), regularization: float = 1e-4,
                           kernel: Optional[GrappaKernel] = None) -> MultiCoilImage:
        """Full view sharing, calibration on the target's ACS, interpolation, inverse FFT"""
        combined = SamplingService.view_share_combine(frames, target_frame, schedule.b_interleaves, schedule)
        if kernel is None:
            kernel = cls.calibrate(cls.acs_frame(combined, schedule), schedule.lattice, kernel_size, regularization)
        filled = cls.interpolate(combined, kernel)
        return MultiCoilImage(data=ifft2c(filled.data), frame_index=target_frame, role=Role.ground_truth)

    @staticmethod
    def save_kernel(kernel: GrappaKernel, directory: Path) -> Path:
        """Weights as little-endian complex64 plus a JSON descriptor"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        kernel.weights.astype("<c8").tofile(directory / "weights.bin")
        (directory / "kernel.json").write_text(json.dumps(kernel.descriptor(), indent=2))
        logger.info(f"GRAPPA kernel saved to {directory}")
        return directory

    @staticmethod
    def load_kernel(directory: Path) -> GrappaKernel:
        directory = Path(directory)
        desc = json.loads((directory / "kernel.json").read_text())
        weights = np.fromfile(directory / "weights.bin", dtype="<c8").reshape(desc["shape"])
        return GrappaKernel(
            weights=weights.astype(np.complex128),
            offsets=[tuple(o) for o in desc["offsets"]],
            kernel_size=tuple(desc["kernel_size"]),
            lattice=tuple(desc["lattice"]),
            regularization=desc["regularization"],
        )
