"""
Sampling service: TWIST schedule, view-sharing masks and the Fourier forward model
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from app.core.errors import ContractError, ParameterError
from app.core.fourier import fft2c, ifft2c
from app.schemas import KSpaceFrame, MultiCoilImage, Role, SamplingMask, SamplingSchedule

logger = logging.getLogger(__name__)


class SamplingService:
    """k-space sampling operations"""

    @staticmethod
    def acs_block(height: int, width: int, a_radius: int) -> np.ndarray:
        """Fully sampled (2*a_radius)^2 block around the DC bin"""
        acs = np.zeros((height, width), dtype=bool)
        cy, cz = height // 2, width // 2
        acs[cy - a_radius:cy + a_radius, cz - a_radius:cz + a_radius] = True
        return acs

    @staticmethod
    def lattice_points(height: int, width: int, lattice: Tuple[int, int]) -> np.ndarray:
        """Uniform lattice through the DC bin"""
        ry, rz = lattice
        ky = (np.arange(height) - height // 2) % ry == 0
        kz = (np.arange(width) - width // 2) % rz == 0
        return ky[:, None] & kz[None, :]

    @classmethod
    def build_schedule(cls, height: int, width: int, a_radius: int, lattice: Tuple[int, int],
                       num_frames: int, b_interleaves: int = 5) -> SamplingSchedule:
        """Partition the periphery lattice into b_interleaves disjoint subsets"""
        ry, rz = lattice
        if ry < 1 or rz < 1 or ry > height or rz > width:
            raise ParameterError(f"lattice {lattice} does not tile a {height}x{width} grid")
        if a_radius < 1 or a_radius >= min(height, width) / 2:
            raise ParameterError(f"a_radius {a_radius} too large for a {height}x{width} grid")
        if num_frames < 1 or b_interleaves < 1:
            raise ParameterError("num_frames and b_interleaves must be >= 1")

        acs = cls.acs_block(height, width, a_radius)
        periphery = cls.lattice_points(height, width, lattice) & ~acs
        points = np.argwhere(periphery)  # raster order
        if len(points) < b_interleaves:
            raise ParameterError(f"only {len(points)} periphery points for {b_interleaves} interleaves")

        subsets = np.zeros((b_interleaves, height, width), dtype=bool)
        for j, (y, z) in enumerate(points):
            subsets[j % b_interleaves, y, z] = True

        labels = [("A", f"B{t % b_interleaves + 1}") for t in range(num_frames)]
        schedule = SamplingSchedule(
            height=height, width=width, num_frames=num_frames, a_radius=a_radius,
            b_interleaves=b_interleaves, lattice=(ry, rz), frame_labels=labels,
            acs_mask=acs, subsets=subsets,
        )
        logger.debug(f"Schedule built: {len(points)} periphery points in {b_interleaves} interleaves")
        return schedule

    @staticmethod
    def window(schedule: SamplingSchedule, frame: int, vs: int) -> List[int]:
        """The vs frames nearest to `frame`, ties toward earlier, kept inside the sequence"""
        if not 0 <= frame < schedule.num_frames:
            raise ParameterError(f"frame {frame} outside [0, {schedule.num_frames})")
        if not 1 <= vs <= schedule.b_interleaves:
            raise ParameterError(f"vs must be in [1, {schedule.b_interleaves}], got {vs}")
        if vs > schedule.num_frames:
            raise ParameterError(f"vs {vs} exceeds the {schedule.num_frames}-frame sequence")
        start = min(max(frame - vs // 2, 0), schedule.num_frames - vs)
        return list(range(start, start + vs))

    @staticmethod
    def subset_index(schedule: SamplingSchedule, frame: int) -> int:
        return frame % schedule.b_interleaves

    @classmethod
    def mask_for_frame(cls, schedule: SamplingSchedule, frame: int, vs: int) -> SamplingMask:
        """A block plus the periphery subsets of the vs nearest frames"""
        mask = schedule.acs_mask.copy()
        for t in cls.window(schedule, frame, vs):
            mask |= schedule.subsets[cls.subset_index(schedule, t)]
        return SamplingMask(mask=mask, vs=vs, frame=frame, lattice=schedule.lattice)

    @staticmethod
    def _check_shapes(x: MultiCoilImage, mask: SamplingMask):
        if x.data.shape[1:] != mask.mask.shape:
            raise ContractError(f"image {x.data.shape} does not match mask {mask.mask.shape}")

    @classmethod
    def forward_project(cls, x: MultiCoilImage, mask: SamplingMask) -> KSpaceFrame:
        """P_mask F x per coil"""
        cls._check_shapes(x, mask)
        k = fft2c(x.data) * mask.mask[None]
        return KSpaceFrame(data=k, mask=mask, frame_index=x.frame_index)

    @staticmethod
    def adjoint(k: KSpaceFrame) -> MultiCoilImage:
        """F^-1 P_mask k per coil (adjoint of forward_project)"""
        data = ifft2c(k.data * k.mask.mask[None])
        return MultiCoilImage(data=data, frame_index=k.frame_index, role=Role.aliased)

    @classmethod
    def aliased_recon(cls, x: MultiCoilImage, mask: SamplingMask) -> MultiCoilImage:
        """Y = F^-1 P_mask F X"""
        return cls.adjoint(cls.forward_project(x, mask))

    @classmethod
    def acquire_sequence(cls, frames: Sequence[MultiCoilImage], schedule: SamplingSchedule) -> List[KSpaceFrame]:
        """Per-frame TWIST acquisitions: each frame samples A plus its own B subset"""
        if len(frames) != schedule.num_frames:
            raise ContractError(f"{len(frames)} frames for a {schedule.num_frames}-frame schedule")
        return [cls.forward_project(x, cls.mask_for_frame(schedule, x.frame_index, 1)) for x in frames]

    @classmethod
    def view_share_combine(cls, frames: Sequence[KSpaceFrame], target_frame: int, vs: int,
                           schedule: SamplingSchedule = None) -> KSpaceFrame:
        """Merge the periphery samples of the vs frames around target_frame.

        Points sampled by several frames (the A block) take the value of the frame
        temporally nearest to the target; the target itself always wins.
        """
        if schedule is not None:
            selected = cls.window(schedule, target_frame, vs)
        else:
            if vs < 1 or vs > len(frames):
                raise ParameterError(f"vs {vs} out of range for {len(frames)} frames")
            start = min(max(target_frame - vs // 2, 0), len(frames) - vs)
            selected = list(range(start, start + vs))
        by_index = {f.frame_index: f for f in frames}
        if vs == 1 and target_frame in by_index:
            return by_index[target_frame]
        missing = [t for t in selected if t not in by_index]
        if missing:
            raise ContractError(f"frames {missing} needed for view sharing are absent")

        # Overlap anywhere other than the shared block is a contract violation
        acs = schedule.acs_mask if schedule is not None else np.logical_and.reduce(
            [by_index[t].mask.mask for t in selected]
        )
        periphery = [by_index[t].mask.mask & ~acs for t in selected]
        if np.any(np.sum(periphery, axis=0) > 1):
            raise ContractError("periphery subsets of the selected frames overlap")

        target = by_index[target_frame]
        shape = target.data.shape
        data = np.zeros(shape, dtype=np.result_type(*[by_index[t].data.dtype for t in selected]))
        mask = np.zeros(shape[1:], dtype=bool)
        # Farthest first, so nearer frames overwrite shared points
        for t in sorted(selected, key=lambda t: (abs(t - target_frame), t), reverse=True):
            f = by_index[t]
            if f.data.shape != shape:
                raise ContractError(f"frame {t} has shape {f.data.shape}, expected {shape}")
            data[:, f.mask.mask] = f.data[:, f.mask.mask]
            mask |= f.mask.mask
        lattice = schedule.lattice if schedule is not None else target.mask.lattice
        combined = SamplingMask(mask=mask, vs=vs, frame=target_frame, lattice=lattice)
        return KSpaceFrame(data=data, mask=combined, frame_index=target_frame)
