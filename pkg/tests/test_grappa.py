"""
GRAPPA calibration and interpolation tests
"""

import numpy as np
import pytest

from app.core.errors import CalibrationError, ContractError, NumericalError, ParameterError
from app.core.fourier import fft2c
from app.schemas import KSpaceFrame, PhantomSpec, SamplingMask, SSoSImage, default_phantom_spec
from app.services import GrappaService, MetricsService, PhantomService, SamplingService

LATTICE = (3, 2)


def planted_kspace(rng, num_coils=4, size=48, modes=6) -> np.ndarray:
    """Sum of complex exponentials per coil: every point is a fixed linear
    combination of its lattice neighbors, the same everywhere on the grid"""
    yy, zz = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    omegas = rng.uniform(-0.5, 0.5, size=(modes, 2))
    amps = rng.standard_normal((num_coils, modes)) + 1j * rng.standard_normal((num_coils, modes))
    waves = np.exp(1j * (omegas[:, 0, None, None] * yy + omegas[:, 1, None, None] * zz))
    return np.einsum("cj,jyz->cyz", amps, waves)


def full_frame(data: np.ndarray) -> KSpaceFrame:
    return KSpaceFrame(data=data, mask=SamplingMask.full(*data.shape[1:]))


def test_offset_classes():
    """Test one class per missing position of a lattice cell"""
    classes = GrappaService.offset_classes(LATTICE)
    assert len(classes) == 5
    assert (0, 0) not in classes


def test_source_offsets_geometry():
    """Test 5x5 sampled-neighbor taps step by the lattice factors"""
    offsets = GrappaService.source_offsets(LATTICE, (5, 5))
    assert offsets.shape == (25, 2)
    assert set(offsets[:, 0]) == {-6, -3, 0, 3, 6}
    assert set(offsets[:, 1]) == {-4, -2, 0, 2, 4}


def test_planted_kernel_recovers_missing_points(rng):
    """Test calibration on planted data fills missing points exactly"""
    data = planted_kspace(rng)
    kernel = GrappaService.calibrate(full_frame(data), LATTICE, (5, 5), regularization=1e-9)
    lattice = SamplingService.lattice_points(48, 48, LATTICE)
    undersampled = KSpaceFrame(data=data * lattice[None], mask=SamplingMask(mask=lattice, lattice=LATTICE))
    filled = GrappaService.interpolate(undersampled, kernel)

    # interior points only: sources near the edge fall outside the grid
    interior = np.zeros((48, 48), dtype=bool)
    interior[10:-10, 8:-8] = True
    check = interior & ~lattice
    err = np.linalg.norm(filled.data[:, check] - data[:, check]) / np.linalg.norm(data[:, check])
    assert err < 1e-4


def test_planted_kernel_weights_reproduce_on_new_data(rng):
    """Test weights fitted on one region predict the planted relation elsewhere"""
    data = planted_kspace(rng, size=48)
    acs = SamplingService.acs_block(48, 48, 12)
    frame = KSpaceFrame(data=data * acs[None], mask=SamplingMask(mask=acs))
    kernel = GrappaService.calibrate(frame, LATTICE, (5, 5), regularization=1e-9)
    offsets = GrappaService.source_offsets(LATTICE, (5, 5))
    margins = GrappaService._margins(offsets, LATTICE)
    base_y, base_z = np.array([8, 40]), np.array([40, 6])
    for c, (dy, dz) in enumerate(kernel.offsets):
        sources = GrappaService.gather_sources(data, base_y, base_z, offsets, margins)
        predicted = sources @ kernel.weights[c].T
        target = data[:, base_y + dy, base_z + dz].T
        assert np.linalg.norm(predicted - target) <= 1e-4 * np.linalg.norm(target)


def test_unregularized_singular_system(rng):
    """Test lambda = 0 on rank-deficient calibration data"""
    with pytest.raises(NumericalError):
        GrappaService.calibrate(full_frame(planted_kspace(rng, modes=3)), LATTICE, (5, 5), regularization=0.0)


def test_acs_too_small():
    """Test ACS smaller than the kernel footprint"""
    acs = SamplingService.acs_block(32, 32, 4)
    frame = KSpaceFrame(data=np.ones((2, 32, 32), dtype=np.complex128) * acs[None], mask=SamplingMask(mask=acs))
    with pytest.raises(CalibrationError):
        GrappaService.calibrate(frame, LATTICE, (5, 5))


def test_negative_regularization(rng):
    """Test invalid regularization"""
    with pytest.raises(ParameterError):
        GrappaService.calibrate(full_frame(planted_kspace(rng)), LATTICE, regularization=-1.0)


def test_interpolate_requires_lattice(rng):
    """Test a mask without the kernel's lattice"""
    data = planted_kspace(rng)
    kernel = GrappaService.calibrate(full_frame(data), LATTICE, (5, 5))
    mask = SamplingService.lattice_points(48, 48, (3, 4))
    frame = KSpaceFrame(data=data * mask[None], mask=SamplingMask(mask=mask))
    with pytest.raises(ContractError):
        GrappaService.interpolate(frame, kernel)


def test_interpolate_keeps_acquired_points(rng):
    """Test acquired samples pass through untouched"""
    data = planted_kspace(rng)
    kernel = GrappaService.calibrate(full_frame(data), LATTICE, (5, 5))
    lattice = SamplingService.lattice_points(48, 48, LATTICE)
    filled = GrappaService.interpolate(KSpaceFrame(data=data * lattice[None], mask=SamplingMask(mask=lattice)),
                                       kernel)
    np.testing.assert_array_equal(filled.data[:, lattice], data[:, lattice])
    assert filled.mask.mask.all()


def static_spec_64(num_coils: int = 4, edge_sigma: float = None) -> PhantomSpec:
    """64x64 static head phantom; edge blur from the PhantomSpec default unless given"""
    spec = default_phantom_spec()
    structures = [s.model_copy(update={"bolus": None}) for s in spec.structures]
    extra = {} if edge_sigma is None else {"edge_sigma": edge_sigma}
    return PhantomSpec(grid_height=64, grid_width=64, num_frames=5, num_coils=num_coils,
                       structures=structures, **extra)


def desk_schedule(num_frames: int = 5):
    """24x24 ACS, (3, 2) lattice, five interleaves"""
    return SamplingService.build_schedule(64, 64, 12, LATTICE, num_frames, 5)


def relative_error(recon, truth) -> float:
    a, b = MetricsService.ssos_array(recon.data), MetricsService.ssos_array(truth.data)
    return float(np.sum((a - b) ** 2) / np.sum(b ** 2))


def test_grappa_static_phantom_psnr():
    """Test GRAPPA with four coils on the default static phantom reaches 30 dB against full sampling"""
    spec = static_spec_64(num_coils=4)
    frames, _ = PhantomService.make_phantom_sequence(spec)
    schedule = desk_schedule()
    acquired = SamplingService.acquire_sequence(frames, schedule)
    recon = GrappaService.grappa_reconstruct(acquired, schedule, 2, kernel_size=(5, 5))
    oracle = MetricsService.ssos(frames[2])
    assert recon.data.shape == frames[2].data.shape
    assert MetricsService.psnr(MetricsService.ssos(recon), oracle) >= 30.0


def test_grappa_beats_zero_filling():
    """Test interpolation improves on the zero-filled lattice image"""
    spec = static_spec_64(num_coils=8, edge_sigma=0.8)
    frames, _ = PhantomService.make_phantom_sequence(spec)
    schedule = desk_schedule()
    acquired = SamplingService.acquire_sequence(frames, schedule)
    combined = SamplingService.view_share_combine(acquired, 2, 5, schedule)
    oracle = MetricsService.ssos(frames[2])
    zero_filled = SSoSImage(data=MetricsService.ssos_array(SamplingService.adjoint(combined).data))
    grappa = MetricsService.ssos(GrappaService.grappa_reconstruct(acquired, schedule, 2))
    assert MetricsService.psnr(grappa, oracle) > MetricsService.psnr(zero_filled, oracle)


def test_grappa_blurs_step_change():
    """Test full view sharing blends pre- and post-change frames at the change frame"""
    before = static_spec_64(num_coils=8, edge_sigma=0.8)
    brighter = [s.model_copy(update={"intensity": 5.0 * s.intensity}) if s.name.startswith("artery") else s
                for s in before.structures]
    after = before.model_copy(update={"structures": brighter})
    pre, sens = PhantomService.make_phantom_sequence(before)
    post, _ = PhantomService.make_phantom_sequence(after, sens)
    schedule = desk_schedule()

    # frames 0-1 before the change, 2-4 after; the static reference stays after the change
    step = [frame.model_copy(update={"frame_index": t}) for t, frame in enumerate(pre[:2] + post[2:])]
    step_error = relative_error(
        GrappaService.grappa_reconstruct(SamplingService.acquire_sequence(step, schedule), schedule, 2), post[2])
    static_error = relative_error(
        GrappaService.grappa_reconstruct(SamplingService.acquire_sequence(post, schedule), schedule, 2), post[2])
    assert step_error > 0.0
    assert step_error > static_error


def test_desk_bolus_leaks_into_arrival_frame():
    """Test full view sharing pulls post-arrival enhancement into the artery's arrival frame"""
    spec = default_phantom_spec().model_copy(update={"num_frames": 12})
    frames, _ = PhantomService.make_phantom_sequence(spec)
    schedule = SamplingService.build_schedule(64, 64, 12, LATTICE, 12, 5)
    acquired = SamplingService.acquire_sequence(frames, schedule)
    artery = next(s for s in spec.structures if s.name == "artery_left")
    roi = PhantomService.structure_mask(artery, 64, 64)
    arrival = int(artery.bolus.t0)

    truth = MetricsService.roi_series(MetricsService.ssos_array(np.stack([f.data for f in frames])), roi)
    assert truth[arrival] == pytest.approx(truth[0])
    assert MetricsService.start_to_peak(truth) == 1

    grappa = {t: MetricsService.roi_series(
        MetricsService.ssos_array(GrappaService.grappa_reconstruct(acquired, schedule, t).data)[None], roi)[0]
        for t in (0, arrival)}
    assert abs(grappa[arrival] - grappa[0]) > 0.005 * (truth.max() - truth[0])


def test_kernel_save_load(tmp_path, rng):
    """Test kernel persistence keeps geometry and weights"""
    kernel = GrappaService.calibrate(full_frame(planted_kspace(rng)), LATTICE, (5, 5))
    GrappaService.save_kernel(kernel, tmp_path / "kernel")
    loaded = GrappaService.load_kernel(tmp_path / "kernel")
    assert loaded.offsets == kernel.offsets
    assert loaded.lattice == kernel.lattice
    np.testing.assert_allclose(loaded.weights, kernel.weights.astype(np.complex64), rtol=1e-6)


def test_fully_sampled_kspace_is_fixed_point(rng):
    """Test a fully sampled frame is returned unchanged"""
    data = fft2c(rng.standard_normal((2, 48, 48)) + 0j)
    kernel = GrappaService.calibrate(full_frame(data), LATTICE, (5, 5))
    out = GrappaService.interpolate(full_frame(data), kernel)
    np.testing.assert_array_equal(out.data, data)
