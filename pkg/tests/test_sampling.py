"""
Sampling schedule and forward model tests
"""

import numpy as np
import pytest

from app.core.errors import ContractError, ParameterError
from app.core.fourier import fft2c, ifft2c
from app.schemas import KSpaceFrame, MultiCoilImage, SamplingMask
from app.services import PhantomService, SamplingService


def random_image(rng, shape=(2, 32, 32)):
    return MultiCoilImage(data=rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def test_schedule_union_is_lattice_plus_acs():
    """Test B subsets plus A block cover exactly the lattice and ACS points"""
    schedule = SamplingService.build_schedule(96, 96, 12, (3, 2), 10, 5)
    ky, kz = np.meshgrid(np.arange(96) - 48, np.arange(96) - 48, indexing="ij")
    lattice = (ky % 3 == 0) & (kz % 2 == 0)
    acs = (np.abs(ky + 0.5) < 12) & (np.abs(kz + 0.5) < 12)
    expected = lattice | acs
    union = schedule.acs_mask | np.any(schedule.subsets, axis=0)
    assert union.sum() == expected.sum()
    np.testing.assert_array_equal(union, expected)


def test_schedule_subsets_disjoint(schedule):
    """Test periphery subsets are pairwise disjoint and near-equal in size"""
    counts = schedule.subsets.sum(axis=(1, 2))
    assert np.all(np.sum(schedule.subsets, axis=0) <= 1)
    assert not np.any(schedule.subsets & schedule.acs_mask[None])
    assert counts.max() - counts.min() <= 1


def test_single_interleave_is_whole_periphery():
    """Test b_interleaves=1 gives one subset equal to the periphery lattice"""
    schedule = SamplingService.build_schedule(32, 32, 6, (3, 2), 4, 1)
    periphery = SamplingService.lattice_points(32, 32, (3, 2)) & ~schedule.acs_mask
    np.testing.assert_array_equal(schedule.subsets[0], periphery)


def test_schedule_labels(schedule):
    """Test every frame samples A plus its own B subset"""
    assert schedule.frame_labels[0] == ("A", "B1")
    assert schedule.frame_labels[5] == ("A", "B1")
    assert schedule.frame_labels[4] == ("A", "B5")


def test_schedule_invalid_radius():
    """Test ACS larger than the grid"""
    with pytest.raises(ParameterError):
        SamplingService.build_schedule(32, 32, 16, (3, 2), 4, 5)


def test_mask_full_view_sharing_is_lattice(schedule):
    """Test vs = b_interleaves gives the uniform lattice plus ACS"""
    for t in range(schedule.num_frames):
        mask = SamplingService.mask_for_frame(schedule, t, schedule.b_interleaves)
        np.testing.assert_array_equal(mask.mask, schedule.lattice_mask())


def test_mask_nested_and_acceleration(schedule):
    """Test mask(2) within mask(3) within mask(5) and R decreasing with VS"""
    for t in range(schedule.num_frames):
        m2, m3, m5 = (SamplingService.mask_for_frame(schedule, t, vs) for vs in (2, 3, 5))
        assert not np.any(m2.mask & ~m3.mask)
        assert not np.any(m3.mask & ~m5.mask)
        assert m2.acceleration > m5.acceleration
        assert m2.acceleration == pytest.approx(32 * 32 / m2.mask.sum())


def test_mask_vs_out_of_range(schedule):
    """Test invalid view-sharing counts"""
    with pytest.raises(ParameterError):
        SamplingService.mask_for_frame(schedule, 0, 0)
    with pytest.raises(ParameterError):
        SamplingService.mask_for_frame(schedule, 0, 6)


def test_window_stays_inside_sequence(schedule):
    """Test edge frames shift their window inward"""
    assert SamplingService.window(schedule, 0, 3) == [0, 1, 2]
    assert SamplingService.window(schedule, 5, 3) == [3, 4, 5]
    assert SamplingService.window(schedule, 2, 2) == [1, 2]


def test_full_mask_unitary(rng):
    """Test full sampling recovers the image and preserves the norm"""
    x = random_image(rng)
    k = SamplingService.forward_project(x, SamplingMask.full(32, 32))
    assert np.linalg.norm(k.data) == pytest.approx(np.linalg.norm(x.data), rel=1e-6)
    np.testing.assert_allclose(ifft2c(k.data), x.data, atol=1e-10)


def test_constant_image_impulse_at_dc():
    """Test DC bin sits at (H//2, W//2)"""
    x = MultiCoilImage(data=np.ones((1, 16, 12)))
    k = fft2c(x.data)[0]
    assert abs(k[8, 6]) == pytest.approx(np.sqrt(16 * 12))
    k[8, 6] = 0
    assert np.max(np.abs(k)) < 1e-10


def test_adjoint_identity(rng, schedule):
    """Test <P F x, k> = <x, F^-1 P k>"""
    mask = SamplingService.mask_for_frame(schedule, 2, 3)
    x = random_image(rng)
    k_data = (rng.standard_normal((2, 32, 32)) + 1j * rng.standard_normal((2, 32, 32))) * mask.mask[None]
    k = KSpaceFrame(data=k_data, mask=mask)
    lhs = np.vdot(SamplingService.forward_project(x, mask).data, k.data)
    rhs = np.vdot(x.data, SamplingService.adjoint(k).data)
    assert abs(lhs - rhs) <= 1e-6 * abs(lhs)


def test_aliased_full_mask_and_idempotent(rng, schedule):
    """Test Y = X for a full mask and A(A(X)) = A(X)"""
    x = random_image(rng)
    np.testing.assert_allclose(SamplingService.aliased_recon(x, SamplingMask.full(32, 32)).data, x.data, atol=1e-10)
    mask = SamplingService.mask_for_frame(schedule, 1, 2)
    once = SamplingService.aliased_recon(x, mask)
    twice = SamplingService.aliased_recon(once, mask)
    np.testing.assert_allclose(twice.data, once.data, atol=1e-10)


def test_lattice_point_source_aliases():
    """Test a pure lattice mask replicates a point source every H/Ry, W/Rz"""
    data = np.zeros((1, 48, 48), dtype=np.complex128)
    data[0, 24, 24] = 1.0
    mask = SamplingMask(mask=SamplingService.lattice_points(48, 48, (3, 2)))
    aliased = np.abs(SamplingService.aliased_recon(MultiCoilImage(data=data), mask).data[0])
    expected = np.zeros((48, 48))
    for m in range(3):
        for n in range(2):
            expected[(24 + 16 * m) % 48, (24 + 24 * n) % 48] = 1.0 / 6.0
    np.testing.assert_allclose(aliased, expected, atol=1e-10)


def test_forward_shape_mismatch(rng):
    """Test image / mask shape contract"""
    with pytest.raises(ContractError):
        SamplingService.forward_project(random_image(rng), SamplingMask.full(16, 16))


def test_view_share_vs1_returns_target(static_spec, schedule):
    """Test vs=1 returns the target frame unchanged"""
    frames, _ = PhantomService.make_phantom_sequence(static_spec.model_copy(update={"num_frames": 6}))
    acquired = SamplingService.acquire_sequence(frames, schedule)
    combined = SamplingService.view_share_combine(acquired, 3, 1, schedule)
    np.testing.assert_array_equal(combined.data, acquired[3].data)
    np.testing.assert_array_equal(combined.mask.mask, acquired[3].mask.mask)


def test_view_share_static_equals_lattice_sampling(static_spec, schedule):
    """Test full view sharing of a static scene equals lattice sampling of one frame"""
    frames, _ = PhantomService.make_phantom_sequence(static_spec.model_copy(update={"num_frames": 6}))
    acquired = SamplingService.acquire_sequence(frames, schedule)
    combined = SamplingService.view_share_combine(acquired, 2, 5, schedule)
    expected = SamplingService.forward_project(frames[2], SamplingMask(mask=schedule.lattice_mask()))
    np.testing.assert_array_equal(combined.mask.mask, schedule.lattice_mask())
    np.testing.assert_allclose(combined.data, expected.data, atol=1e-5)


def test_view_share_dynamic_differs_from_single_frame(rng):
    """Test a step change between frames shows up in the combined k-space"""
    schedule = SamplingService.build_schedule(32, 32, 6, (3, 2), 2, 2)
    before = random_image(rng, (1, 32, 32))
    after = MultiCoilImage(data=before.data * 3.0, frame_index=1)
    acquired = SamplingService.acquire_sequence([before, after], schedule)
    combined = SamplingService.view_share_combine(acquired, 0, 2, schedule)
    lattice = SamplingMask(mask=schedule.lattice_mask())
    for frame in (before, after):
        single = SamplingService.forward_project(frame, lattice)
        assert not np.allclose(combined.data, single.data)
    # shared block keeps the target's values
    acs = schedule.acs_mask
    np.testing.assert_array_equal(combined.data[:, acs], acquired[0].data[:, acs])


def test_view_share_overlap_rejected(rng, schedule):
    """Test overlapping periphery samples"""
    full = SamplingMask.full(32, 32)
    frames = [SamplingService.forward_project(random_image(rng).model_copy(update={"frame_index": t}), full)
              for t in range(6)]
    frames = [f.model_copy(update={"frame_index": t}) for t, f in enumerate(frames)]
    with pytest.raises(ContractError):
        SamplingService.view_share_combine(frames, 2, 2, schedule)


def test_view_share_missing_frame(schedule):
    """Test absent neighbor frames"""
    frames, _ = PhantomService.make_phantom_sequence(
        {"grid_height": 32, "grid_width": 32, "num_frames": 6, "num_coils": 1}
    )
    acquired = SamplingService.acquire_sequence(frames, schedule)
    with pytest.raises(ContractError):
        SamplingService.view_share_combine(acquired[:2], 1, 3, schedule)
