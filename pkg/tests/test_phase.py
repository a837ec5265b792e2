import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from jigsawscan.patterns import FringeParams, arrangement_matrix, carrier_phase
from jigsawscan.phase import (
    analytic_reference,
    deinterleave,
    extract_phase,
    interleave,
    merge_color,
    phase_difference,
    recover_reflectivity,
    reference_phase_maps,
    unwrap_2d,
    wrap,
    wrapped_phase,
)
from jigsawscan.pipeline import PipelineConfig, run_pipeline
from jigsawscan.scene import modulate_scene, stretch_scene, synthesize_scene

TWO_PI = 2 * np.pi
P = FringeParams()


def loop_deinterleave(image, s, mode):
    # direct search for the cell sample whose arrangement entry is k
    h, w = image.shape
    sh, sw = (h, w // 4) if mode == "col" else (h // 4, w)
    out = np.zeros((4, sh, sw))
    for k in range(4):
        for y in range(sh):
            for x in range(sw):
                for j in range(4):
                    u, v = (y, 4 * x + j) if mode == "col" else (4 * y + j, x)
                    if (u + v + s) % 4 == k:
                        out[k, y, x] = image[u, v]
    return out


@pytest.mark.parametrize("mode", ["col", "row"])
@pytest.mark.parametrize("s", range(4))
def test_deinterleave_matches_loop_oracle(mode, s):
    rng = np.random.default_rng(s)
    shape = (8, 32) if mode == "col" else (32, 8)
    image = rng.random(shape)
    arr = arrangement_matrix(s)
    stack = deinterleave(image, arr, mode)
    assert np.array_equal(stack, loop_deinterleave(image, s, mode))
    assert np.array_equal(interleave(stack, arr, mode), image)


@pytest.mark.parametrize("mode", ["col", "row"])
def test_interleave_roundtrip_on_stacks(mode):
    stack = np.random.default_rng(9).random((4, 8, 8))
    arr = arrangement_matrix(2)
    assert np.array_equal(deinterleave(interleave(stack, arr, mode), arr, mode), stack)


def test_deinterleave_constant_and_errors():
    assert np.all(deinterleave(np.full((4, 8), 7.0), arrangement_matrix(0), "col") == 7)
    with pytest.raises(ValueError):
        deinterleave(np.zeros((4, 6)), arrangement_matrix(0), "col")
    with pytest.raises(ValueError):
        deinterleave(np.zeros((6, 4)), arrangement_matrix(0), "row")


@pytest.mark.parametrize("mode", ["col", "row"])
def test_deinterleave_modulated_scene(mode):
    scene = synthesize_scene("gaussian-bump", 8, 12)
    arr = arrangement_matrix(1)
    stack = deinterleave(modulate_scene(stretch_scene(scene, mode), P, arr, mode), arr, mode)
    y, x = np.indices(scene.shape)
    theta = TWO_PI * P.f_u * x + TWO_PI * P.f_v * y
    for k in range(4):
        expected = scene.reflectivity * P.b * np.cos(theta + P.phi0 + scene.phase + k * np.pi / 2)
        assert np.allclose(stack[k], expected, atol=1e-14)


def quad(theta, amp=1.0):
    return np.array([amp * np.cos(theta + k * np.pi / 2) for k in range(4)])


def test_wrapped_phase_cases():
    exact = np.array([1.0, 0.0, -1.0, 0.0]).reshape(4, 1, 1)
    phase, valid = wrapped_phase(exact)
    assert phase[0, 0] == 0 and valid[0, 0]
    phase, _ = wrapped_phase(quad(np.full((1, 1), np.pi / 4)))
    assert phase[0, 0] == pytest.approx(np.pi / 4)
    phase, valid = wrapped_phase(np.full((4, 2, 2), 3.0))
    assert np.all(phase == 0) and not valid.any()


def test_wrap_interval():
    assert wrap(np.pi) == np.pi
    assert wrap(-np.pi) == np.pi
    assert wrap(3 * np.pi / 2) == pytest.approx(-np.pi / 2)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (4, 3, 3), elements=st.floats(-1e3, 1e3)))
def test_wrapped_phase_range(stack):
    phase, _ = wrapped_phase(stack)
    assert np.all(phase > -np.pi) and np.all(phase <= np.pi)


def test_reference_wrapped_value():
    params = FringeParams(f_u=0, f_v=0, phi0=3 * np.pi / 2)
    w, _ = reference_phase_maps(params, arrangement_matrix(0), "col", (8, 8))
    assert np.allclose(w, -np.pi / 2, atol=1e-14)


def test_reference_rows_identical_without_vertical_carrier():
    params = FringeParams(f_u=1 / 50, f_v=0)
    w, _ = reference_phase_maps(params, arrangement_matrix(0), "col", (8, 16))
    assert np.allclose(w, w[0], atol=1e-14)


@pytest.mark.parametrize("mode", ["col", "row"])
def test_reference_unwrapped_is_ramp(mode):
    params = FringeParams(f_u=1 / 7, f_v=1 / 11)
    _, unwrapped = reference_phase_maps(params, arrangement_matrix(3), mode, (16, 24))
    assert np.allclose(np.diff(unwrapped, axis=1), TWO_PI / 7, atol=1e-12)
    assert np.allclose(np.diff(unwrapped, axis=0), TWO_PI / 11, atol=1e-12)
    gap = (unwrapped - analytic_reference(params, (16, 24))) / TWO_PI
    assert np.allclose(gap, np.round(gap[0, 0]), atol=1e-12)


def test_unwrap_continuous_input_unchanged():
    x = np.random.default_rng(0).uniform(-0.4, 0.4, (9, 9))
    assert np.array_equal(unwrap_2d(x), x)


def test_unwrap_ramp_row():
    ramp = 0.9 * np.pi * np.arange(20.0)
    out = unwrap_2d(wrap(ramp)[None, :])[0]
    shift = out[10] - ramp[10]
    assert np.allclose(out - shift, ramp, atol=1e-12)
    assert shift / TWO_PI == pytest.approx(round(shift / TWO_PI), abs=1e-12)


def test_unwrap_masked_pixels_inherit():
    ramp = 0.3 * np.arange(10.0)[None, :].repeat(3, axis=0)
    mask = np.ones_like(ramp, bool)
    mask[:, 7] = False
    w = wrap(ramp).copy()
    w[:, 7] = 0.0
    out = unwrap_2d(w, mask)
    assert np.allclose(out[:, 7], out[:, 6])
    assert np.allclose(out[:, 8], ramp[:, 8])


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(-1.2, 1.2), b=st.floats(-1.2, 1.2), c=st.floats(-1.2, 1.2),
    h=st.integers(2, 12), w=st.integers(2, 12), off=st.floats(-20, 20),
)
def test_unwrap_smooth_fields(a, b, c, h, w, off):
    y, x = np.indices((h, w), dtype=float)
    field = off + a * x + b * y + c * np.sin(0.5 * x) * 0.5
    gap = (unwrap_2d(wrap(field)) - field) / TWO_PI
    assert np.allclose(gap, np.round(gap[0, 0]), atol=1e-9)


def test_phase_difference_cases():
    ref = np.random.default_rng(1).normal(size=(4, 4)) * 10
    assert np.all(phase_difference(ref, ref) == 0)
    assert np.allclose(phase_difference(ref + np.pi, ref), np.pi)
    assert np.allclose(phase_difference(ref + TWO_PI + 0.5, ref), 0.5)
    d = phase_difference(np.array([-1e-17, -3.0]), np.zeros(2))
    assert np.all((d >= 0) & (d < TWO_PI))


def test_reflectivity_quadrature():
    theta = np.random.default_rng(2).uniform(0, TWO_PI, (5, 5))
    assert np.allclose(recover_reflectivity(quad(theta, 0.7), P), 0.7)
    assert np.all(recover_reflectivity(np.zeros((4, 2, 2)), P) == 0)
    params = FringeParams(a=0.0, b=0.5)
    assert np.allclose(recover_reflectivity(quad(theta, 0.35), params), 0.7)


def test_reflectivity_division():
    theta = np.random.default_rng(3).uniform(0, TWO_PI, (5, 5))
    params = FringeParams(a=0.3, b=1.0)
    stack = np.array([0.6 * (0.3 + np.cos(theta + k * np.pi / 2)) for k in range(4)])
    assert np.allclose(recover_reflectivity(stack, params, "division"), 0.6)
    with pytest.raises(ValueError):
        recover_reflectivity(stack, params, "ratio")


def test_dc_rejection():
    scene = stretch_scene(synthesize_scene("gaussian-bump", 16, 16), "col")
    arr = arrangement_matrix(0)
    plain = modulate_scene(scene, FringeParams(a=0.0), arr, "col")
    dc = modulate_scene(scene, FringeParams(a=0.3), arr, "col")
    p0, _ = wrapped_phase(deinterleave(plain, arr, "col"))
    p1, _ = wrapped_phase(deinterleave(dc, arr, "col"))
    assert np.max(np.abs(wrap(p1 - p0))) <= 1e-9


def circular_error(a, b):
    return np.abs(wrap(a - b))


@pytest.mark.parametrize("gen", ["gaussian-bump", "checkerboard", "ramp", "steps"])
@pytest.mark.parametrize("mode", ["col", "row"])
@pytest.mark.parametrize("reference", ["numeric", "analytic"])
def test_noiseless_pipeline_exact(gen, mode, reference):
    scene = synthesize_scene(gen, 32, 32)
    res = run_pipeline(scene, PipelineConfig(mode=mode, reference=reference))
    maps = res.maps
    inner = (slice(2, -2), slice(2, -2))
    err = circular_error(maps.phase, scene.phase)[inner]
    assert err.max() <= 1e-6
    assert np.max(np.abs(maps.reflectivity - scene.reflectivity)) <= 1e-6
    assert maps.valid.all()


def test_extract_phase_bad_reference():
    scene = synthesize_scene("ramp", 8, 8)
    img = modulate_scene(stretch_scene(scene, "col"), P, arrangement_matrix(0), "col")
    with pytest.raises(ValueError):
        extract_phase(img, P, arrangement_matrix(0), "col", reference="flat")


def test_merge_color():
    m = np.linspace(0, 1, 12).reshape(3, 4)
    rgb = merge_color([m, m, m])
    assert rgb.shape == (3, 4, 3) and rgb.dtype == np.uint8
    assert np.array_equal(rgb[..., 0], rgb[..., 1]) and np.array_equal(rgb[..., 1], rgb[..., 2])
    z = merge_color([m + 1, np.zeros_like(m), m + 2])
    assert np.all(z[..., 1] == 0)
    with pytest.raises(ValueError):
        merge_color([m, m, m[:2]])
    with pytest.raises(ValueError):
        merge_color([m, m])


def test_carrier_matches_analytic_on_scene_grid():
    for mode in ("col", "row"):
        theta = carrier_phase(P, mode, (32, 32) if mode == "row" else (8, 32))
        sampled = theta[:, ::4] if mode == "col" else theta[::4]
        assert np.allclose(sampled + P.phi0, analytic_reference(P, sampled.shape), atol=1e-12)
