"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Statistical thresholds were validated against their independent
oracles (brute force, Monte Carlo, closed forms) before being frozen here.
"""

import struct
import time

import numpy as np
from click.testing import CliRunner

from latentedit.cli import main as cli_main
from latentedit.config import EditConfig, parse_config
from latentedit.denoise import AnalyticGaussianDenoiser, ConditioningVector, GaussianWorld
from latentedit.eiam import derive_target, describe_source, embed_prompt, segment_objects
from latentedit.errors import FormatError, LengthError
from latentedit.maskops import coefficient_field, distance_transform
from latentedit.ngm import GuidanceWindow, guide_step
from latentedit.pipeline import run_edit, strip_timings
from latentedit.rng import gaussian
from latentedit.schedule import NoiseSchedule, invert, reverse_step
from latentedit.snis import structural_init
from latentedit.volume import (
    EditMask,
    LatentVolume,
    elementwise_lerp,
    read_volume,
    volume_to_bytes,
    write_volume,
)

from conftest import INSTRUCTION, SOURCE_PROMPT, TARGET_PROMPT, VIDEO_ID, patterned_mean


def check(name: str, ok: bool, detail: str = ""):
    line = f"[acceptance] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, f"{name}: {detail}"


def brute_force_distances(plane: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(plane)
    gy, gx = np.mgrid[0 : plane.shape[0], 0 : plane.shape[1]]
    return np.sqrt(((gy[..., None] - ys) ** 2 + (gx[..., None] - xs) ** 2).min(axis=-1))


def structured_masks():
    gy, gx = np.mgrid[0:32, 0:32]
    center = np.sqrt((gy - 15.5) ** 2 + (gx - 15.5) ** 2)
    masks = []
    for r_in, r_out in ((2, 5), (5, 8), (8, 12), (12, 15), (0, 3)):  # rings
        masks.append(((center >= r_in) & (center <= r_out)).astype(float))
    masks.append((gy == gx).astype(float))                     # main diagonal
    masks.append((gy + gx == 31).astype(float))                # anti-diagonal
    masks.append((np.abs(gy - gx) <= 2).astype(float))         # thick diagonal
    masks.append(((gy - gx) % 8 == 0).astype(float))           # diagonal stripes
    masks.append((np.abs(gy + gx - 31) <= 1).astype(float))    # thick anti-diagonal
    return masks


def test_criterion_01_distance_transform_oracle():
    start = time.perf_counter()
    gen = np.random.default_rng(123)
    worst = 0.0
    count = 0
    for _ in range(100):
        plane = (gen.random((32, 32)) < gen.uniform(0.01, 0.9)).astype(float)
        if not plane.any():
            plane[gen.integers(32), gen.integers(32)] = 1.0
        ours = distance_transform(EditMask(plane[None])).distances[0]
        worst = max(worst, float(np.abs(ours - brute_force_distances(plane)).max()))
        count += 1
    for plane in structured_masks():
        ours = distance_transform(EditMask(plane[None])).distances[0]
        worst = max(worst, float(np.abs(ours - brute_force_distances(plane)).max()))
        count += 1
    elapsed = time.perf_counter() - start
    check(
        "C1 distance-transform oracle",
        worst <= 1e-9 and count == 110 and elapsed < 5.0,
        f"max dev {worst:.2e} over {count} masks in {elapsed:.2f}s",
    )


def test_criterion_02_coefficient_field_anchors():
    m = 16.0
    # a straight mask column makes horizontal distance exact: d(x) = x
    plane = np.zeros((1, 8, 24))
    plane[0, :, 0] = 1.0
    dist = distance_transform(EditMask(plane))
    coeff = coefficient_field(dist, m).values[0]
    anchors_ok = (
        coeff[0, 0] == 1.0
        and coeff[0, 8] == 0.5
        and coeff[0, 16] == 0.0
        and coeff[0, 23] == 0.0
    )
    # 1/m-Lipschitz across every tested field
    lipschitz_ok = True
    gen = np.random.default_rng(7)
    fields = [coeff]
    for _ in range(20):
        p = (gen.random((32, 32)) < gen.uniform(0.02, 0.6)).astype(float)
        if not p.any():
            p[3, 3] = 1.0
        fields.append(coefficient_field(distance_transform(EditMask(p[None])), m).values[0])
    for field in fields:
        if np.abs(np.diff(field, axis=0)).max() > 1.0 / m + 1e-12:
            lipschitz_ok = False
        if np.abs(np.diff(field, axis=1)).max() > 1.0 / m + 1e-12:
            lipschitz_ok = False
        diag = np.abs(field[1:, 1:] - field[:-1, :-1]).max()
        if diag > np.sqrt(2) / m + 1e-12:
            lipschitz_ok = False
    check(
        "C2 coefficient-field anchors",
        anchors_ok and lipschitz_ok,
        f"D(0)={coeff[0, 0]}, D(8)={coeff[0, 8]}, D(16)={coeff[0, 16]}; Lipschitz ok={lipschitz_ok}",
    )


def _roundtrip_relative_error(total_steps: int, shape=(4, 2, 16, 16), sigma=1.3, seed=2024):
    sched = NoiseSchedule.linear(total_steps)
    mu = patterned_mean(shape)
    denoiser = AnalyticGaussianDenoiser(GaussianWorld({0: LatentVolume(mu)}, sigma), sched)
    cond = ConditioningVector(np.eye(8)[0])
    z0 = LatentVolume(mu + sigma * gaussian(seed, 850, shape))
    trajectory = invert(z0, total_steps, denoiser, cond, "ddim", sched)
    state = trajectory.entry(total_steps)
    for i in range(total_steps, 0, -1):
        state = reverse_step(state, i, denoiser, cond, "ddim", sched)
    return float(np.linalg.norm(state.data - z0.data) / np.linalg.norm(z0.data))


def test_criterion_03_inversion_round_trip():
    start = time.perf_counter()
    e100 = _roundtrip_relative_error(100)
    e200 = _roundtrip_relative_error(200)
    elapsed = time.perf_counter() - start
    check(
        "C3 inversion round trip",
        e100 < 1e-2 and (e200 / e100) < 0.7 and elapsed < 10.0,
        f"rel L2 at T=100: {e100:.5f}, ratio T=200/T=100: {e200 / e100:.3f}, {elapsed:.2f}s",
    )


def test_criterion_04_ngm_exactness():
    total_steps, t_start = 100, 95
    shape = (1, 1, 8, 8)
    sched = NoiseSchedule.linear(total_steps)
    mu = patterned_mean(shape)
    denoiser = AnalyticGaussianDenoiser(GaussianWorld({0: LatentVolume(mu)}, 1.3), sched)
    cond = ConditioningVector(np.eye(8)[0])
    z0 = LatentVolume(mu + 1.3 * gaussian(5, 851, shape))
    trajectory = invert(z0, t_start, denoiser, cond, "ddim", sched)
    mask = np.zeros((1, 8, 8))
    mask[0, 2:5, 2:5] = 1.0
    mask = EditMask(mask)
    outside = np.broadcast_to(mask.data[:, None] == 0.0, shape)
    window = GuidanceWindow.from_fractions(0.48, 0.85, total_steps)

    pinned_ok = True
    state = trajectory.entry(t_start)
    for i in range(t_start, 0, -1):
        state = reverse_step(state, i, denoiser, cond, "ddim", sched)
        state = guide_step(state, trajectory, mask, i - 1, window)
        if window.contains(i - 1):
            dev = np.abs(state.data[outside] - trajectory.entry(i - 1).data[outside]).max()
            if dev > 1e-12:
                pinned_ok = False

    # boundary levels 47 and 86 must pass through unguided, bit-exact
    probe = LatentVolume(gaussian(9, 852, shape))
    boundary_ok = (
        guide_step(probe, trajectory, mask, 47, window) is probe
        and guide_step(probe, trajectory, mask, 86, window) is probe
        and guide_step(probe, trajectory, mask, 48, window) is not probe
        and guide_step(probe, trajectory, mask, 85, window) is not probe
    )
    check(
        "C4 NGM exactness",
        pinned_ok and boundary_ok and (window.lo, window.hi) == (48, 85),
        f"window [{window.lo}, {window.hi}], pinned={pinned_ok}, boundaries={boundary_ok}",
    )


def test_criterion_05_snis_degenerate_and_convex():
    shape = (2, 2, 8, 8)
    z_star = LatentVolume(gaussian(1, 853, shape))
    z_inv = LatentVolume(gaussian(2, 853, shape))
    full = structural_init(z_star, z_inv, EditMask.ones((2, 8, 8)), 16.0)
    empty = structural_init(z_star, z_inv, EditMask.zeros((2, 8, 8)), 16.0)
    bit_exact = (
        full.data.tobytes() == z_star.data.tobytes()
        and empty.data.tobytes() == z_inv.data.tobytes()
    )

    # blend convexity on 1000 random elementwise cases
    gen = np.random.default_rng(99)
    cases_shape = (10, 2, 5, 10)  # 1000 pixels
    a = LatentVolume(gen.normal(size=cases_shape))
    b = LatentVolume(gen.normal(size=cases_shape))
    weights = gen.random((10, 5, 10))
    out = elementwise_lerp(a, b, weights).data
    lo = np.minimum(a.data, b.data)
    hi = np.maximum(a.data, b.data)
    convex = bool((out >= lo - 1e-12).all() and (out <= hi + 1e-12).all())
    check(
        "C5 SNIS degenerate cases",
        bit_exact and convex,
        f"bit-exact selects={bit_exact}, convexity on {weights.size * 2} cases={convex}",
    )


def _criterion6_setup(frames=2, channels=2, side=48, sigma=1.0):
    shape = (frames, channels, side, side)
    mask = np.zeros((frames, side, side))
    mask[:, 20:28, 20:28] = 1.0
    mu_s = patterned_mean(shape, amplitude=0.5)
    mu_t = mu_s + 4.0 * sigma * np.broadcast_to(mask[:, None], shape)
    world = GaussianWorld(
        {
            embed_prompt(SOURCE_PROMPT).condition_id: LatentVolume(mu_s),
            embed_prompt(TARGET_PROMPT).condition_id: LatentVolume(mu_t),
        },
        sigma,
    )
    return shape, EditMask(mask), world, mu_s


def test_criterion_06_end_to_end_synthetic_edit():
    start = time.perf_counter()
    sigma = 1.0
    shape, mask, world, mu_s = _criterion6_setup(sigma=sigma)
    cfg = EditConfig()  # paper defaults: T=100, tau=5, m=16, alpha=.48, beta=.85
    sched = NoiseSchedule.make(cfg.schedule, cfg.total_steps)
    denoiser = AnalyticGaussianDenoiser(world, sched)
    source = LatentVolume(mu_s + sigma * gaussian(31, 0, shape))
    outcome = run_edit(
        source, cfg, denoiser,
        mask=mask, source_prompt=SOURCE_PROMPT, target_prompt=TARGET_PROMPT, world=world,
    )
    report = outcome.report

    # Monte Carlo mean oracle (validates the frozen thresholds): 50 extra
    # independent edits stacked on the frame axis, worst-case shift checked
    mc_shape, mc_mask, mc_world, mc_mu = _criterion6_setup(frames=50, channels=1, sigma=sigma)
    mc_sched = NoiseSchedule.make(cfg.schedule, cfg.total_steps)
    mc_source = LatentVolume(mc_mu + sigma * gaussian(77, 0, mc_shape))
    mc_out = run_edit(
        mc_source, cfg, AnalyticGaussianDenoiser(mc_world, mc_sched),
        mask=mc_mask, source_prompt=SOURCE_PROMPT, target_prompt=TARGET_PROMPT, world=mc_world,
    )
    region = mc_mask.data[:, None] == 1.0
    per_run = [
        float(mc_out.edited.data[f][region[f]].mean()) for f in range(mc_shape[0])
    ]
    target_mean = float(mc_world.mean(embed_prompt(TARGET_PROMPT).condition_id).data[0][region[0]].mean())
    source_mean = float(mc_world.mean(embed_prompt(SOURCE_PROMPT).condition_id).data[0][region[0]].mean())
    mc_worst_shift = max(abs(m - target_mean) / abs(source_mean - target_mean) for m in per_run)

    elapsed = time.perf_counter() - start
    ok = (
        report.edited_mean_shift is not None
        and report.edited_mean_shift < 0.2
        and report.unedited_mse < 1e-2
        and report.unedited_rel_l2 < 1e-2
        and report.unedited_pixels > 0
        and mc_worst_shift < 0.2
        and elapsed < 60.0
    )
    check(
        "C6 end-to-end synthetic edit",
        ok,
        f"shift={report.edited_mean_shift:.4f}, unedited mse={report.unedited_mse:.2e}, "
        f"rel={report.unedited_rel_l2:.2e}, MC worst shift={mc_worst_shift:.4f}, {elapsed:.1f}s",
    )


def test_criterion_07_determinism(demo_inputs, tmp_path):
    paths = demo_inputs["paths"]
    runner = CliRunner()
    outputs = []
    reports = []
    for tag in ("one", "two"):
        out = tmp_path / f"{tag}.latf"
        rep = tmp_path / f"{tag}.txt"
        result = runner.invoke(cli_main, [
            "edit", "--in", str(paths["source"]), "--mask", str(paths["mask"]),
            "--source-prompt", SOURCE_PROMPT, "--target-prompt", TARGET_PROMPT,
            "--world", str(paths["world"]), "--out", str(out), "--report", str(rep),
            "--set", "seed=41", "--set", "transition_width=4",
        ])
        assert result.exit_code == 0, result.output
        outputs.append(out.read_bytes())
        reports.append(strip_timings(rep.read_text()))
    check(
        "C7 determinism",
        outputs[0] == outputs[1] and reports[0] == reports[1],
        f"{len(outputs[0])} output bytes identical, reports identical after dropping wall times",
    )


def test_criterion_08_paper_default_configuration():
    cfg = parse_config("")
    ok = (
        cfg == EditConfig()
        and cfg.total_steps == 100
        and cfg.tau == 5
        and cfg.transition_width == 16.0
        and cfg.alpha == 0.48
        and cfg.beta == 0.85
    )
    check(
        "C8 paper-default configuration",
        ok,
        f"T={cfg.total_steps}, tau={cfg.tau}, m={cfg.transition_width}, "
        f"alpha={cfg.alpha}, beta={cfg.beta}",
    )


def test_criterion_09_eiam_mock_round_trip(demo_inputs, tmp_path, eiam_env):
    # caption -> reason -> segment against the bundled fixtures
    prompt = describe_source(VIDEO_ID)
    pair = derive_target(prompt, INSTRUCTION)
    mask = segment_objects(VIDEO_ID, pair.objects)
    mask_ok = (
        isinstance(mask, EditMask)
        and bool(np.isin(mask.data, (0.0, 1.0)).all())
        and mask.shape == (2, 24, 24)
        and prompt == SOURCE_PROMPT
        and pair.target == TARGET_PROMPT
    )

    paths = demo_inputs["paths"]
    runner = CliRunner()
    auto_out = tmp_path / "auto.latf"
    result = runner.invoke(cli_main, [
        "edit", "--in", str(paths["source"]), "--instruction", INSTRUCTION,
        "--video-ref", VIDEO_ID, "--world", str(paths["world"]),
        "--out", str(auto_out), "--set", "transition_width=4",
    ])
    assert result.exit_code == 0, result.output

    manual_out = tmp_path / "manual.latf"
    manual_mask = tmp_path / "fixture_mask.latf"
    write_volume(manual_mask, mask)
    result = runner.invoke(cli_main, [
        "edit", "--in", str(paths["source"]), "--mask", str(manual_mask),
        "--source-prompt", prompt, "--target-prompt", pair.target,
        "--world", str(paths["world"]), "--out", str(manual_out),
        "--set", "transition_width=4",
    ])
    assert result.exit_code == 0, result.output
    identical = auto_out.read_bytes() == manual_out.read_bytes()
    check(
        "C9 EIAM mock round trip",
        mask_ok and identical,
        f"mask invariants={mask_ok}, manual bypass bit-identical={identical}",
    )


def test_criterion_10_file_format_conformance(tmp_path):
    gen = np.random.default_rng(5)
    vol = LatentVolume(gen.normal(size=(2, 1, 4, 4)).astype(np.float32).astype(np.float64))
    path = tmp_path / "vol.latf"
    write_volume(path, vol)
    round_trip = read_volume(path).data.tobytes() == vol.data.tobytes()

    good = volume_to_bytes(vol)
    header = struct.Struct("<4s6I")

    def corrupt(name, blob, expected):
        target = tmp_path / f"{name}.latf"
        target.write_bytes(blob)
        try:
            read_volume(target)
        except expected:
            return True
        except Exception:
            return False
        return False

    bad_version = bytearray(good)
    bad_version[4:8] = (7).to_bytes(4, "little")
    bad_kind = bytearray(good)
    bad_kind[8:12] = (9).to_bytes(4, "little")
    zero_dim = bytearray(good)
    zero_dim[16:20] = (0).to_bytes(4, "little")
    mask_channels = header.pack(b"LATF", 1, 1, 1, 2, 2, 2) + np.zeros(8, dtype="<f4").tobytes()
    nonfinite = header.pack(b"LATF", 1, 0, 1, 1, 2, 2) + np.array(
        [1, np.nan, 0, 0], dtype="<f4"
    ).tobytes()

    corpus = [
        corrupt("bad_magic", b"XXXX" + good[4:], FormatError),
        corrupt("bad_version", bytes(bad_version), FormatError),
        corrupt("bad_kind", bytes(bad_kind), FormatError),
        corrupt("zero_dim", bytes(zero_dim), FormatError),
        corrupt("truncated_header", good[:10], LengthError),
        corrupt("short_payload", good[:-4], LengthError),  # 31 of 32 promised values
        corrupt("long_payload", good + b"\x00\x00\x00\x00", LengthError),
        corrupt("mask_channels", mask_channels, FormatError),
        corrupt("nonfinite", nonfinite, FormatError),
    ]
    check(
        "C10 file-format conformance",
        round_trip and all(corpus) and len(corpus) >= 6,
        f"round trip bit-exact={round_trip}, {sum(corpus)}/{len(corpus)} malformed cases rejected",
    )
