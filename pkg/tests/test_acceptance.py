"""Acceptance suite: one test per criterion, each printing a PASS line with
the measured value so the report reads as a checklist.

Run with: pytest tests/test_acceptance.py -v -s
"""

import os
import time

import numpy as np
import pytest

from endlessloop import crf, flowfield, repeat1d
from endlessloop.autodirect import suggest_directions
from endlessloop.descriptors import compute_descriptors
from endlessloop.pipeline import ProjectConfig, run_pipeline
from endlessloop.raster import RasterImage, VectorField, sample_band, save_image, save_mask
from tests.conftest import add_salt_pepper, make_lattice, make_stripes, rect_mask
from tests.oracle_paths import min_cost_exhaustive
from tests.test_repeat1d import random_matrix


def report(criterion: str, detail: str):
    print(f"{criterion} PASS — {detail}")


def detect_period(img: RasterImage, y: float, length: float, e: int = 8):
    s = sample_band(img, (4.0, y), (1.0, 0.0), length, band_width=17)
    *_, seeds, _ = repeat1d.detect_repetition(s, e)
    return float(np.median(seeds.offsets))


@pytest.fixture(scope="module")
def loop_run(tmp_path_factory):
    """One full 80-frame single-threaded pipeline run at 300-px working scale."""
    tmp = tmp_path_factory.mktemp("acceptance")
    img = make_stripes(width=360, height=220, period=20)
    mask = rect_mask(360, 220, 30, 10, 330, 210)  # bbox long side 300
    ip, mp = str(tmp / "img.png"), str(tmp / "mask.png")
    save_image(ip, img)
    save_mask(mp, mask)
    config = ProjectConfig(
        image_path=ip, mask_path=mp, direction_deg=0.0, frame_count=80, workers=1
    )
    t0 = time.perf_counter()
    seq, diag = run_pipeline(config)
    elapsed = time.perf_counter() - t0
    return dict(
        img=img, mask=mask, config=config, seq=seq, diag=diag, elapsed=elapsed, tmp=tmp
    )


class TestA1PeriodRecovery:
    def test_a1(self):
        details = []
        for period in (12, 20, 33):
            img = make_stripes(width=360, height=120, period=period)
            t0 = time.perf_counter()
            med = detect_period(img, y=60, length=300)
            dt = time.perf_counter() - t0
            assert abs(med - period) <= 1, (period, med)
            assert dt < 1.0, (period, dt)
            details.append(f"P={period}: median={med:.1f} in {dt*1000:.0f} ms")
        report("A1", "; ".join(details))


class TestA2DpOracle:
    def test_a2(self):
        rng = np.random.default_rng(2024)
        # warm the jitted enumerator before the timed batch
        warm = random_matrix(rng, 8, 2)
        min_cost_exhaustive(warm.values, warm.feasible(), 2)
        t0 = time.perf_counter()
        for k in range(100):
            e = int(rng.integers(2, 4))
            n = int(rng.integers(2 * e + 2, 21))
            m = random_matrix(rng, n, e, quantize=bool(rng.integers(0, 2)))
            got = repeat1d.min_cost_path(m).total_cost
            want = min_cost_exhaustive(m.values, m.feasible(), e)
            assert got == pytest.approx(want, abs=1e-9), (k, n, e)
        dt = time.perf_counter() - t0
        assert dt < 30.0
        report("A2", f"100 matrices (n<=20, e in {{2,3}}) exact in {dt:.1f} s")


class TestA3CrfAccuracy:
    def test_a3(self):
        img = add_salt_pepper(make_stripes(width=360, height=160, period=20), 0.1, seed=7)
        mask = rect_mask(360, 160, 20, 16, 340, 144)
        med = detect_period(img, y=80, length=320)
        assert abs(med - 20) <= 1
        seeds = repeat1d.OffsetSeedSet(
            offsets=np.full(int(round(med)), int(round(med)), dtype=np.int64),
            direction=(1.0, 0.0),
        )
        labels = crf.build_labels(seeds, (1, 0))
        desc = compute_descriptors(img)
        guess = crf.init_guess_field(mask, (4, 80), (1, 0), np.full(330, med))
        unary = crf.compute_unary(desc, labels, guess, mask)
        out = crf.meanfield_solve(unary, labels, mask, iterations=10)
        interior = np.zeros_like(mask.data)
        interior[36:-36, 40:-40] = True
        vecs = labels.vectors[out.indices[interior]]
        err = np.linalg.norm(vecs - np.array([20.0, 0.0]), axis=1)
        ang = np.degrees(np.abs(np.arctan2(vecs[:, 1], vecs[:, 0])))
        acc = ((err <= 1.0) & (ang <= 5.0)).mean()
        assert acc >= 0.95
        report("A3", f"label accuracy {acc*100:.2f}% (>= 95%) after 10 iterations")


class TestA4AblationEquivalence:
    def test_a4(self, tmp_path):
        img = make_stripes(width=240, height=140, period=20)
        mask = rect_mask(240, 140, 20, 14, 220, 126)
        ip, mp = str(tmp_path / "i.png"), str(tmp_path / "m.png")
        save_image(ip, img)
        save_mask(mp, mask)
        base = dict(image_path=ip, mask_path=mp, direction_deg=0.0, frame_count=6)
        seq_u, _ = run_pipeline(ProjectConfig(**base, solver_mode="unary-only"))
        seq_w0, _ = run_pipeline(ProjectConfig(**base, solver_mode="crf", pairwise_weight=0.0))
        for fa, fb in zip(seq_u.frames, seq_w0.frames):
            assert np.array_equal(fa, fb)
        report("A4", "unary-only frames bit-identical to crf with weight 0")


class TestA5RbfExactness:
    def test_a5(self):
        rng = np.random.default_rng(11)
        pos = rng.random((24, 2)) * np.array([90, 70])
        vec = rng.standard_normal((24, 2)) * 9
        flow = flowfield.SparseFlow(positions=pos, vectors=vec, kinds=("motion",) * 24)
        field, model = flowfield.rbf_densify(flow, 96, 72)
        anchor_err = np.abs(model.evaluate(pos[:, 0], pos[:, 1]) - vec).max()
        assert anchor_err <= 1e-6

        A = np.array([[0.04, -0.02], [0.01, 0.03]])
        b = np.array([5.0, -2.0])
        vec_aff = pos @ A.T + b
        flow_aff = flowfield.SparseFlow(positions=pos, vectors=vec_aff, kinds=("motion",) * 24)
        field_aff, _ = flowfield.rbf_densify(flow_aff, 96, 72)
        xs, ys = np.meshgrid(np.arange(96.0), np.arange(72.0))
        expect = np.stack([xs, ys], axis=-1) @ A.T + b
        affine_err = np.abs(field_aff.data - expect).max()
        assert affine_err <= 1e-6
        report("A5", f"anchor err {anchor_err:.2e}, affine err {affine_err:.2e} (<= 1e-6)")


class TestA6InverseComposition:
    def test_a6(self):
        xs, ys = np.meshgrid(np.arange(8, 120, 10, dtype=np.float64),
                             np.arange(8, 90, 10, dtype=np.float64))
        pos = np.stack([xs.ravel(), ys.ravel()], axis=1)
        mag = 16.0 + 2.2 * np.sin(pos[:, 1] / 25.0)  # < 20% magnitude spread
        ang = np.deg2rad(10.0 * np.sin(pos[:, 0] / 35.0))  # < 15 deg spread
        vec = np.stack([mag * np.cos(ang), mag * np.sin(ang)], axis=1)
        flow = flowfield.SparseFlow(positions=pos, vectors=vec, kinds=("motion",) * len(pos))
        f1, f2, m1, m2 = flowfield.merge_cells([flow], 128, 96)
        comp = m2.evaluate(pos[:, 0] + vec[:, 0], pos[:, 1] + vec[:, 1])
        resid = np.linalg.norm(comp + vec, axis=1)
        frac = (resid <= 0.5).mean()
        assert frac >= 0.9
        report("A6", f"composition residual <= 0.5 px at {frac*100:.1f}% of anchors")


class TestA7LoopClosure:
    def test_a7(self, loop_run):
        seq = loop_run["seq"]
        img = loop_run["img"]
        mask = loop_run["mask"]
        assert len(seq) == 80
        quantized = np.round(img.data * 255) / 255
        outside = ~mask.data
        for f in seq.frames:
            assert np.array_equal(f[outside], quantized[outside])
        consec = [
            np.abs(seq.frames[k + 1] - seq.frames[k]).mean() for k in range(79)
        ]
        # frame K-1 -> frame 0 (frame K of the next cycle) is the wrap
        # transition; it must look like any other step
        wrap_diff = np.abs(seq.frames[0] - seq.frames[-1]).mean()
        assert wrap_diff <= 2.0 * np.mean(consec)
        report(
            "A7",
            f"wrap diff {wrap_diff:.5f} <= 2x mean consecutive {np.mean(consec):.5f}; "
            "unmasked pixels bit-identical across 80 frames",
        )


class TestA8MotionDirection:
    def test_a8(self, loop_run):
        # with K=80 and P=20 the drift is 0.25 px/frame; correlate frames ten
        # steps apart (2.5 px expected) so integer-shift search resolves it
        seq = loop_run["seq"]
        row = 110
        sel = slice(60, 300)
        gap = 10
        shifts = []
        for k in range(0, 60, gap):
            a = seq.frames[k][row, sel, 0]
            b = seq.frames[k + gap][row, sel, 0]
            best, best_shift = None, 0
            for shift in range(-8, 9):
                d = np.abs(np.roll(a, shift) - b).mean()
                if best is None or d < best:
                    best, best_shift = d, shift
            shifts.append(best_shift)
        drift = float(np.mean(shifts)) / gap
        assert drift > 0.1  # phase advances along +x, the requested direction
        report("A8", f"phase drift {drift:+.2f} px/frame along +x (expected +0.25)")


class TestA9NoiseRobustness:
    def test_a9(self):
        rng = np.random.default_rng(5)
        img = make_stripes(width=360, height=120, period=20)
        noisy = np.clip(img.data + rng.normal(0, 10 / 255, img.data.shape), 0, 1)
        med = detect_period(RasterImage(noisy), y=60, length=300)
        assert abs(med - 20) <= 2
        detail = f"gaussian sigma=10/255: median={med:.1f} (P=20 +- 2)"

        # strong perspective warp: permitted to fail, reported either way
        h, w = img.data.shape[:2]
        shift = 0.15 * w
        ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                             indexing="ij")
        t = ys / (h - 1)
        sx = xs * (1 - 0.3 * t) + shift * t
        from endlessloop.raster import bilinear_lookup

        warped = bilinear_lookup(img.data, sx, ys)
        try:
            med_p = detect_period(RasterImage(np.clip(warped, 0, 1)), y=60, length=300)
            outcome = f"perspective case recovered {med_p:.1f}"
        except repeat1d.RepetitionError as exc:
            outcome = f"perspective case failed as permitted ({exc})"
        report("A9", f"{detail}; {outcome}")


class TestA10RuntimeEnvelope:
    def test_a10(self, loop_run):
        elapsed = loop_run["elapsed"]
        assert elapsed < 30.0
        cores = os.cpu_count() or 1
        # the parallel clause is stated for a 4-core machine; on this box the
        # parallel run must still be bit-identical, and the wall-clock
        # comparison only applies when the hardware premise holds
        workers = min(4, cores)
        config = loop_run["config"]
        par = ProjectConfig(**{**config.__dict__, "workers": workers})
        t0 = time.perf_counter()
        seq_par, _ = run_pipeline(par)
        par_elapsed = time.perf_counter() - t0
        for a, b in zip(loop_run["seq"].frames, seq_par.frames):
            assert np.array_equal(a, b)
        if cores >= 4:
            assert par_elapsed < elapsed
            report(
                "A10",
                f"single-threaded {elapsed:.1f} s < 30 s; {workers} workers "
                f"{par_elapsed:.1f} s strictly faster, frames bit-identical",
            )
        else:
            report(
                "A10",
                f"single-threaded {elapsed:.1f} s < 30 s; frames bit-identical at "
                f"{workers} workers ({par_elapsed:.1f} s); strict-speedup clause "
                f"skipped: {cores} cores, criterion presumes 4",
            )
            pytest.skip(f"parallel wall-clock clause presumes 4 cores, found {cores}")


class TestA11DirectionSuggestion:
    def test_a11(self):
        img = make_lattice(px=16, py=40)
        winners = suggest_directions(img, compute_descriptors(img))
        assert winners
        x, y, _ = winners[0]
        ang = np.degrees(np.arctan2(y, x)) % 180
        assert min(ang, 180 - ang) <= 10

        rot = RasterImage(np.rot90(img.data, k=1).copy())
        winners_rot = suggest_directions(rot, compute_descriptors(rot))
        xr, yr, _ = winners_rot[0]
        ang_r = np.degrees(np.arctan2(yr, xr)) % 180
        assert abs(ang_r - 90) <= 10
        report("A11", f"axis suggestion {ang:.1f} deg; rotated image {ang_r:.1f} deg")


class TestA12Attenuation:
    def test_a12(self):
        mask = rect_mask(120, 120, 35, 35, 85, 85)
        data = np.zeros((120, 120, 2))
        data[mask.data] = [15.0, 0.0]
        base = flowfield.sparsify(VectorField(data), mask)

        hard, _ = flowfield.rbf_densify(base, 120, 120)
        from scipy import ndimage

        edge = mask.data & ~ndimage.binary_erosion(mask.data, np.ones((3, 3), bool))
        interior_mean = np.linalg.norm(hard.data[mask.data], axis=1).mean()
        edge_mean = np.linalg.norm(hard.data[edge], axis=1).mean()
        assert edge_mean > 0.5 * interior_mean  # hard mode: motion up to the edge

        soft_flow = flowfield.add_attenuation_anchors(base, mask, spacing=12)
        soft, _ = flowfield.rbf_densify(soft_flow, 120, 120)
        ring = [k for k, kind in enumerate(soft_flow.kinds) if kind == "zero"]
        ring_pos = soft_flow.positions[ring].astype(int)
        soft_interior = np.linalg.norm(soft.data[mask.data], axis=1).mean()
        ring_mag = np.linalg.norm(soft.data[ring_pos[:, 1], ring_pos[:, 0]], axis=1)
        assert ring_mag.max() < 0.1 * soft_interior
        report(
            "A12",
            f"soft ring max {ring_mag.max():.3f} < 10% of interior {soft_interior:.2f}; "
            f"hard edge mean {edge_mean:.2f} stays at {edge_mean/interior_mean*100:.0f}% of interior",
        )
