"""
Acceptance gate.

Each test is one sub-check of a numbered acceptance criterion, tagged with
``@criterion(n, title)``. The terminal summary (see conftest.py) prints one
PASS/FAIL line per criterion, listing any failing sub-checks. Tolerances are
the ones stated for each criterion and are not relaxed here; sub-checks that
are known to be unattainable are left to fail.
"""

import filecmp
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from lidar_trigger.cli import run_validation
from lidar_trigger.intensity import (
    angle_independent_diffuse,
    azimuthal_expectation_quadrature,
    hemispheric_expectation_quadrature,
    monte_carlo_constants,
)
from lidar_trigger.kitti_io import (
    ObjectLabel,
    PointCloudFrame,
    format_label,
    load_point_cloud,
    parse_label_line,
    read_labels,
    read_point_cloud,
    save_point_cloud,
    write_point_cloud,
)
from lidar_trigger.materials import builtin_database, default_angle_grid, find_material, rank_materials
from lidar_trigger.optics import ComplexIndex, fresnel_components, fresnel_unpolarized
from lidar_trigger.poison import AttackObjective, PoisonConfig, compute_placement, inject_trigger, rewrite_label, run_pipeline
from lidar_trigger.synthetic import canonical_calibration, make_synthetic_dataset, random_car_label
from lidar_trigger.trigger import TriggerConfig, grid_resolution, synthesize_patch

criterion = pytest.mark.criterion

# Reference score table: (avg_specular, combined_score, rank)
REFERENCE_TABLE = {
    "TitaniumDioxide": (0.18, 0.26, 1),
    "Aluminum": (0.92, 0.21, 2),
    "Copper": (0.94, 0.20, 3),
    "Paper": (0.04, 0.17, 4),
}
TIO2_INTENSITY = angle_independent_diffuse(find_material("TitaniumDioxide"))


# -- 1. material ranking -----------------------------------------------------

@pytest.fixture(scope="module")
def ranking():
    start = time.perf_counter()
    scores = rank_materials(builtin_database(), 0.2, default_angle_grid(81))
    return {s.material_name: s for s in scores}, time.perf_counter() - start


@criterion(1, "Material ranking reproduction")
def test_ranking_rank_order(ranking):
    scores, _ = ranking
    got = {name: s.rank for name, s in scores.items()}
    assert got == {name: row[2] for name, row in REFERENCE_TABLE.items()}


@criterion(1, "Material ranking reproduction")
def test_ranking_combined_scores(ranking):
    scores, _ = ranking
    for name, (_, combined, _) in REFERENCE_TABLE.items():
        assert abs(scores[name].combined_score - combined) <= 0.05, name


@criterion(1, "Material ranking reproduction")
def test_ranking_avg_specular(ranking):
    scores, _ = ranking
    off = {
        name: round(scores[name].avg_specular, 4)
        for name, (spec, _, _) in REFERENCE_TABLE.items()
        if abs(scores[name].avg_specular - spec) > 0.03
    }
    assert not off, f"avg_specular outside +-0.03: {off}"


@criterion(1, "Material ranking reproduction")
def test_ranking_runtime(ranking):
    _, elapsed = ranking
    assert elapsed < 1.0


# -- 2. expectation constants ------------------------------------------------

@criterion(2, "Expectation constants")
def test_constants_quadrature():
    assert abs(azimuthal_expectation_quadrature(100_000) - 1 / math.pi) <= 1e-6
    assert abs(hemispheric_expectation_quadrature(100_000) - 4 / 3) <= 1e-6


@criterion(2, "Expectation constants")
def test_constants_monte_carlo_and_runtime():
    start = time.perf_counter()
    mc = monte_carlo_constants(1_000_000, seed=0)
    azimuthal_expectation_quadrature(100_000)
    hemispheric_expectation_quadrature(100_000)
    elapsed = time.perf_counter() - start
    assert abs(mc["azimuthal"][0] - 1 / math.pi) <= 3 * mc["azimuthal"][1]
    assert abs(mc["hemispheric"][0] - 4 / 3) <= 3 * mc["hemispheric"][1]
    assert elapsed < 5.0


# -- 3. approximation equivalence ---------------------------------------------

@pytest.fixture(scope="module")
def validation():
    start = time.perf_counter()
    report = run_validation(1_000_000, seed=0)
    return report, time.perf_counter() - start


@criterion(3, "Approximation equivalence")
def test_approximation_within_three_se(validation):
    report, _ = validation
    for m in builtin_database():
        rep = report["materials"][m.name]
        dev = abs(rep["sampled_mean_diffuse"] - rep["closed_form_diffuse"])
        assert dev <= 3 * rep["std_error"], m.name


@criterion(3, "Approximation equivalence")
def test_approximation_exact_for_smooth_surface(validation):
    report, _ = validation
    rep = report["materials"]["LambertianReference"]
    assert abs(rep["sampled_mean_diffuse"] - rep["closed_form_diffuse"]) <= 1e-12
    assert report["passed"]


@criterion(3, "Approximation equivalence")
def test_approximation_runtime(validation):
    _, elapsed = validation
    assert elapsed < 10.0


# -- 4. Fresnel closed forms ---------------------------------------------------

@criterion(4, "Fresnel closed forms")
def test_fresnel_dielectric_normal_incidence():
    for n in (1.2, 1.33, 1.5, 2.0, 2.51, 3.5):
        assert abs(fresnel_unpolarized(ComplexIndex(n), 0.0) - ((n - 1) / (n + 1)) ** 2) <= 1e-12


@criterion(4, "Fresnel closed forms")
def test_fresnel_aluminum_normal_incidence():
    n = complex(1.43, 8.33)
    oracle = abs((1 - n) / (1 + n)) ** 2
    value = fresnel_unpolarized(ComplexIndex(1.43, 8.33), 0.0)
    assert abs(value - 0.924) <= 1e-3
    assert abs(value - oracle) <= 1e-12


@criterion(4, "Fresnel closed forms")
def test_fresnel_brewster_dip():
    for n in (1.33, 1.5, 2.0, 2.51, 3.5):
        _, r_p = fresnel_components(ComplexIndex(n), math.atan(n))
        assert r_p <= 1e-6


# -- 5. distance scaling -------------------------------------------------------

@criterion(5, "Distance scaling")
def test_scaling_examples():
    cfg = TriggerConfig(width=0.2, height=0.3, scale=500.0, min_resolution=4)
    assert grid_resolution(cfg, 10.0) == (10, 15)
    assert grid_resolution(cfg, 5.0) == (20, 30)
    assert grid_resolution(cfg, 1e6) == (4, 4)


@criterion(5, "Distance scaling")
def test_scaling_monotone_over_random_depths():
    cfg = TriggerConfig()
    depths = np.sort(np.random.default_rng(2024).uniform(0.1, 200.0, 1000))
    res = np.array([grid_resolution(cfg, d) for d in depths])
    assert np.all(np.diff(res, axis=0) <= 0)


# -- 6. round-trip fidelity ----------------------------------------------------

@pytest.fixture(scope="module")
def point_cloud_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    rng = np.random.default_rng(6)
    sizes = [0, 1, 2, 3, 17, 100, 1000, 4096] + list(rng.integers(5, 20_000, 16))
    paths = []
    for i, n in enumerate(sizes):
        pts = rng.normal(0.0, 30.0, (int(n), 4)).astype("<f4")
        pts[:, 3] = rng.random(int(n))
        if i % 5 == 4 and n:
            pts[0] = [-0.0, 1e-38, 3.4e38, 1.0]  # signed zero, subnormal-adjacent, near float32 max
        path = root / f"{i:06d}.bin"
        path.write_bytes(pts.tobytes())
        paths.append(path)
    return paths


@criterion(6, "Round-trip fidelity")
def test_point_cloud_round_trip(point_cloud_corpus, tmp_path):
    sizes = {p.stat().st_size for p in point_cloud_corpus}
    assert len(point_cloud_corpus) >= 20 and 0 in sizes and 16 in sizes
    for path in point_cloud_corpus:
        data = path.read_bytes()
        assert write_point_cloud(read_point_cloud(data)) == data
        out = tmp_path / path.name
        save_point_cloud(out, load_point_cloud(path))
        assert filecmp.cmp(path, out, shallow=False)


@criterion(6, "Round-trip fidelity")
def test_label_round_trip_all_fields():
    rng = np.random.default_rng(7)
    for _ in range(200):
        lb = random_car_label(rng, kind=str(rng.choice(["Car", "Van", "Pedestrian", "Cyclist"])))
        lb = replace(lb, truncated=round(float(rng.random()), 2))
        line = format_label(lb)
        assert len(line.split()) == 15
        assert parse_label_line(line) == lb
        assert format_label(parse_label_line(line)) == line


# -- 7. pipeline determinism and counting -----------------------------------

@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("pipeline")
    make_synthetic_dataset(base / "data", n_frames=20, seed=0)
    cfg = PoisonConfig(poison_rate=0.15, seed=0)
    first = run_pipeline(base / "data", base / "run1", cfg)
    second = run_pipeline(base / "data", base / "run2", cfg)
    return base, first, second


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@criterion(7, "Pipeline determinism and counting")
def test_pipeline_poisons_three_frames(pipeline_runs):
    _, first, _ = pipeline_runs
    assert first.eligible_count == 20
    assert len(first.poisoned_frames) == 3


@criterion(7, "Pipeline determinism and counting")
def test_pipeline_bit_identical_reruns(pipeline_runs):
    base, first, second = pipeline_runs
    assert first.to_json() == second.to_json()
    assert _tree(base / "run1") == _tree(base / "run2")


@criterion(7, "Pipeline determinism and counting")
def test_pipeline_clean_frames_untouched(pipeline_runs):
    base, first, _ = pipeline_runs
    poisoned = {e["frame_id"] for e in first.poisoned_frames}
    for src in sorted((base / "data" / "velodyne").glob("*.bin")):
        if src.stem in poisoned:
            continue
        for sub, ext in (("velodyne", ".bin"), ("label_2", ".txt"), ("calib", ".txt")):
            a = base / "data" / sub / f"{src.stem}{ext}"
            assert filecmp.cmp(a, base / "run1" / sub / a.name, shallow=False)


@criterion(7, "Pipeline determinism and counting")
def test_pipeline_added_points_match_manifest(pipeline_runs):
    base, first, _ = pipeline_runs
    for e in first.poisoned_frames:
        before = load_point_cloud(base / "data" / "velodyne" / f"{e['frame_id']}.bin")
        after = load_point_cloud(base / "run1" / "velodyne" / f"{e['frame_id']}.bin")
        assert len(after) - len(before) == e["n_y"] * e["n_z"]


@criterion(7, "Pipeline determinism and counting")
def test_pipeline_injected_intensity_in_memory():
    # intensities as produced by injection, before the float32 .bin encoding
    calib = canonical_calibration()
    label = ObjectLabel("Car", 0.0, 0, 0.0, (0, 0, 1, 1), (1.5, 1.8, 4.0), (0.0, 1.65, 12.0), -1.57)
    placement = compute_placement(label, calib)
    patch = synthesize_patch(TriggerConfig(), placement.depth)
    assert np.all(np.abs(patch.points[:, 3] - TIO2_INTENSITY) <= 1e-9)
    assert abs(TIO2_INTENSITY - 0.2608) <= 1e-4
    out = inject_trigger(PointCloudFrame("x", np.zeros((0, 4), np.float32)), patch, placement)
    assert len(out) == len(patch)


@criterion(7, "Pipeline determinism and counting")
def test_pipeline_injected_intensity_on_disk(pipeline_runs):
    base, first, _ = pipeline_runs
    for e in first.poisoned_frames:
        pts = load_point_cloud(base / "run1" / "velodyne" / f"{e['frame_id']}.bin").points
        added = pts[-e["injected_point_count"]:, 3].astype(np.float64)
        worst = float(np.max(np.abs(added - TIO2_INTENSITY)))
        assert worst <= 1e-9, f"float32 storage error {worst:.3e}"


# -- 8. label rewrite semantics ------------------------------------------------

@pytest.fixture(scope="module")
def random_labels():
    rng = np.random.default_rng(8)
    return [random_car_label(rng) for _ in range(100)], rng


@criterion(8, "Label rewrite semantics")
def test_rewrite_disappearance(random_labels):
    labels, _ = random_labels
    for i in range(len(labels)):
        out = rewrite_label(labels, i, AttackObjective("disappearance"))
        assert len(out) == len(labels) - 1
        assert out == labels[:i] + labels[i + 1:]


@criterion(8, "Label rewrite semantics")
def test_rewrite_resizing(random_labels):
    labels, rng = random_labels
    for i, factor in enumerate(rng.uniform(0.1, 3.0, len(labels))):
        out = rewrite_label(labels, i, AttackObjective("resizing", float(factor)))
        old, new = labels[i], out[i]
        assert new.dimensions == tuple(d * float(factor) for d in old.dimensions)
        assert new.location == old.location
        assert new.rotation_y == old.rotation_y
        assert new.bbox == old.bbox
        assert [x for j, x in enumerate(out) if j != i] == [x for j, x in enumerate(labels) if j != i]


@criterion(8, "Label rewrite semantics")
def test_rewrite_on_disk_fields(tmp_path):
    root = tmp_path / "data"
    make_synthetic_dataset(root, n_frames=20, seed=8)
    manifest = run_pipeline(root, tmp_path / "out", PoisonConfig(poison_rate=1.0))
    for e in manifest.poisoned_frames:
        before = read_labels((root / "label_2" / f"{e['frame_id']}.txt").read_text())
        after = read_labels((tmp_path / "out" / "label_2" / f"{e['frame_id']}.txt").read_text())
        t = e["target_index"]
        assert after[t].location == before[t].location
        assert after[t].bbox == before[t].bbox
        assert after[t].rotation_y == before[t].rotation_y
        assert list(after[t].dimensions) == e["rewritten_dims"]
