import json

import numpy as np
import pytest

from mahashot import (
    AblationSpec,
    EmbeddingDataset,
    FixedSamplerConfig,
    RefineConfig,
    SyntheticSpec,
    emit_report,
    evaluate,
    generate_synthetic,
    render_report,
    run_ablation,
)
from mahashot.harness import EpisodeFailure, EpisodeOutcome, _aggregate


@pytest.fixture(scope="module")
def small_ds():
    return generate_synthetic(
        SyntheticSpec(n_classes=8, dim=4, mean_scale=2.0, per_class=30, seed=77)
    )


FIXED = FixedSamplerConfig(way=3, shot=2, query_per_class=5, seed=0)
REFINE = RefineConfig(min_steps=2, max_steps=4)


class TestAggregation:
    def test_hand_computed_ci(self):
        outcomes = [
            EpisodeOutcome(i, acc, 1, False, ())
            for i, acc in enumerate([1.0, 0.0, 1.0, 1.0])
        ]
        report = _aggregate(outcomes, "m", {}, 10)
        assert report.mean_accuracy == pytest.approx(0.75)
        # sample standard deviation is 0.5, so 1.96 * 0.5 / sqrt(4) = 0.49
        assert report.ci95 == pytest.approx(0.49)

    def test_single_episode_has_zero_ci(self):
        report = _aggregate([EpisodeOutcome(0, 0.5, 1, True, ())], "m", {}, 10)
        assert report.ci95 == 0.0

    def test_recall_bins_and_histogram(self):
        outcomes = [
            EpisodeOutcome(0, 1.0, 2, True, ((1, 1.0), (3, 0.5))),
            EpisodeOutcome(1, 0.5, 4, False, ((1, 0.0), (12, 1.0))),
        ]
        report = _aggregate(outcomes, "m", {}, 10)
        assert report.recall_bins["1"] == (0.5, 2)
        assert report.recall_bins["3"] == (0.5, 1)
        assert report.recall_bins[">10"] == (1.0, 1)
        assert report.iteration_histogram == {2: 1, 4: 1}
        assert report.converged_early_rate == pytest.approx(0.5)


class TestEvaluate:
    def test_perfectly_separable_dataset(self):
        # classes are single distinct repeated points: nothing to confuse
        classes = {
            f"p{i}": np.tile(np.eye(4)[i] * 10, (20, 1)) for i in range(4)
        }
        ds = EmbeddingDataset(classes=classes)
        cfg = FixedSamplerConfig(way=3, shot=2, query_per_class=4, seed=1)
        report = evaluate(ds, cfg, REFINE, n_episodes=10)
        assert report.mean_accuracy == 1.0
        assert report.ci95 == 0.0

    def test_histogram_accounts_every_episode(self, small_ds):
        report = evaluate(small_ds, FIXED, REFINE, n_episodes=25)
        assert sum(report.iteration_histogram.values()) == 25
        assert report.episodes == 25
        assert len(report.per_episode_accuracy) == 25
        assert 0.0 <= report.converged_early_rate <= 1.0

    def test_recall_bins_reconcile_with_predictions(self, small_ds):
        # fixed sampler: every (episode, class) contributes exactly
        # query_per_class predictions
        report = evaluate(small_ds, FIXED, REFINE, n_episodes=12)
        pair_count = sum(c for _, c in report.recall_bins.values())
        assert pair_count == 12 * FIXED.way
        assert pair_count * FIXED.query_per_class == 12 * FIXED.way * FIXED.query_per_class
        for mean_recall, _ in report.recall_bins.values():
            assert 0.0 <= mean_recall <= 1.0

    def test_seed_override_changes_episodes(self, small_ds):
        r0 = evaluate(small_ds, FIXED, REFINE, n_episodes=6, seed=100)
        r1 = evaluate(small_ds, FIXED, REFINE, n_episodes=6, seed=101)
        r0_again = evaluate(small_ds, FIXED, REFINE, n_episodes=6, seed=100)
        assert r0.per_episode_accuracy == r0_again.per_episode_accuracy
        assert r0.per_episode_accuracy != r1.per_episode_accuracy

    def test_parallel_equals_serial(self, small_ds):
        serial = evaluate(small_ds, FIXED, REFINE, n_episodes=16, parallelism=1)
        parallel = evaluate(small_ds, FIXED, REFINE, n_episodes=16, parallelism=2)
        assert render_report(serial, "json") == render_report(parallel, "json")

    def test_failing_episode_reports_index(self):
        ds = EmbeddingDataset(classes={"a": np.zeros((3, 2)), "b": np.ones((3, 2))})
        cfg = FixedSamplerConfig(way=2, shot=2, query_per_class=10, seed=0)
        with pytest.raises(EpisodeFailure) as info:
            evaluate(ds, cfg, REFINE, n_episodes=3)
        assert info.value.index == 0

    def test_rejects_zero_episodes(self, small_ds):
        with pytest.raises(ValueError):
            evaluate(small_ds, FIXED, REFINE, n_episodes=0)


class TestAblation:
    def test_single_cell_equals_direct_evaluate(self, small_ds):
        spec = AblationSpec(
            min_steps=(2,), max_steps=(4,), rules=("mahalanobis-softmax",),
            query_per_class=(5,), episodes=8, repeats=1, seed=9,
        )
        grid = run_ablation(small_ds, FIXED, spec)
        assert len(grid.cells) == 1
        direct = evaluate(small_ds, FIXED, REFINE, n_episodes=8, seed=9)
        assert grid.cells[0].report.per_episode_accuracy == direct.per_episode_accuracy

    def test_cells_share_episode_seeds(self, small_ds):
        spec = AblationSpec(
            min_steps=(0, 2), max_steps=(1, 4), rules=("mahalanobis-softmax",),
            query_per_class=(5,), episodes=6, repeats=1, seed=3,
        )
        grid = run_ablation(small_ds, FIXED, spec)
        assert len(grid.cells) == 4
        # the baseline cell must equal a direct baseline run on the same seed
        base = next(c for c in grid.cells if c.min_steps == 0 and c.max_steps == 1)
        direct = evaluate(
            small_ds, FIXED, RefineConfig(min_steps=0, max_steps=1), n_episodes=6, seed=3
        )
        assert base.report.per_episode_accuracy == direct.per_episode_accuracy

    def test_min_above_max_cell_clamps(self, small_ds):
        spec = AblationSpec(
            min_steps=(4,), max_steps=(1,), rules=("mahalanobis-softmax",),
            query_per_class=(5,), episodes=4, repeats=1, seed=0,
        )
        grid = run_ablation(small_ds, FIXED, spec)
        cell = grid.cells[0]
        assert cell.min_steps == 4 and cell.max_steps == 1  # nominal axes echoed
        assert cell.report.iteration_histogram == {1: 4}  # effectively one step

    def test_repeats_pool_episodes(self, small_ds):
        spec = AblationSpec(
            min_steps=(2,), max_steps=(4,), rules=("mahalanobis-softmax",),
            query_per_class=(5,), episodes=5, repeats=3, seed=0,
        )
        grid = run_ablation(small_ds, FIXED, spec)
        assert grid.cells[0].report.episodes == 15


class TestReportEmission:
    def test_json_round_trip(self, small_ds, tmp_path):
        report = evaluate(small_ds, FIXED, REFINE, n_episodes=9)
        path = tmp_path / "report.json"
        emit_report(report, "json", path)
        parsed = json.loads(path.read_text())
        assert parsed["episodes"] == 9
        assert parsed["mean_accuracy"] == pytest.approx(report.mean_accuracy, abs=1e-12)
        assert parsed["ci95"] == pytest.approx(report.ci95, abs=1e-12)
        got = np.array(parsed["per_episode_accuracy"])
        np.testing.assert_allclose(got, report.per_episode_accuracy, atol=1e-12)
        assert parsed["method"] == report.method
        for key, (mean, count) in report.recall_bins.items():
            assert parsed["recall_bins"][key]["mean"] == pytest.approx(mean, abs=1e-12)
            assert parsed["recall_bins"][key]["count"] == count

    def test_emission_is_byte_stable(self, small_ds, tmp_path):
        report = evaluate(small_ds, FIXED, REFINE, n_episodes=5)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        emit_report(report, "json", p1)
        emit_report(report, "json", p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_grid_csv_row_count_is_axis_product(self, small_ds, tmp_path):
        spec = AblationSpec(
            min_steps=(0, 2), max_steps=(1, 4), rules=("mahalanobis-softmax", "gmm"),
            query_per_class=(5,), episodes=3, repeats=1, seed=0,
        )
        grid = run_ablation(small_ds, FIXED, spec)
        path = tmp_path / "grid.csv"
        emit_report(grid, "csv", path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "min_steps,max_steps,rule,query_per_class,mean_acc,ci95,episodes"
        assert len(lines) - 1 == 2 * 2 * 2 * 1

    def test_empty_axes_grid_gives_header_only_csv(self, small_ds, tmp_path):
        spec = AblationSpec(
            min_steps=(), max_steps=(4,), rules=("mahalanobis-softmax",),
            query_per_class=(5,), episodes=3, repeats=1, seed=0,
        )
        grid = run_ablation(small_ds, FIXED, spec)
        path = tmp_path / "empty.csv"
        emit_report(grid, "csv", path)
        assert path.read_text().strip().splitlines() == [
            "min_steps,max_steps,rule,query_per_class,mean_acc,ci95,episodes"
        ]

    def test_single_report_csv_is_one_row(self, small_ds, tmp_path):
        report = evaluate(small_ds, FIXED, REFINE, n_episodes=4)
        path = tmp_path / "single.csv"
        emit_report(report, "csv", path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 2
        assert lines[1].split(",")[:4] == ["2", "4", "mahalanobis-softmax", "5"]

    def test_unknown_format_rejected(self, small_ds, tmp_path):
        report = evaluate(small_ds, FIXED, REFINE, n_episodes=2)
        with pytest.raises(ValueError):
            emit_report(report, "yaml", tmp_path / "x")

    def test_grid_json_round_trip(self, small_ds, tmp_path):
        spec = AblationSpec(
            min_steps=(2,), max_steps=(4,), rules=("mahalanobis-softmax",),
            query_per_class=(5,), episodes=3, repeats=1, seed=0,
        )
        grid = run_ablation(small_ds, FIXED, spec)
        path = tmp_path / "grid.json"
        emit_report(grid, "json", path)
        parsed = json.loads(path.read_text())
        assert parsed["axes"]["min_steps"] == [2]
        assert len(parsed["cells"]) == 1
        assert parsed["cells"][0]["report"]["episodes"] == 3
