import math

import numpy as np
import pytest

from tspmcts.evalkit import (
    Budget,
    MissingReferenceError,
    ResultTable,
    improvement,
    optimality_gap,
    reference_length_for,
    run_benchmark,
)
from tspmcts.heatmaps import ZeroSource
from tspmcts.instances import generate_uniform
from tspmcts.mcts import MctsParams
from tspmcts.tours import exact_solve

from conftest import dm_and_ranks


class TestOptimalityGap:
    def test_identity_is_zero(self):
        assert optimality_gap(16.55, 16.55) == 0.0

    def test_rounded_benchmark_pairs(self):
        assert optimality_gap(16.63, 16.55) == pytest.approx(0.4834, abs=5e-4)
        assert optimality_gap(23.39, 23.12) == pytest.approx(1.1678, abs=5e-4)

    def test_reference_must_be_positive(self):
        with pytest.raises(ValueError):
            optimality_gap(10.0, 0.0)
        with pytest.raises(ValueError):
            optimality_gap(10.0, -1.0)

    def test_scale_invariance(self):
        base = optimality_gap(12.34, 11.9)
        for c in (0.001, 3.7, 1e4):
            assert optimality_gap(c * 12.34, c * 11.9) == pytest.approx(base, rel=1e-9)


class TestImprovement:
    def test_tuning_gains(self):
        assert improvement(1.12, 0.22) == pytest.approx(0.90)
        assert improvement(5.49, 1.06) == pytest.approx(4.43)

    def test_no_change(self):
        assert improvement(0.7, 0.7) == 0.0


class TestReferenceLength:
    def test_oracle_fallback(self):
        inst = generate_uniform(9, 17)
        dm, _ = dm_and_ranks(inst)
        assert reference_length_for(inst, dm, None) == exact_solve(dm).length

    def test_supplied_tour_wins(self):
        inst = generate_uniform(9, 17)
        dm, _ = dm_and_ranks(inst)
        order = np.arange(9)
        from tspmcts.tours import tour_length

        assert reference_length_for(inst, dm, order) == tour_length(order, dm)

    def test_missing_reference_for_large_instance(self):
        inst = generate_uniform(19, 0)
        dm, _ = dm_and_ranks(inst)
        with pytest.raises(MissingReferenceError):
            reference_length_for(inst, dm, None)


@pytest.fixture(scope="module")
def small_set():
    return [generate_uniform(10, 900 + i) for i in range(4)]


class TestRunBenchmark:
    def test_rows_in_instance_order(self, small_set):
        table = run_benchmark(
            small_set, None, ZeroSource(), MctsParams(use_heatmap=False),
            Budget("iters", 300), seed=1,
        )
        assert [r.instance_id for r in table.rows] == [i.id for i in small_set]
        assert all(math.isfinite(r.gap_percent) and r.gap_percent >= -1e-9 for r in table.rows)

    def test_deterministic_and_scheduling_independent(self, small_set):
        def fingerprint(table):
            # wall_time is the only legitimately non-deterministic field
            return [
                (r.instance_id, r.solver_length, r.reference_length, r.gap_percent, r.seed)
                for r in table.rows
            ]

        kwargs = dict(
            heatmap_source=ZeroSource(), params=MctsParams(use_heatmap=False),
            budget=Budget("iters", 300), seed=5,
        )
        serial = run_benchmark(small_set, None, **kwargs, jobs=1)
        again = run_benchmark(small_set, None, **kwargs, jobs=1)
        parallel = run_benchmark(small_set, None, **kwargs, jobs=3)
        assert fingerprint(serial) == fingerprint(again)
        assert fingerprint(serial) == fingerprint(parallel)

    def test_mean_matches_rows(self, small_set):
        table = run_benchmark(
            small_set, None, ZeroSource(), MctsParams(use_heatmap=False),
            Budget("iters", 200), seed=2,
        )
        assert table.mean_gap == pytest.approx(
            sum(r.gap_percent for r in table.rows) / len(table.rows), rel=1e-12
        )
        assert table.min_gap == min(r.gap_percent for r in table.rows)
        assert table.max_gap == max(r.gap_percent for r in table.rows)

    def test_empty_table(self):
        table = run_benchmark([], None, ZeroSource(), MctsParams(), Budget("iters", 10))
        assert table.rows == ()
        assert math.isnan(table.mean_gap)

    def test_reference_alignment_checked(self, small_set):
        with pytest.raises(ValueError):
            run_benchmark(small_set, [None], ZeroSource(), MctsParams(), Budget("iters", 10))

    def test_csv_schema(self, small_set, tmp_path):
        table = run_benchmark(
            small_set[:2], None, ZeroSource(), MctsParams(use_heatmap=False),
            Budget("iters", 100), heatmap_id="zero",
        )
        path = tmp_path / "out.csv"
        table.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "instance,config,heatmap,length,ref_length,gap_pct,time_s,seed"
        assert len(lines) == 3


def test_budget_validation():
    with pytest.raises(ValueError):
        Budget("steps", 5)
    with pytest.raises(ValueError):
        Budget("iters", 0)
