import itertools
import math

import numpy as np
import pytest

from tspmcts.mcts import MctsParams
from tspmcts.tuner import (
    CoverageError,
    DEFAULT_PARAMS,
    PARAM_FIELDS,
    SearchSpace,
    config_key,
    grid_configs,
    read_params_file,
    shapley_for_all_configs,
    shapley_importance,
    tune,
    write_params_file,
)


class TestGridConfigs:
    def test_built_in_size(self):
        space = SearchSpace()
        assert space.size == 864
        assert len(grid_configs(space)) == 864

    def test_single_value_lists(self):
        space = SearchSpace(
            alpha=(1.0,), beta=(10.0,), max_depth=(10,),
            max_candidate_num=(1000,), param_h=(10,), use_heatmap=(True,),
        )
        configs = grid_configs(space)
        assert len(configs) == 1
        assert configs[0] == DEFAULT_PARAMS

    def test_lexicographic_order(self):
        configs = grid_configs(SearchSpace())
        assert config_key(configs[0]) == (0.0, 10.0, 10, 5, 2, True)
        # use_heatmap is the innermost field
        assert config_key(configs[1]) == (0.0, 10.0, 10, 5, 2, False)

    def test_default_is_member(self):
        keys = {config_key(c) for c in grid_configs(SearchSpace())}
        assert config_key(DEFAULT_PARAMS) in keys

    def test_empty_field_rejected(self):
        with pytest.raises(ValueError):
            SearchSpace(alpha=())


def stub_gap(params: MctsParams) -> float:
    return abs(params.alpha - 1.0) + abs(params.beta - 100.0) / 1000.0


class TestTune:
    def test_stub_argmin(self):
        report = tune(SearchSpace(), stub_gap, compute_shapley=False)
        assert report.best_config.alpha == 1.0
        assert report.best_config.beta == 100.0
        assert report.best_gap <= min(report.mean_gaps)

    def test_best_beats_default(self):
        report = tune(SearchSpace(), stub_gap, compute_shapley=False)
        assert report.default_gap is not None
        assert report.best_gap <= report.default_gap <= max(report.mean_gaps)

    def test_deterministic(self):
        a = tune(SearchSpace(), stub_gap, compute_shapley=False)
        b = tune(SearchSpace(), stub_gap, compute_shapley=False)
        assert a.mean_gaps == b.mean_gaps
        assert config_key(a.best_config) == config_key(b.best_config)

    def test_tie_breaks_to_grid_order(self):
        report = tune(SearchSpace(), lambda p: 1.0, compute_shapley=False)
        assert config_key(report.best_config) == (0.0, 10.0, 10, 5, 2, True)

    def test_subset_skips_shapley(self):
        report = tune(SearchSpace(), stub_gap, subset=10)
        assert len(report.configs) == 10
        assert report.shapley is None

    def test_csv_schema(self, tmp_path):
        space = SearchSpace(
            alpha=(0.0, 1.0), beta=(10.0,), max_depth=(10,),
            max_candidate_num=(1000,), param_h=(10,), use_heatmap=(True,),
        )
        report = tune(space, stub_gap, compute_shapley=False)
        path = tmp_path / "tuning.csv"
        report.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "config_id,alpha,beta,max_depth,mcn,param_h,use_heatmap,mean_gap"
        assert len(lines) == 3


class TestShapley:
    def test_constant_game_all_zero(self):
        space = SearchSpace()
        gaps = [2.5] * space.size
        phi = shapley_importance(space, gaps, DEFAULT_PARAMS)
        for value in phi.values():
            assert abs(value) < 1e-9

    def test_additive_single_feature_closed_form(self):
        space = SearchSpace()
        configs = grid_configs(space)
        g = {0.0: 3.0, 1.0: 1.0, 2.0: 2.0}
        gaps = [g[c.alpha] for c in configs]
        for cfg in (configs[0], configs[500], configs[-1]):
            phi = shapley_importance(space, gaps, cfg)
            expected_alpha = g[cfg.alpha] - np.mean(list(g.values()))
            assert phi["alpha"] == pytest.approx(expected_alpha, abs=1e-9)
            for name in PARAM_FIELDS:
                if name != "alpha":
                    assert abs(phi[name]) < 1e-9

    def test_two_feature_hand_computation(self):
        # Only alpha and use_heatmap vary; the rest are singletons so the
        # game reduces to two players and can be checked by hand.
        space = SearchSpace(
            alpha=(0.0, 1.0), beta=(10.0,), max_depth=(10,),
            max_candidate_num=(1000,), param_h=(10,), use_heatmap=(True, False),
        )
        configs = grid_configs(space)
        table = {(0.0, True): 4.0, (0.0, False): 7.0, (1.0, True): 1.0, (1.0, False): 2.0}
        gaps = [table[(c.alpha, c.use_heatmap)] for c in configs]
        target = configs[0]  # (alpha=0, use_heatmap=True)
        v_empty = np.mean(list(table.values()))  # 3.5
        v_a = np.mean([table[(0.0, True)], table[(0.0, False)]])  # 5.5
        v_u = np.mean([table[(0.0, True)], table[(1.0, True)]])  # 2.5
        v_au = table[(0.0, True)]  # 4.0
        phi_a = 0.5 * (v_a - v_empty) + 0.5 * (v_au - v_u)
        phi_u = 0.5 * (v_u - v_empty) + 0.5 * (v_au - v_a)
        phi = shapley_importance(space, gaps, target)
        assert phi["alpha"] == pytest.approx(phi_a, abs=1e-12)
        assert phi["use_heatmap"] == pytest.approx(phi_u, abs=1e-12)
        assert sum(phi.values()) == pytest.approx(v_au - v_empty, abs=1e-12)

    def test_efficiency_on_random_game(self):
        space = SearchSpace(
            alpha=(0.0, 1.0, 2.0), beta=(10.0, 100.0), max_depth=(10, 50),
            max_candidate_num=(5, 20), param_h=(2, 5), use_heatmap=(True, False),
        )
        configs = grid_configs(space)
        rng = np.random.default_rng(0)
        gaps = rng.random(len(configs)).tolist()
        grand_mean = float(np.mean(gaps))
        for idx in (0, 17, len(configs) - 1):
            phi = shapley_importance(space, gaps, configs[idx])
            assert sum(phi.values()) == pytest.approx(gaps[idx] - grand_mean, abs=1e-9)

    def test_symmetry(self):
        # A game symmetric in (alpha, beta) over matched two-value ranges.
        space = SearchSpace(
            alpha=(0.0, 1.0), beta=(0.5, 1.5), max_depth=(10,),
            max_candidate_num=(1000,), param_h=(10,), use_heatmap=(True,),
        )
        configs = grid_configs(space)
        gaps = [float(c.alpha > 0.5) + float(c.beta > 1.0) for c in configs]
        both_high = next(c for c in configs if c.alpha == 1.0 and c.beta == 1.5)
        phi = shapley_importance(space, gaps, both_high)
        assert phi["alpha"] == pytest.approx(phi["beta"], abs=1e-12)

    def test_incomplete_grid_rejected(self):
        space = SearchSpace()
        with pytest.raises(CoverageError):
            shapley_importance(space, [1.0] * 10, DEFAULT_PARAMS)

    def test_all_config_export_consistent(self):
        space = SearchSpace(
            alpha=(0.0, 1.0), beta=(10.0, 100.0), max_depth=(10,),
            max_candidate_num=(5,), param_h=(2,), use_heatmap=(True, False),
        )
        configs = grid_configs(space)
        rng = np.random.default_rng(5)
        gaps = rng.random(len(configs)).tolist()
        all_phi = shapley_for_all_configs(space, gaps)
        for cfg, phi in zip(configs, all_phi):
            single = shapley_importance(space, gaps, cfg)
            assert phi == pytest.approx(single)


def test_params_file_round_trip(tmp_path):
    params = MctsParams(alpha=2.0, beta=150.0, max_depth=50, max_candidate_num=20,
                        param_h=5, use_heatmap=False, time_limit_factor=0.05)
    path = tmp_path / "config.txt"
    write_params_file(params, path)
    assert read_params_file(path) == params


def test_params_file_rejects_unknown_keys(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text("gamma=3\n")
    with pytest.raises(ValueError):
        read_params_file(path)
