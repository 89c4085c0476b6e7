import numpy as np
import pytest

from spcalab import harness
from spcalab.config import Config
from spcalab.errors import ParameterError
from spcalab.records import records_to_csv


def scaling_cfg(**extra):
    base = {
        "sweep": "scaling", "family": "spiked", "d": 30, "s": "2,3",
        "gamma": "0.5", "delta": "0.1", "n_grid": "200:1600:x2", "seed": "0,1",
        "T": "15",
    }
    base.update({k: str(v) for k, v in extra.items()})
    return Config(base)


class TestScaling:
    def test_records_and_nscale_rows(self):
        recs = harness.run_scaling(scaling_cfg(), threads=1)
        nscale = [r for r in recs if r.metric == "n_scale"]
        assert len(nscale) == 4  # 2 s-values x 2 seeds
        for r in nscale:
            assert r.n in (200, 400, 800, 1600)
            if harness.ABOVE_GRID not in r.flags:
                assert r.value <= 0.1
        sin2 = [r for r in recs if r.metric == "sin2"]
        assert all(0 <= r.value <= 1 for r in sin2)

    def test_grid_walk_stops_at_first_success(self):
        recs = harness.run_scaling(scaling_cfg(s="2", seed="0"), threads=1)
        sin2 = [r for r in recs if r.metric == "sin2"]
        ns = [r.n for r in sin2]
        assert ns == sorted(ns)
        assert all(r.value > 0.1 for r in sin2[:-1])

    def test_reproducible_and_thread_independent(self):
        a = harness.run_scaling(scaling_cfg(), threads=1)
        b = harness.run_scaling(scaling_cfg(), threads=2)
        assert records_to_csv(a) == records_to_csv(b)

    def test_above_grid_sentinel(self):
        cfg = scaling_cfg(s="3", seed="0", n_grid="8,16", delta="0.001")
        recs = harness.run_scaling(cfg, threads=1)
        nscale = [r for r in recs if r.metric == "n_scale"]
        assert len(nscale) == 1
        assert harness.ABOVE_GRID in nscale[0].flags
        table = harness.nscale_table(recs)
        assert table[("spiked", 30, 3, 0.5, 0.001)]["median"] == float("inf")

    def test_decreasing_grid_rejected(self):
        with pytest.raises(ParameterError):
            harness.run_scaling(scaling_cfg(n_grid="100,50"), threads=1)


class TestRuntimeAccuracy:
    def cfg(self, **extra):
        base = {"family": "spiked", "d": 25, "s": "3", "gamma": "0.5", "n": "1500",
                "seed": "0,1", "T": "2,5,10", "r": "6",
                "algorithm": "rtpm,diag_thresh,greedy_corr"}
        base.update({k: str(v) for k, v in extra.items()})
        return Config(base)

    def test_trajectory_and_oneshot_points(self):
        recs = harness.run_runtime_accuracy(self.cfg(), threads=1)
        rtpm = [r for r in recs if r.algorithm == "rtpm" and r.seed == 0]
        assert [r.T for r in rtpm] == [2, 5, 10]
        assert all(r.metric == "correlation2" for r in recs)
        oneshot = [r for r in recs if r.algorithm == "diag_thresh"]
        assert len(oneshot) == 2  # one per seed

    def test_correlation_complements_sin2(self):
        recs = harness.run_runtime_accuracy(self.cfg(), threads=1)
        for r in recs:
            assert 0.0 <= r.value <= 1.0

    def test_empty_trajectory_flagged(self):
        recs = harness.run_runtime_accuracy(self.cfg(T="0", algorithm="rtpm"),
                                            threads=1)
        assert all("empty-trajectory" in r.flags for r in recs)

    def test_wall_ms_zero_when_timing_off(self):
        recs = harness.run_runtime_accuracy(self.cfg(), threads=1)
        assert all(r.wall_ms == 0.0 for r in recs)

    def test_wall_ms_measured_when_enabled(self):
        recs = harness.run_runtime_accuracy(self.cfg(timing="wall", seed="0"),
                                            threads=1)
        rtpm = [r for r in recs if r.algorithm == "rtpm"]
        times = [r.wall_ms for r in rtpm]
        assert times == sorted(times)
        assert times[-1] > 0.0


class TestCounterexampleSweep:
    def cfg(self, **extra):
        base = {"sweep": "counterexample", "family": "greedycorr", "s": "6",
                "n": "500,1000", "seed": "0,1", "T": "25", "population": "1"}
        base.update({k: str(v) for k, v in extra.items()})
        return Config(base)

    def test_population_rows_are_deterministic_and_flagged(self):
        recs = harness.run_counterexample_sweep(self.cfg(), threads=1)
        pop = [r for r in recs if "population" in r.flags]
        assert {r.algorithm for r in pop} == {"greedy_corr", "rtpm"}
        assert all(r.n == 0 and r.seed is None for r in pop)
        heuristic = next(r for r in pop if r.algorithm == "greedy_corr")
        assert heuristic.value >= 1 - 1 / 6

    def test_both_algorithms_per_point(self):
        recs = harness.run_counterexample_sweep(self.cfg(), threads=2)
        sampled = [r for r in recs if "population" not in r.flags]
        assert len(sampled) == 2 * 2 * 2

    def test_diagthresh_rows_carry_reconstruction_flag(self):
        cfg = self.cfg(family="diagthresh", d="60", s="4", n="400",
                       population="0", seed="0")
        recs = harness.run_counterexample_sweep(cfg, threads=1)
        assert recs and all("reconstruction" in r.flags for r in recs)

    def test_unknown_family(self):
        with pytest.raises(ParameterError):
            harness.run_counterexample_sweep(self.cfg(family="spiked"), threads=1)


class TestAblation:
    def cfg(self, **extra):
        base = {"family": "greedycorr", "d": 30, "s": "4", "gamma": "0.5",
                "n": "2000", "T": "4,8", "seed": "0,1", "r": "20"}
        base.update({k: str(v) for k, v in extra.items()})
        return Config(base)

    def test_modes_paired_per_T(self):
        recs = harness.run_ablation(self.cfg(), threads=1)
        assert len(recs) == 2 * 2 * 2  # T x mode x seed
        by_key = {(r.T, r.mode, r.seed) for r in recs}
        assert (4, "full", 0) in by_key and (8, "disjoint", 1) in by_key

    def test_sample_usage_metadata(self):
        recs = harness.run_ablation(self.cfg(T="3"), threads=1)
        disjoint = [r for r in recs if r.mode == "disjoint"]
        assert all(f"samples-used={(2000 // 3) * 3}" in r.flags for r in disjoint)

    def test_single_batch_T1_modes_coincide(self):
        recs = harness.run_ablation(self.cfg(T="1", seed="0"), threads=1)
        full = next(r for r in recs if r.mode == "full")
        disjoint = next(r for r in recs if r.mode == "disjoint")
        # B = n exactly: the single batch is the full sample
        assert full.value == disjoint.value

    def test_n_smaller_than_T_rejected(self):
        with pytest.raises(ParameterError):
            harness.run_ablation(self.cfg(n="5", T="10"), threads=1)


class TestSeedMixing:
    def test_stable_across_runs(self):
        assert harness.mix_seed("a", 1, 0.5) == harness.mix_seed("a", 1, 0.5)
        assert harness.mix_seed("a", 1) != harness.mix_seed("a", 2)
