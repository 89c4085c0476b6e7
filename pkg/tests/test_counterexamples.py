import numpy as np
import pytest

from spcalab import counterexamples as cx
from spcalab import linalg, models, solvers
from spcalab.errors import ConstructionError, FormatError, ParameterError


class TestRegularGraph:
    def test_k4_unique(self):
        g = cx.random_regular_graph(4, 3, seed=0)
        assert np.array_equal(g.adjacency, np.ones((4, 4)) - np.eye(4))

    def test_two_regular_union_of_cycles(self):
        g = cx.random_regular_graph(6, 2, seed=1)
        assert (g.adjacency.sum(axis=1) == 2).all()
        assert np.array_equal(g.adjacency, g.adjacency.T)
        assert not np.diag(g.adjacency).any()

    def test_odd_product_rejected(self):
        with pytest.raises(ParameterError):
            cx.random_regular_graph(5, 3, seed=0)

    def test_degree_bounds(self):
        with pytest.raises(ParameterError):
            cx.random_regular_graph(4, 4, seed=0)

    def test_determinism(self):
        a = cx.random_regular_graph(30, 4, seed=7)
        b = cx.random_regular_graph(30, 4, seed=7)
        assert np.array_equal(a.adjacency, b.adjacency)

    def test_spectral_resampling(self):
        bound = 3 * np.sqrt(24)
        g = cx.random_regular_graph(100, 24, seed=3, spectral_bound=bound)
        vals = np.linalg.eigvalsh(g.adjacency)
        assert vals[-1] == pytest.approx(24.0, abs=1e-8)
        assert max(abs(vals[0]), abs(vals[-2])) <= bound


class TestCovThresh:
    def test_sampled_bounds_enforced(self):
        # the acceptance-scale parameters violate the paper's window
        with pytest.raises(ParameterError, match="144"):
            cx.build_covthresh_instance(4, 1000, 0.02, seed=0)
        with pytest.raises(ParameterError, match="8/tau"):
            cx.build_covthresh_instance(4, 100, 1e-4, seed=0)

    @pytest.fixture(scope="class")
    @staticmethod
    def instance():
        return cx.build_covthresh_instance(4, 625, 0.0032, seed=1,
                                           enforce_sampled_bounds=False)

    def test_certificates_all_pass(self, instance):
        assert not instance.failed_certificates()
        assert "population-bounds" in instance.flags

    def test_offdiagonal_entry_values(self, instance):
        s, u = 4, 625
        tau = instance.params["tau"]
        p = instance.params["p_realized"]
        assert p == 0.25  # (u-1)/4 exact here, so nominal = realised
        ublock = instance.sigma[s:, s:]
        off = ublock[~np.eye(u, dtype=bool)]
        assert set(np.round(off, 15)) <= {round(9 * tau / 8, 15), round(-3 * tau / 8, 15)}

    def test_eigenvalue_sandwich(self, instance):
        vals = np.linalg.eigvalsh(instance.sigma[4:, 4:])
        assert vals[0] >= 0.25 and vals[-1] <= 0.75

    def test_population_flip(self, instance):
        tau = instance.params["tau"]
        cand = solvers.cov_thresh(instance.sigma, tau)
        assert np.abs(cand.values[:4]).max() <= 1e-8
        assert linalg.sin2_angle(cand.values, instance.v_true) == 1.0
        top = linalg.eig_top_m(instance.sigma, 1)[0]
        assert linalg.sin2_angle(top.vector, instance.v_true) <= 1e-12

    def test_h_kernel(self, instance):
        s, u = 4, 625
        p = instance.params["p_realized"]
        A = 2 * instance.sigma[s:, s:] - np.eye(u)
        H = A / (3 * instance.params["tau"])
        assert np.linalg.norm(H @ np.ones(u)) <= 1e-10


class TestGreedyCorr:
    @pytest.fixture(scope="class")
    @staticmethod
    def instance():
        return cx.build_greedycorr_instance(16)

    def test_certificates(self, instance):
        assert not instance.failed_certificates()

    def test_eigenstructure(self, instance):
        vals = np.sort(np.linalg.eigvalsh(instance.sigma))
        assert vals[-1] == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(vals[-16:-1], 0.9, atol=1e-10)
        assert np.allclose(vals[:15], 0.0, atol=1e-10)

    def test_population_row_correlations(self, instance):
        s = 16
        sq = instance.sigma @ instance.sigma
        assert np.abs(sq[0, 1:s]).max() <= 1 / s
        assert np.abs(sq[0, s:]).min() >= 0.4 / np.sqrt(s)

    def test_population_greedy_fooled(self, instance):
        s = 16
        cand = solvers.greedy_corr(instance.sigma, s, 0)
        assert linalg.sin2_angle(cand.values, instance.v_true) >= 1 - 1 / s
        # all s-1 decoys enter G before any true-support index but the seed
        assert set(cand.support) - {0} <= set(range(s, 2 * s - 1))

    def test_padding_preserves_structure(self):
        ce = cx.build_greedycorr_instance(8, lam1=1.2, lam2=0.8, d=100)
        assert ce.sigma.shape == (100, 100)
        vals = np.sort(np.linalg.eigvalsh(ce.sigma))
        assert vals[-1] == pytest.approx(1.2, abs=1e-10)
        assert np.allclose(vals[7:-1], 0.8, atol=1e-10)
        assert np.linalg.norm(ce.sigma @ ce.v_true - 1.2 * ce.v_true) <= 1e-10

    def test_structured_sqrt_squares_to_sigma(self):
        ce = cx.build_greedycorr_instance(5, d=20)
        S = ce.instance.sqrt.apply_rows(np.eye(20))  # rows of the sqrt matrix
        assert np.abs(S @ S - ce.sigma).max() < 1e-12

    def test_small_s_rejected(self):
        with pytest.raises(ParameterError):
            cx.build_greedycorr_instance(1)

    def test_sampled_failure_frequency(self):
        # the lemma's regime at desk scale: failure in well over 40% of trials
        s = 8
        ce = cx.build_greedycorr_instance(s)
        n = round(10 * s * s * np.log(ce.sigma.shape[0]))
        fooled = 0
        for seed in range(15):
            ds = ce.instance.sample(n, seed)
            cov = models.sample_covariance(ds)
            cand = solvers.greedy_corr(cov, s, 0)
            fooled += linalg.sin2_angle(cand.values, ce.v_true) >= 1 - 1 / s
        assert fooled >= 6  # 40% of 15


class TestDiagThresh:
    def test_figure_parameters(self):
        ce = cx.build_diagthresh_instance(1000, 8, 1.0, 0.5, 0.5 / 2.1, 0.5 / 2.2)
        assert not ce.failed_certificates()
        assert "reconstruction" in ce.flags
        cand = solvers.diag_thresh(ce.sigma, 8)
        assert linalg.sin2_angle(cand.values, ce.v_true) == 1.0
        assert set(cand.support).isdisjoint(set(np.flatnonzero(ce.v_true)))

    def test_single_spike_cannot_be_hidden(self):
        with pytest.raises(ConstructionError):
            cx.build_diagthresh_instance(40, 1, 10.0, 0.5, 0.4, 0.3)

    def test_margin_certificate_value(self):
        ce = cx.build_diagthresh_instance(60, 4, 1.0, 0.5, 0.4, 0.3)
        cert = ce.certificates["decoy_margin"]
        assert cert.measured == pytest.approx(0.5 - 0.25)

    def test_parameter_ordering_enforced(self):
        with pytest.raises(ParameterError):
            cx.build_diagthresh_instance(60, 4, 1.0, 0.5, 0.6, 0.3)


class TestBarrier:
    def test_construction_values(self):
        ce, u, C = cx.build_deflation_barrier(50, 0.1, 0.2)
        v1 = ce.v_true[:, 0]
        assert (u @ v1) ** 2 == pytest.approx(0.9, abs=1e-12)
        vals = np.sort(np.linalg.eigvalsh(ce.sigma))[::-1]
        assert vals[0] == pytest.approx(10.0, abs=1e-8)
        assert vals[1] == pytest.approx(1.0, abs=1e-8)
        assert vals[2] == pytest.approx(0.8, abs=1e-8)
        assert np.allclose(vals[3:], 0.0, atol=1e-8)
        expected_C = np.array([[1 + 0.8 * 0.9 / 2, -0.8 * np.sqrt(0.9) / 2],
                               [-0.8 * np.sqrt(0.9) / 2, 0.8 / 2]])
        assert np.abs(C - expected_C).max() <= 1e-12

    def test_verifier_passes(self):
        ce, u, C = cx.build_deflation_barrier(50, 0.1, 0.2)
        report = cx.verify_barrier(ce, u, C)
        assert report.passed
        assert report.nnz == 50
        assert report.eigenvalue > 1.0
        assert "nnz = 50" in report.describe()

    def test_verifier_catches_wrong_direction(self):
        ce, u, C = cx.build_deflation_barrier(20, 0.1, 0.2)
        bad = np.zeros(20)
        bad[0] = 1.0
        report = cx.verify_barrier(ce, bad, C)
        assert not report.passed

    @pytest.mark.parametrize("d,delta,gamma", [(4, 0.5, 0.5), (10, 0.01, 0.9),
                                               (33, 0.9, 0.05)])
    def test_parameter_sweep(self, d, delta, gamma):
        ce, u, C = cx.build_deflation_barrier(d, delta, gamma)
        report = cx.verify_barrier(ce, u, C)
        assert report.passed
        assert report.nnz == d


class TestSerialization:
    def test_round_trip(self, tmp_path):
        ce = cx.build_greedycorr_instance(4)
        path = tmp_path / "inst.spcx"
        cx.save_instance(ce, path)
        family, params, sigma = cx.load_instance(path)
        assert family == "greedycorr"
        assert params["s"] == 4.0
        assert np.array_equal(sigma, ce.sigma)

    def test_magic_enforced(self, tmp_path):
        path = tmp_path / "bad.spcx"
        path.write_bytes(b"????" + b"\x00" * 8)
        with pytest.raises(FormatError):
            cx.load_instance(path)


class TestPsdInvariant:
    def test_every_family_is_psd(self):
        builds = [
            cx.build_greedycorr_instance(6).sigma,
            cx.build_diagthresh_instance(50, 4, 1.0, 0.5, 0.24, 0.23).sigma,
            cx.build_covthresh_instance(2, 289, 0.008, seed=0,
                                        enforce_sampled_bounds=False).sigma,
            cx.build_deflation_barrier(12, 0.2, 0.3)[0].sigma,
        ]
        for sigma in builds:
            assert np.linalg.eigvalsh(sigma)[0] >= -1e-10
