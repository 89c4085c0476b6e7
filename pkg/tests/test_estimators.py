import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler

from spcalab import estimators, linalg, models


@pytest.fixture(scope="module")
def spiked_data():
    inst = models.build_spiked_general(30, 4, 0.5, seed=17)
    return inst, inst.sample(3000, 5).rows


class TestRTPMEstimator:
    def test_fit_recovers_component(self, spiked_data):
        inst, X = spiked_data
        est = estimators.RTPM(r=8, T=25).fit(X)
        assert linalg.sin2_angle(est.component_, inst.v_true) <= 0.05
        assert est.support_.size <= 8
        assert est.n_iter_ == 25

    def test_get_set_params_and_clone(self):
        est = estimators.RTPM(r=12, T=9, mode="disjoint", tol=1e-6)
        params = est.get_params()
        assert params["r"] == 12 and params["mode"] == "disjoint"
        twin = clone(est)
        assert twin.get_params() == params
        twin.set_params(r=5)
        assert twin.r == 5 and est.r == 12

    def test_transform_shape(self, spiked_data):
        _, X = spiked_data
        est = estimators.RTPM(r=8, T=10).fit(X)
        assert est.transform(X).shape == (X.shape[0], 1)

    def test_projection_option(self, spiked_data):
        inst, X = spiked_data
        est = estimators.RTPM(r=12, T=25, project_s=4).fit(X)
        assert est.support_.size <= 4

    def test_pipeline_composition(self, spiked_data):
        _, X = spiked_data
        pipe = Pipeline([("scale", StandardScaler(with_mean=False, with_std=False)),
                         ("spca", estimators.RTPM(r=8, T=10))])
        out = pipe.fit_transform(X)
        assert out.shape == (X.shape[0], 1)

    def test_explained_variance(self, spiked_data):
        inst, X = spiked_data
        est = estimators.RTPM(r=8, T=25).fit(X)
        assert est.explained_variance(X) == pytest.approx(est.rayleigh_, rel=1e-10)


class TestBaselineEstimators:
    def test_diag_thresholding(self, spiked_data):
        inst, X = spiked_data
        est = estimators.DiagonalThresholding(s=4).fit(X)
        assert est.component_.shape == (30,)
        assert est.support_.size <= 4

    def test_fit_covariance_equals_fit(self, spiked_data):
        _, X = spiked_data
        cov = models.sample_covariance(models.Dataset(X))
        a = estimators.DiagonalThresholding(s=4).fit(X)
        b = estimators.DiagonalThresholding(s=4).fit_covariance(cov)
        assert np.array_equal(a.component_, b.component_)

    def test_cov_thresholding(self, spiked_data):
        _, X = spiked_data
        est = estimators.CovarianceThresholding(tau=0.02).fit(X)
        assert abs(np.linalg.norm(est.component_) - 1) < 1e-10

    def test_greedy_correlation(self, spiked_data):
        inst, X = spiked_data
        i_star = int(np.flatnonzero(inst.v_true)[0])
        est = estimators.GreedyCorrelation(s=4, seed_index=i_star).fit(X)
        assert est.support_.size <= 4

    def test_clone_all(self):
        for est in (estimators.DiagonalThresholding(s=3),
                    estimators.CovarianceThresholding(tau=0.1),
                    estimators.GreedyCorrelation(s=3, seed_index=2),
                    estimators.DeflatedSparsePCA(k=2, r=5, T=5)):
            assert clone(est).get_params() == est.get_params()


class TestDeflatedEstimator:
    def test_orthonormal_components(self):
        inst = models.build_spiked_general(20, 3, 0.6, seed=2)
        X = inst.sample(2500, 9).rows
        est = estimators.DeflatedSparsePCA(k=3, r=6, T=20).fit(X)
        assert est.components_.shape == (20, 3)
        gram = est.components_.T @ est.components_
        assert np.abs(gram - np.eye(3)).max() <= 1e-8
        assert est.transform(X).shape == (2500, 3)
