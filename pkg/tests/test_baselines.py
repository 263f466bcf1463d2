import numpy as np
import pytest
from scipy.stats import rankdata

from detector.baselines import COVARIANCE_RIDGE, Prototype, baseline_scores, fit_prototype
from errors import UndefinedSimilarityError, ValidationError
from models.models import BaselineMode
from nn.layers import make_rng


def test_fit_prototype_identical_rows():
    reps = np.tile([1.0, -2.0, 0.5], (4, 1))
    prototype = fit_prototype(reps, BaselineMode.MAHALANOBIS)
    assert prototype.mean.tolist() == [1.0, -2.0, 0.5]
    assert np.allclose(prototype.covariance, COVARIANCE_RIDGE * np.eye(3), atol=1e-15)


def test_fit_prototype_mean():
    prototype = fit_prototype(np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert prototype.mean.tolist() == [1.0, 0.0]
    assert prototype.covariance is None


def test_mahalanobis_needs_two_rows():
    with pytest.raises(ValidationError):
        fit_prototype(np.array([[1.0, 2.0]]), BaselineMode.MAHALANOBIS)


def test_scores_at_the_mean():
    mean = np.array([1.0, 2.0])
    prototype = Prototype(mean=mean, covariance=np.eye(2))
    x = mean[None, :]
    assert baseline_scores(BaselineMode.EUCLIDEAN, prototype, x).tolist() == [0.0]
    assert baseline_scores(BaselineMode.MAHALANOBIS, prototype, x).tolist() == [0.0]
    assert baseline_scores(BaselineMode.COSINE, prototype, x)[0] == pytest.approx(-1.0, abs=1e-15)


def test_euclidean_example():
    prototype = Prototype(mean=np.zeros(2))
    assert baseline_scores(BaselineMode.EUCLIDEAN, prototype, np.array([[3.0, 4.0]])).tolist() == [5.0]


def test_mahalanobis_scaled_identity():
    """Testa Σ = c·I: Mahalanobis = euclidiana/√c"""
    rng = make_rng(12)
    reps = rng.standard_normal((30, 4))
    mean = rng.standard_normal(4)
    for c in (1.0, 0.25, 9.0):
        prototype = Prototype(mean=mean, covariance=c * np.eye(4))
        euclidean = baseline_scores(BaselineMode.EUCLIDEAN, prototype, reps)
        mahalanobis = baseline_scores(BaselineMode.MAHALANOBIS, prototype, reps)
        assert np.max(np.abs(mahalanobis - euclidean / np.sqrt(c))) < 1e-8


def test_score_ranges():
    rng = make_rng(13)
    known = rng.standard_normal((40, 3)) + 1.0
    reps = rng.standard_normal((25, 3))
    prototype = fit_prototype(known, BaselineMode.MAHALANOBIS)
    assert np.all(baseline_scores(BaselineMode.EUCLIDEAN, prototype, reps) >= 0.0)
    assert np.all(baseline_scores(BaselineMode.MAHALANOBIS, prototype, reps) >= 0.0)
    cosine = baseline_scores(BaselineMode.COSINE, prototype, reps)
    assert np.all((cosine >= -1.0) & (cosine <= 1.0))


@pytest.mark.parametrize("mode", list(BaselineMode))
def test_rotation_keeps_ranking(mode):
    """Testa que uma rotação ortogonal global preserva o ranking dos escores"""
    rng = make_rng(14)
    known = rng.standard_normal((50, 4)) + np.array([2.0, 0.0, 0.0, 0.0])
    reps = rng.standard_normal((30, 4))
    rotation, _ = np.linalg.qr(rng.standard_normal((4, 4)))

    original = baseline_scores(mode, fit_prototype(known, mode), reps)
    rotated = baseline_scores(mode, fit_prototype(known @ rotation, mode), reps @ rotation)
    assert np.allclose(rotated, original, atol=1e-9)
    assert np.array_equal(rankdata(rotated), rankdata(original))


def test_cosine_zero_norm():
    prototype = Prototype(mean=np.array([1.0, 0.0]))
    with pytest.raises(UndefinedSimilarityError):
        baseline_scores(BaselineMode.COSINE, prototype, np.array([[0.0, 0.0]]))
    with pytest.raises(UndefinedSimilarityError):
        baseline_scores(BaselineMode.COSINE, Prototype(mean=np.zeros(2)), np.array([[1.0, 0.0]]))


def test_mahalanobis_requires_covariance():
    with pytest.raises(ValidationError):
        baseline_scores(BaselineMode.MAHALANOBIS, Prototype(mean=np.zeros(2)), np.ones((1, 2)))
