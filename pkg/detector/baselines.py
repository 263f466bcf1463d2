from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from errors import DimensionError, NumericalError, UndefinedSimilarityError, ValidationError
from models.models import BaselineMode

COVARIANCE_RIDGE = 1e-3


@dataclass(frozen=True)
class Prototype:
    """Protótipo dos nós ID conhecidos: média e, no modo Mahalanobis, covariância regularizada."""

    mean: np.ndarray
    covariance: Optional[np.ndarray] = None


def fit_prototype(representations: np.ndarray, mode: BaselineMode = BaselineMode.EUCLIDEAN) -> Prototype:
    representations = np.asarray(representations, dtype=np.float64)
    if representations.ndim != 2 or representations.shape[0] < 1:
        raise ValidationError("protótipo exige ao menos uma linha de representação")
    mean = representations.mean(axis=0)
    if BaselineMode(mode) != BaselineMode.MAHALANOBIS:
        return Prototype(mean=mean)
    if representations.shape[0] < 2:
        raise ValidationError("covariância exige ao menos duas linhas")
    dim = representations.shape[1]
    covariance = np.atleast_2d(np.cov(representations, rowvar=False)) + COVARIANCE_RIDGE * np.eye(dim)
    return Prototype(mean=mean, covariance=covariance)


def baseline_scores(mode: BaselineMode, prototype: Prototype, representations: np.ndarray) -> np.ndarray:
    """Escore OOD (maior ⇒ mais OOD): -cosseno, distância euclidiana ou de Mahalanobis ao protótipo."""
    mode = BaselineMode(mode)
    representations = np.asarray(representations, dtype=np.float64)
    if representations.ndim != 2 or representations.shape[1] != prototype.mean.size:
        raise DimensionError(f"representações {representations.shape} incompatíveis com o protótipo")
    offsets = representations - prototype.mean

    if mode == BaselineMode.COSINE:
        norms = np.linalg.norm(representations, axis=1)
        mean_norm = np.linalg.norm(prototype.mean)
        if mean_norm == 0.0 or np.any(norms == 0.0):
            raise UndefinedSimilarityError("similaridade cosseno indefinida para vetor de norma zero")
        cosine = representations @ prototype.mean / (norms * mean_norm)
        return -np.clip(cosine, -1.0, 1.0)
    if mode == BaselineMode.EUCLIDEAN:
        return np.linalg.norm(offsets, axis=1)

    if prototype.covariance is None:
        raise ValidationError("protótipo ajustado sem covariância; use o modo mahalanobis no ajuste")
    try:
        factor = cho_factor(prototype.covariance)
    except LinAlgError as e:
        raise NumericalError(f"covariância não é definida positiva: {e}")
    solved = cho_solve(factor, offsets.T)
    return np.sqrt(np.maximum(np.sum(offsets.T * solved, axis=0), 0.0))
