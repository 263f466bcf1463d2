import math
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import average_precision_score, roc_auc_score

from errors import DimensionError, MetricError, ValidationError
from models.models import MetricBlock

# Folga para que q·n calculado em ponto flutuante não suba uma posição no rank
_RANK_EPS = 1e-9


@dataclass(frozen=True)
class ScoredLabels:
    """Escores OOD (maior ⇒ mais OOD) e verdade terrestre 0/1 (1 = OOD)."""

    ood_score: np.ndarray
    is_ood: np.ndarray

    def __post_init__(self):
        score = np.asarray(self.ood_score, dtype=np.float64).ravel()
        labels = np.asarray(self.is_ood).astype(bool).ravel()
        if score.shape != labels.shape:
            raise DimensionError(f"{score.size} escores para {labels.size} rótulos")
        if not np.all(np.isfinite(score)):
            raise ValidationError("escores OOD não finitos")
        object.__setattr__(self, "ood_score", score)
        object.__setattr__(self, "is_ood", labels)

    @property
    def num_ood(self) -> int:
        return int(self.is_ood.sum())

    @property
    def num_id(self) -> int:
        return int((~self.is_ood).sum())

    def require_both_classes(self, metric: str) -> None:
        if self.num_ood == 0 or self.num_id == 0:
            raise MetricError(f"{metric} exige ao menos um nó ID e um OOD (ID={self.num_id}, OOD={self.num_ood})")


def nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    """Quantil por posto mais próximo, sem interpolação: o ⌈q·n⌉-ésimo menor valor (mínimo posto 1)."""
    values = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if values.size == 0:
        raise MetricError("quantil de um conjunto vazio")
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"quantil fora de [0, 1]: {q}")
    rank = max(1, math.ceil(q * values.size - _RANK_EPS))
    return float(values[rank - 1])


def auroc(data: ScoredLabels) -> float:
    """Área sob a ROC com OOD como classe positiva; empates valem ½."""
    data.require_both_classes("AUROC")
    return float(roc_auc_score(data.is_ood, data.ood_score))


def aupr(data: ScoredLabels) -> float:
    """Precisão média; escores iguais formam um único degrau de limiar."""
    if data.num_ood == 0:
        raise MetricError("AUPR exige ao menos um nó OOD")
    return float(average_precision_score(data.is_ood, data.ood_score))


def fpr_at_95_tpr(data: ScoredLabels, id_tpr: float = 0.95) -> float:
    """Fração de OOD com escore ≤ quantil 95% (posto mais próximo) dos escores ID."""
    data.require_both_classes("FPR95")
    threshold = nearest_rank_quantile(data.ood_score[~data.is_ood], id_tpr)
    return float(np.mean(data.ood_score[data.is_ood] <= threshold))


def metric_block(data: ScoredLabels) -> MetricBlock:
    return MetricBlock(auroc=auroc(data), aupr=aupr(data), fpr95=fpr_at_95_tpr(data))
