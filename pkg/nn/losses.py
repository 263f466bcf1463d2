from typing import Tuple

import numpy as np
from scipy.special import expit

from errors import DimensionError, ValidationError


def mse_align_loss(h: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Média de (H_ij - e_j)² sobre linhas e colunas.

    `targets` pode ser um vetor e (mesmo alvo para todas as linhas) ou uma matriz
    com um alvo por linha. O gradiente é 2(H - E)/(linhas·colunas).
    """
    targets = np.asarray(targets, dtype=np.float64)
    if h.ndim == 2 and targets.ndim == 1 and targets.size == h.shape[1]:
        targets = np.broadcast_to(targets, h.shape)
    if h.ndim != 2 or targets.shape != h.shape:
        raise DimensionError(f"mse_align_loss: H {h.shape} incompatível com alvos {targets.shape}")
    residual = h - targets
    count = max(residual.size, 1)
    loss = float(np.sum(residual ** 2) / count)
    return loss, 2.0 * residual / count


def bce_loss(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if logits.shape != labels.shape or logits.ndim != 1:
        raise DimensionError(f"bce_loss: logits {logits.shape} e rótulos {labels.shape} incompatíveis")
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise ValidationError("bce_loss: rótulos devem estar em {0, 1}")
    count = max(logits.size, 1)
    # -[y log σ(z) + (1-y) log(1-σ(z))] = log(1 + e^z) - y·z
    per_sample = np.logaddexp(0.0, logits) - labels * logits
    return float(per_sample.sum() / count), (expit(logits) - labels) / count
