from typing import Optional, Sequence

import numpy as np

from errors import ConfigurationError, ValidationError
from logger import get_logger
from models.models import TargetMode, TargetSpec
from nn.layers import make_rng

logger = get_logger(__name__)


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    return matrix / np.linalg.norm(matrix, axis=1, keepdims=True)


def simplex_etf(num_targets: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """K vetores unitários com produto interno -1/(K-1) entre pares, um por linha."""
    if num_targets < 2:
        raise ConfigurationError("ETF exige num_targets >= 2")
    if dim < num_targets:
        raise ConfigurationError(f"ETF exige dim >= num_targets ({dim} < {num_targets})")
    # colunas ortonormais em R^dim
    basis, _ = np.linalg.qr(rng.standard_normal((dim, num_targets)))
    centering = np.eye(num_targets) - np.full((num_targets, num_targets), 1.0 / num_targets)
    etf = np.sqrt(num_targets / (num_targets - 1)) * basis @ centering
    return etf.T


def generate_targets(spec: TargetSpec) -> np.ndarray:
    rng = make_rng(spec.seed)
    if spec.mode == TargetMode.SINGLE_RANDOM:
        if spec.num_targets != 1:
            raise ConfigurationError("single_random usa exatamente um alvo")
        targets = _unit_rows(rng.standard_normal((1, spec.dim)))
    elif spec.mode == TargetMode.MULTI_RANDOM:
        targets = _unit_rows(rng.standard_normal((spec.num_targets, spec.dim)))
    elif spec.mode == TargetMode.ETF_BY_LABEL:
        if spec.labels is not None and len(set(spec.labels)) != spec.num_targets:
            raise ConfigurationError(
                f"etf_by_label: num_targets={spec.num_targets} mas os nós conhecidos têm {len(set(spec.labels))} classes"
            )
        targets = simplex_etf(spec.num_targets, spec.dim, rng)
    else:
        raise ConfigurationError(f"modo de alvo desconhecido: {spec.mode}")
    logger.debug("targets_generated", mode=spec.mode.value, num_targets=targets.shape[0], dim=spec.dim)
    return targets


def assign_targets(targets: np.ndarray, num_known: int, labels: Optional[Sequence[int]] = None) -> np.ndarray:
    """Um alvo por nó conhecido: pelo rótulo quando houver, senão round-robin pelo índice."""
    num_targets = targets.shape[0]
    if labels is None:
        index = np.arange(num_known) % num_targets
    else:
        index = np.asarray(labels, dtype=np.int64)
        if index.size != num_known:
            raise ValidationError(f"{index.size} rótulos para {num_known} nós conhecidos")
        if index.size and (index.min() < 0 or index.max() >= num_targets):
            raise ValidationError(f"rótulos devem estar em [0, {num_targets})")
    return targets[index]
