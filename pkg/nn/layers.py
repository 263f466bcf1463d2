from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from errors import ConfigurationError, DimensionError


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 semeado; único gerador do projeto."""
    return np.random.Generator(np.random.PCG64(seed))


def init_uniform(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...]) -> np.ndarray:
    """Entradas uniformes em [-1/√fan_in, +1/√fan_in]."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def linear_forward(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """X Wᵀ sem bias."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise DimensionError(f"linear_forward: X {x.shape} incompatível com W {w.shape}")
    return x @ w.T


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


@dataclass(frozen=True)
class GcnParams:
    """Pesos das K camadas; W_k tem forma (entrada, saída)."""

    layer_weights: List[np.ndarray]

    def __post_init__(self):
        if len(self.layer_weights) < 1:
            raise ConfigurationError("GCN precisa de pelo menos uma camada")
        for k in range(1, len(self.layer_weights)):
            previous, current = self.layer_weights[k - 1], self.layer_weights[k]
            if previous.shape[1] != current.shape[0]:
                raise DimensionError(f"camadas {k - 1} e {k} incompatíveis: {previous.shape} -> {current.shape}")

    @property
    def num_layers(self) -> int:
        return len(self.layer_weights)

    @property
    def output_widths(self) -> List[int]:
        return [w.shape[1] for w in self.layer_weights]


def init_gcn_params(rng: np.random.Generator, in_dim: int, hidden: int, layers: int) -> GcnParams:
    if layers < 1:
        raise ConfigurationError("GCN precisa de pelo menos uma camada")
    weights = []
    fan_in = in_dim
    for _ in range(layers):
        weights.append(init_uniform(rng, fan_in, (fan_in, hidden)))
        fan_in = hidden
    return GcnParams(weights)


@dataclass
class GcnCache:
    """Intermediários do forward usados pelo backward."""

    a_hat: Optional[sp.spmatrix] = None
    masks: List[Optional[np.ndarray]] = field(default_factory=list)
    aggregated: List[np.ndarray] = field(default_factory=list)  # Â·H̃_{k-1}
    pre_activations: List[np.ndarray] = field(default_factory=list)
    outputs: List[np.ndarray] = field(default_factory=list)


def gcn_forward_cached(
    a_hat: sp.spmatrix,
    x: np.ndarray,
    params: GcnParams,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[List[np.ndarray], GcnCache]:
    if a_hat.shape[0] != a_hat.shape[1] or a_hat.shape[1] != x.shape[0]:
        raise DimensionError(f"Â {a_hat.shape} incompatível com X {x.shape}")
    if params.layer_weights[0].shape[0] != x.shape[1]:
        raise DimensionError(f"primeira camada espera {params.layer_weights[0].shape[0]} colunas, X tem {x.shape[1]}")
    if dropout > 0.0 and rng is None:
        raise ConfigurationError("dropout exige um gerador")

    cache = GcnCache(a_hat=a_hat)
    h = x
    last = params.num_layers - 1
    for k, weight in enumerate(params.layer_weights):
        mask = None
        if dropout > 0.0:
            mask = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
            h = h * mask
        aggregated = np.asarray(a_hat @ h)
        z = aggregated @ weight
        h = z if k == last else relu(z)
        cache.masks.append(mask)
        cache.aggregated.append(aggregated)
        cache.pre_activations.append(z)
        cache.outputs.append(h)
    return list(cache.outputs), cache


def gcn_forward(a_hat: sp.spmatrix, x: np.ndarray, params: GcnParams) -> List[np.ndarray]:
    """h^(k) = ReLU(Â h^(k-1) W_k) para k < K; a última camada é linear."""
    outputs, _ = gcn_forward_cached(a_hat, x, params)
    return outputs
