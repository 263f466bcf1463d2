from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from errors import BoundsError, DimensionError, SplitError, ValidationError
from logger import get_logger
from models.models import StandardizeMode

logger = get_logger(__name__)


def _symmetric_adjacency(num_nodes: int, rows: np.ndarray, cols: np.ndarray) -> sp.csr_matrix:
    """Monta a adjacência CSR binária, simétrica, sem duplicatas e sem laços."""
    keep = rows != cols
    rows, cols = rows[keep], cols[keep]
    data = np.ones(2 * rows.size, dtype=np.float64)
    adjacency = sp.coo_matrix(
        (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(num_nodes, num_nodes),
    ).tocsr()
    adjacency.sum_duplicates()
    adjacency.data[:] = 1.0
    adjacency.sort_indices()
    return adjacency


@dataclass(frozen=True)
class Graph:
    """Grafo imutável: adjacência CSR não direcionada + matriz densa de atributos."""

    num_nodes: int
    adjacency: sp.csr_matrix
    features: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.num_nodes:
            raise DimensionError(
                f"matriz de atributos {self.features.shape} incompatível com {self.num_nodes} nós"
            )
        if self.adjacency.shape != (self.num_nodes, self.num_nodes):
            raise DimensionError(f"adjacência {self.adjacency.shape} incompatível com {self.num_nodes} nós")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("atributos contêm valores não finitos")
        if (self.adjacency != self.adjacency.T).nnz != 0:
            raise ValidationError("adjacência não é simétrica")

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Iterable[Tuple[int, int]], features: np.ndarray) -> "Graph":
        edge_array = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if edge_array.size and (edge_array.min() < 0 or edge_array.max() >= num_nodes):
            raise BoundsError(f"índice de aresta fora do intervalo [0, {num_nodes})")
        adjacency = _symmetric_adjacency(num_nodes, edge_array[:, 0], edge_array[:, 1])
        return cls(num_nodes=num_nodes, adjacency=adjacency, features=np.asarray(features, dtype=np.float64))

    @property
    def num_edges(self) -> int:
        """Número de arestas não direcionadas."""
        return int(self.adjacency.nnz // 2)

    @property
    def has_edges(self) -> bool:
        return self.adjacency.nnz > 0

    def edge_list(self) -> np.ndarray:
        """Arestas (i, j) com i < j, em ordem lexicográfica."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return np.stack([upper.row[order], upper.col[order]], axis=1).astype(np.int64)

    def with_features(self, features: np.ndarray) -> "Graph":
        return Graph(num_nodes=self.num_nodes, adjacency=self.adjacency, features=features)

    def with_extra_nodes(self, features: np.ndarray, edges: np.ndarray) -> "Graph":
        """Anexa nós (ids N..N+j-1) e as arestas que os ligam ao grafo."""
        features = np.asarray(features, dtype=np.float64).reshape(-1, self.features.shape[1])
        total = self.num_nodes + features.shape[0]
        existing = self.adjacency.tocoo()
        extra = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        rows = np.concatenate([existing.row, extra[:, 0]])
        cols = np.concatenate([existing.col, extra[:, 1]])
        adjacency = _symmetric_adjacency(total, rows, cols)
        return Graph(num_nodes=total, adjacency=adjacency, features=np.vstack([self.features, features]))


@dataclass(frozen=True)
class SplitMasks:
    """Conjuntos de índices de nós; val/test particionam os nós selvagens."""

    known_id: np.ndarray
    wild: np.ndarray
    val_in: np.ndarray
    val_out: np.ndarray
    test_in: np.ndarray
    test_out: np.ndarray

    def __post_init__(self):
        if np.intersect1d(self.known_id, self.wild).size:
            raise SplitError("conhecidos e selvagens não podem se sobrepor")
        parts = [self.val_in, self.val_out, self.test_in, self.test_out]
        union = np.concatenate(parts)
        if np.unique(union).size != union.size:
            raise SplitError("conjuntos de validação e teste não são disjuntos")
        if not np.array_equal(np.sort(union), np.sort(self.wild)):
            raise SplitError("validação e teste devem cobrir exatamente os nós selvagens")

    @property
    def val(self) -> np.ndarray:
        return np.sort(np.concatenate([self.val_in, self.val_out]))

    @property
    def test(self) -> np.ndarray:
        return np.sort(np.concatenate([self.test_in, self.test_out]))

    def wild_positions(self, nodes: np.ndarray) -> np.ndarray:
        """Posições de `nodes` dentro do vetor ordenado de nós selvagens."""
        positions = np.searchsorted(self.wild, nodes)
        if positions.size and (positions.max() >= self.wild.size or not np.array_equal(self.wild[positions], nodes)):
            raise SplitError("nós informados não pertencem ao conjunto selvagem")
        return positions


def normalize_adjacency(graph: Graph) -> sp.csr_matrix:
    """Â = D̃^{-1/2}(A+I)D̃^{-1/2}; os graus de A+I são sempre positivos."""
    with_loops = (graph.adjacency + sp.identity(graph.num_nodes, format="csr")).tocoo()
    degrees = np.asarray(with_loops.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(degrees)
    # produto comutativo: Â_ij e Â_ji são bit a bit iguais
    values = inv_sqrt[with_loops.row] * inv_sqrt[with_loops.col]
    normalized = sp.csr_matrix((values, (with_loops.row, with_loops.col)), shape=with_loops.shape)
    normalized.sort_indices()
    return normalized


def propagate(a_hat: sp.spmatrix, x: np.ndarray, hops: int) -> np.ndarray:
    if hops < 0:
        raise DimensionError(f"hops deve ser >= 0, recebido {hops}")
    if a_hat.shape[1] != x.shape[0]:
        raise DimensionError(f"Â {a_hat.shape} incompatível com X {x.shape}")
    propagated = np.asarray(x, dtype=np.float64)
    for _ in range(hops):
        propagated = np.asarray(a_hat @ propagated)
    return propagated


@dataclass
class FeatureScaler:
    """Padronização por coluna com estatísticas dos nós ID conhecidos."""

    mode: StandardizeMode = StandardizeMode.SCALE
    mean: Optional[np.ndarray] = field(default=None, repr=False)
    scale: Optional[np.ndarray] = field(default=None, repr=False)

    def fit(self, known_features: np.ndarray) -> "FeatureScaler":
        dim = known_features.shape[1]
        self.mean = np.zeros(dim)
        self.scale = np.ones(dim)
        if self.mode == StandardizeMode.NONE:
            return self
        std = known_features.std(axis=0)
        self.scale = np.where(std > 0.0, std, 1.0)
        if self.mode == StandardizeMode.ZSCORE:
            self.mean = known_features.mean(axis=0)
        logger.debug("feature_scaler_fitted", mode=self.mode.value, dim=dim)
        return self

    def transform(self, features: np.ndarray) -> np.ndarray:
        if self.mean is None or self.scale is None:
            raise ValidationError("FeatureScaler precisa de fit antes de transform")
        return (features - self.mean) / self.scale
