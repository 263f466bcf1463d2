from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from detector.classifier import EnergyModel
from errors import ConfigurationError, DimensionError, NumericalError
from graph.graph import Graph, normalize_adjacency
from logger import get_logger
from models.models import CandidateConfig, SynthConfig
from nn.layers import make_rng

logger = get_logger(__name__)


@dataclass(frozen=True)
class CandidateSet:
    positions: np.ndarray  # posições no vetor de selvagens, em ordem de τ crescente
    threshold: float  # T: o n-ésimo menor τ


@dataclass(frozen=True)
class SyntheticNodes:
    features: np.ndarray
    edges: np.ndarray  # pares (sintético, candidato) com ids sintéticos N..N+j-1


def select_candidates(tau: np.ndarray, config: CandidateConfig) -> CandidateSet:
    """Os n menores τ; empates ficam com o menor índice."""
    tau = np.asarray(tau, dtype=np.float64)
    if config.n > tau.size:
        raise ConfigurationError(f"candidates_n = {config.n} excede os {tau.size} nós selvagens")
    order = np.lexsort((np.arange(tau.size), tau))[: config.n]
    return CandidateSet(positions=order, threshold=float(tau[order[-1]]))


def sgld_step(
    x: np.ndarray,
    grad_energy: np.ndarray,
    cand_mean: np.ndarray,
    cfg: SynthConfig,
    noise: np.ndarray,
) -> np.ndarray:
    """x′ = λ(x - (α/2)∇E + ε) + (1 - λ)(média_cand - x), aplicado literalmente."""
    x, grad_energy, noise = (np.asarray(v, dtype=np.float64) for v in (x, grad_energy, noise))
    if x.shape != grad_energy.shape or x.shape != noise.shape or x.shape[-1] != np.shape(cand_mean)[-1]:
        raise DimensionError("sgld_step: dimensões incompatíveis")
    if not all(np.all(np.isfinite(v)) for v in (x, grad_energy, cand_mean, noise)):
        raise NumericalError("sgld_step: entrada não finita")
    lam = cfg.lam
    return lam * (x - 0.5 * cfg.step_size * grad_energy + noise) + (1.0 - lam) * (cand_mean - x)


def knn_wiring(
    synthetic: np.ndarray, candidate_features: np.ndarray, candidates: np.ndarray, k: int, first_id: int
) -> np.ndarray:
    """Liga cada nó sintético aos k candidatos mais próximos (euclidiano, espaço de entrada)."""
    distances = cdist(synthetic, candidate_features)
    nearest = np.argsort(distances, axis=1, kind="stable")[:, :k]
    sources = np.repeat(first_id + np.arange(synthetic.shape[0]), k)
    return np.stack([sources, candidates[nearest].ravel()], axis=1).astype(np.int64)


def _energy_input_gradient(model: EnergyModel, graph: Graph, features: np.ndarray, edges: np.ndarray) -> np.ndarray:
    augmented = graph.with_extra_nodes(features, edges)
    model.forward(normalize_adjacency(augmented), augmented.features)
    grad_energy = np.zeros(augmented.num_nodes)
    grad_energy[graph.num_nodes:] = 1.0
    _, grad_x = model.backward(grad_energy)
    return grad_x[graph.num_nodes:]


def synthesize_nodes(model: EnergyModel, graph: Graph, candidates: np.ndarray, cfg: SynthConfig) -> SyntheticNodes:
    """Gera nós OOD sintéticos por SGLD a partir de N(0, I), religando o kNN antes de cada passo.

    A auto-aresta de cada sintético vem da normalização Â; `edges` traz só as ligações aos candidatos.
    """
    candidates = np.asarray(candidates, dtype=np.int64)
    if candidates.size == 0:
        raise ConfigurationError("síntese exige ao menos um candidato")
    count = candidates.size if cfg.count is None else cfg.count
    dim = graph.features.shape[1]
    k = min(cfg.knn_k, candidates.size)
    candidate_features = graph.features[candidates]
    cand_mean = candidate_features.mean(axis=0)

    rng = make_rng(cfg.seed)
    x = rng.standard_normal((count, dim))
    for step in range(cfg.steps):
        edges = knn_wiring(x, candidate_features, candidates, k, graph.num_nodes)
        grad = _energy_input_gradient(model, graph, x, edges)
        noise = cfg.noise_std * rng.standard_normal(x.shape)
        x = sgld_step(x, grad, cand_mean, cfg, noise)
        logger.debug("sgld_step", step=step, mean_norm=float(np.linalg.norm(x, axis=1).mean()) if count else 0.0)

    edges = knn_wiring(x, candidate_features, candidates, k, graph.num_nodes)
    logger.info("synthetic_nodes_generated", count=count, steps=cfg.steps, knn_k=k)
    return SyntheticNodes(features=x, edges=edges)
