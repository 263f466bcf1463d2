from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from errors import ConfigurationError, DimensionError, SelectionError, ValidationError
from evaluation.ood_metrics import ScoredLabels, auroc, nearest_rank_quantile
from graph.graph import Graph, normalize_adjacency
from logger import get_logger
from metrics import EPOCHS_TOTAL
from nn.layers import GcnCache, GcnParams, gcn_forward_cached, init_gcn_params, init_uniform, make_rng
from nn.losses import bce_loss
from nn.optim import Params, backprop_through, sgd_step

logger = get_logger(__name__)


@dataclass
class EnergyModel:
    """E(v) = w_out · Σ_k β_k h_v^(k) sobre uma GCN de K camadas de mesma largura."""

    gcn: GcnParams
    beta: np.ndarray
    w_out: np.ndarray
    cache: Optional[GcnCache] = field(default=None, repr=False)

    def __post_init__(self):
        widths = self.gcn.output_widths
        if len(set(widths)) != 1:
            raise DimensionError(f"camadas com larguras diferentes não podem ser somadas: {widths}")
        if self.beta.shape != (self.gcn.num_layers,):
            raise DimensionError(f"beta deve ter {self.gcn.num_layers} entradas")
        if self.w_out.shape != (widths[0],):
            raise DimensionError(f"w_out deve ter largura {widths[0]}")

    @classmethod
    def initialize(cls, in_dim: int, hidden: int, layers: int, rng: np.random.Generator) -> "EnergyModel":
        gcn = init_gcn_params(rng, in_dim, hidden, layers)
        return cls(gcn=gcn, beta=np.full(layers, 1.0 / layers), w_out=init_uniform(rng, hidden, (hidden,)))

    @property
    def num_layers(self) -> int:
        return self.gcn.num_layers

    def forward(
        self,
        a_hat: sp.spmatrix,
        x: np.ndarray,
        dropout: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ) -> np.ndarray:
        """Energia de todos os nós do grafo."""
        outputs, self.cache = gcn_forward_cached(a_hat, x, self.gcn, dropout, rng)
        mixed = sum(b * h for b, h in zip(self.beta, outputs))
        return mixed @ self.w_out

    def backward(self, grad_energy: np.ndarray) -> Tuple[Params, np.ndarray]:
        """Gradientes de todos os parâmetros e de X para um gradiente dL/dE por nó."""
        cache = self.cache
        outputs = cache.outputs
        mixed = sum(b * h for b, h in zip(self.beta, outputs))
        grad_mixed = np.outer(grad_energy, self.w_out)

        grads: Params = {"w_out": mixed.T @ grad_energy}
        grads["beta"] = np.array([np.sum(h * grad_mixed) for h in outputs])
        grad_h = [b * grad_mixed for b in self.beta]

        last = self.num_layers - 1
        grad_x = None
        for k in range(last, -1, -1):
            grad_z = grad_h[k] if k == last else grad_h[k] * (cache.pre_activations[k] > 0.0)
            weight = self.gcn.layer_weights[k]
            grads[f"gcn.{k}"] = cache.aggregated[k].T @ grad_z
            # Â é simétrica
            grad_input = np.asarray(cache.a_hat @ (grad_z @ weight.T))
            if cache.masks[k] is not None:
                grad_input = grad_input * cache.masks[k]
            if k > 0:
                grad_h[k - 1] = grad_h[k - 1] + grad_input
            else:
                grad_x = grad_input
        return grads, grad_x

    def parameters(self) -> Params:
        params: Params = {f"gcn.{k}": w for k, w in enumerate(self.gcn.layer_weights)}
        params["beta"] = self.beta
        params["w_out"] = self.w_out
        return params

    @classmethod
    def from_parameters(cls, params: Params) -> "EnergyModel":
        layers = sorted(
            (int(name.split(".", 1)[1]), value) for name, value in params.items() if name.startswith("gcn.")
        )
        if not layers or [k for k, _ in layers] != list(range(len(layers))):
            raise DimensionError("parâmetros gcn.k ausentes ou fora de ordem")
        return cls(
            gcn=GcnParams([np.asarray(w, dtype=np.float64) for _, w in layers]),
            beta=np.asarray(params["beta"], dtype=np.float64).ravel(),
            w_out=np.asarray(params["w_out"], dtype=np.float64).ravel(),
        )


@dataclass(frozen=True)
class TrainSet:
    """V_known ∪ V_cand ∪ V_syn sobre o grafo aumentado; conhecidos recebem 1, os demais 0."""

    graph: Graph
    nodes: np.ndarray
    labels: np.ndarray
    num_known: int
    num_candidates: int
    num_synthetic: int

    def __post_init__(self):
        if self.nodes.shape != self.labels.shape:
            raise DimensionError("um rótulo por nó de treino")
        if self.nodes.size and self.nodes.max() >= self.graph.num_nodes:
            raise ValidationError("nó de treino fora do grafo aumentado")


def build_train_set(
    graph: Graph,
    known_id: np.ndarray,
    candidates: np.ndarray,
    synthetic_features: np.ndarray,
    synthetic_edges: np.ndarray,
) -> TrainSet:
    augmented = graph.with_extra_nodes(synthetic_features, synthetic_edges)
    synthetic = np.arange(graph.num_nodes, augmented.num_nodes)
    if np.intersect1d(known_id, candidates).size:
        raise ValidationError("candidatos OOD não podem ser nós conhecidos")
    nodes = np.concatenate([known_id, candidates, synthetic]).astype(np.int64)
    labels = np.concatenate([np.ones(len(known_id)), np.zeros(len(candidates) + synthetic.size)])
    return TrainSet(
        graph=augmented,
        nodes=nodes,
        labels=labels,
        num_known=len(known_id),
        num_candidates=len(candidates),
        num_synthetic=int(synthetic.size),
    )


def energy_forward(model: EnergyModel, graph: Graph, nodes: Optional[np.ndarray] = None) -> np.ndarray:
    """Energias sem dropout; `nodes=None` devolve todos os nós."""
    energies = model.forward(normalize_adjacency(graph), graph.features)
    return energies if nodes is None else energies[nodes]


@dataclass
class ClassifierResult:
    model: EnergyModel
    best_epoch: int
    val_auroc: np.ndarray  # estado inicial (época 0) e depois de cada época
    losses: np.ndarray


def train_classifier(
    train_set: TrainSet,
    val_nodes: np.ndarray,
    val_is_ood: np.ndarray,
    epochs: int,
    lr: float,
    seed: int,
    dropout: float = 0.1,
    hidden: int = 16,
    layers: int = 2,
    model: Optional[EnergyModel] = None,
) -> ClassifierResult:
    """Gradiente completo no BCE com dropout nas entradas das camadas; guarda o melhor AUROC de validação."""
    if np.unique(train_set.labels).size < 2:
        raise ConfigurationError("conjunto de treino do classificador tem uma única classe")
    val_is_ood = np.asarray(val_is_ood, dtype=bool)
    if val_is_ood.size == 0 or val_is_ood.all() or not val_is_ood.any():
        raise SelectionError("validação precisa de ao menos um nó ID e um OOD")

    rng = make_rng(seed)
    if model is None:
        model = EnergyModel.initialize(train_set.graph.features.shape[1], hidden, layers, rng)
    a_hat = normalize_adjacency(train_set.graph)
    x = train_set.graph.features

    def validation_auroc(current: EnergyModel) -> float:
        energies = current.forward(a_hat, x)
        return auroc(ScoredLabels(-energies[val_nodes], val_is_ood))

    history: List[float] = [validation_auroc(model)]
    losses: List[float] = []
    best_params, best_epoch = model.parameters(), 0

    for epoch in range(1, epochs + 1):
        energies = model.forward(a_hat, x, dropout=dropout, rng=rng)
        loss, grad_logits = bce_loss(energies[train_set.nodes], train_set.labels)
        grad_energy = np.zeros(train_set.graph.num_nodes)
        np.add.at(grad_energy, train_set.nodes, grad_logits)
        params = sgd_step(model.parameters(), backprop_through(model, grad_energy), lr)
        model = EnergyModel.from_parameters(params)

        score = validation_auroc(model)
        losses.append(loss)
        history.append(score)
        if score > history[best_epoch]:
            best_params, best_epoch = model.parameters(), epoch
        EPOCHS_TOTAL.labels(phase="classifier").inc()
        logger.debug("classifier_epoch", epoch=epoch, loss=loss, val_auroc=score)

    logger.info("classifier_trained", epochs=epochs, best_epoch=best_epoch, best_val_auroc=history[best_epoch])
    return ClassifierResult(
        model=EnergyModel.from_parameters(best_params),
        best_epoch=best_epoch,
        val_auroc=np.asarray(history),
        losses=np.asarray(losses),
    )


def energy_threshold(val_id_energies: np.ndarray, target_id_tpr: float = 0.95) -> float:
    """γ′ tal que ~95% das energias ID de validação ficam acima dele."""
    val_id_energies = np.asarray(val_id_energies, dtype=np.float64)
    if val_id_energies.size == 0:
        raise ValidationError("limiar de energia exige ao menos um nó ID de validação")
    return nearest_rank_quantile(val_id_energies, 1.0 - target_id_tpr)


def detect_ood_energy(energies: np.ndarray, gamma_prime: float) -> np.ndarray:
    return (np.asarray(energies) <= gamma_prime).astype(np.int8)
