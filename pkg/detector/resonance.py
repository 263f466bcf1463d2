from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import ConfigurationError, DimensionError, NumericalError, SelectionError, UndefinedProjectionError, ValidationError
from evaluation.ood_metrics import ScoredLabels, auroc, nearest_rank_quantile
from logger import get_logger
from metrics import EPOCHS_TOTAL
from nn.layers import init_uniform, linear_forward, make_rng
from nn.losses import mse_align_loss
from nn.optim import backprop_through, sgd_step

logger = get_logger(__name__)


class TrajectoryVariant(str, Enum):
    SCALAR_SUM = "scalar_sum"
    VECTOR_NORM = "vector_norm"
    WINDOW = "window"


@dataclass(frozen=True)
class ResonanceHead:
    """Camada linear h(x) = x Wᵀ alinhada aos alvos fixos; W tem forma (dim, d_in)."""

    weight: np.ndarray
    lr: float
    cache: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.lr > 0.0:
            raise ConfigurationError(f"lr da cabeça deve ser positivo, recebido {self.lr}")
        if not np.all(np.isfinite(self.weight)):
            raise NumericalError("pesos da cabeça não finitos")

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, lr: float, seed: int) -> "ResonanceHead":
        return cls(weight=init_uniform(make_rng(seed), in_dim, (out_dim, in_dim)), lr=lr)

    def forward(self, p: np.ndarray) -> np.ndarray:
        object.__setattr__(self, "cache", p)
        return linear_forward(p, self.weight)

    def represent(self, p: np.ndarray) -> np.ndarray:
        return linear_forward(p, self.weight)

    def backward(self, grad_h: np.ndarray) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        p = self.cache
        return {"W": grad_h.T @ p}, grad_h @ self.weight

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"W": self.weight}


@dataclass
class ResonanceTrace:
    """τ por época e por nó selvagem, AUROC de validação por época e, opcionalmente, representações."""

    taus: np.ndarray
    val_auroc: np.ndarray
    losses: np.ndarray
    representations: Optional[np.ndarray] = None  # (épocas + 1, selvagens, dim)

    def __post_init__(self):
        epochs = self.taus.shape[0]
        if self.val_auroc.shape != (epochs,) or self.losses.shape != (epochs,):
            raise DimensionError("trace com contagens de épocas inconsistentes")
        if self.representations is not None and self.representations.shape[0] != epochs + 1:
            raise DimensionError("trace deve guardar épocas + 1 representações")
        if np.any(self.taus < 0.0):
            raise ValidationError("τ negativo no trace")

    @property
    def num_epochs(self) -> int:
        return int(self.taus.shape[0])


@dataclass(frozen=True)
class DetectorThreshold:
    gamma: float
    target_id_tpr: float = 0.95


def align_epoch(head: ResonanceHead, p_known: np.ndarray, assigned: np.ndarray) -> Tuple[ResonanceHead, float]:
    """Um passo de gradiente completo no MSE de alinhamento; devolve a perda antes do passo."""
    if assigned.shape[0] != p_known.shape[0]:
        raise DimensionError(f"{assigned.shape[0]} alvos para {p_known.shape[0]} nós conhecidos")
    h = head.forward(p_known)
    loss, grad_h = mse_align_loss(h, assigned)
    if not np.isfinite(loss):
        raise NumericalError("perda de alinhamento não finita")
    grads = backprop_through(head, grad_h)
    updated = sgd_step(head.parameters(), grads, head.lr)
    return replace(head, weight=updated["W"], cache=None), loss


def compute_tau(w_before: np.ndarray, w_after: np.ndarray, p_wild: np.ndarray) -> np.ndarray:
    """τ_i = ‖x̃_i (W_depois - W_antes)ᵀ‖₂."""
    if w_before.shape != w_after.shape:
        raise DimensionError(f"W antes {w_before.shape} e depois {w_after.shape} diferem")
    return np.linalg.norm(linear_forward(p_wild, w_after - w_before), axis=1)


def _val_auroc(taus: np.ndarray, val_positions: np.ndarray, val_is_ood: np.ndarray) -> float:
    return auroc(ScoredLabels(-taus[val_positions], val_is_ood))


def _require_val_classes(val_is_ood: np.ndarray) -> None:
    val_is_ood = np.asarray(val_is_ood, dtype=bool)
    if val_is_ood.size == 0 or val_is_ood.all() or not val_is_ood.any():
        raise SelectionError("validação precisa de ao menos um nó ID e um OOD")


def train_resonance(
    head: ResonanceHead,
    p_known: np.ndarray,
    p_wild: np.ndarray,
    assigned: np.ndarray,
    epochs: int,
    val_positions: np.ndarray,
    val_is_ood: np.ndarray,
    keep_representations: bool = False,
) -> Tuple[ResonanceHead, ResonanceTrace]:
    """Treina a cabeça por `epochs` passos registrando τ de todos os nós selvagens a cada passo."""
    if epochs < 1:
        raise ConfigurationError("resonance_epochs deve ser >= 1")
    _require_val_classes(val_is_ood)
    taus = np.zeros((epochs, p_wild.shape[0]))
    val_auroc = np.zeros(epochs)
    losses = np.zeros(epochs)
    snapshots: List[np.ndarray] = [head.represent(p_wild)] if keep_representations else []

    for epoch in range(epochs):
        updated, losses[epoch] = align_epoch(head, p_known, assigned)
        taus[epoch] = compute_tau(head.weight, updated.weight, p_wild)
        val_auroc[epoch] = _val_auroc(taus[epoch], val_positions, val_is_ood)
        head = updated
        if keep_representations:
            snapshots.append(head.represent(p_wild))
        EPOCHS_TOTAL.labels(phase="resonance").inc()
        logger.debug("resonance_epoch", epoch=epoch, loss=losses[epoch], val_auroc=val_auroc[epoch])

    trace = ResonanceTrace(
        taus=taus,
        val_auroc=val_auroc,
        losses=losses,
        representations=np.stack(snapshots) if keep_representations else None,
    )
    return head, trace


def trajectory_scores(
    trace: ResonanceTrace,
    variant: TrajectoryVariant,
    window: Optional[int] = None,
    epoch: Optional[int] = None,
) -> np.ndarray:
    """Medidas de trajetória por nó selvagem.

    scalar_sum soma τ de todas as épocas; vector_norm é ‖h_T - h_0‖ (exige representações);
    window soma τ nas `window` épocas que terminam em `epoch` (padrão: a última), cortando no início.
    """
    if trace.num_epochs == 0:
        raise ConfigurationError("trace vazio")
    variant = TrajectoryVariant(variant)
    if variant == TrajectoryVariant.SCALAR_SUM:
        return trace.taus.sum(axis=0)
    if variant == TrajectoryVariant.VECTOR_NORM:
        if trace.representations is None:
            raise ConfigurationError("vector_norm exige um trace com representações")
        return np.linalg.norm(trace.representations[-1] - trace.representations[0], axis=1)

    if window is None or window < 1:
        raise ConfigurationError("largura de janela deve ser >= 1")
    if window > trace.num_epochs:
        raise ConfigurationError(f"janela {window} maior que o trace ({trace.num_epochs} épocas)")
    end = trace.num_epochs - 1 if epoch is None else epoch
    if not 0 <= end < trace.num_epochs:
        raise ConfigurationError(f"época {end} fora do trace")
    start = max(0, end - window + 1)
    return trace.taus[start:end + 1].sum(axis=0)


def select_resonant_epoch(trace: ResonanceTrace, val_positions: np.ndarray, val_is_ood: np.ndarray) -> int:
    """argmax_t AUROC(-τ^t) na validação; empates ficam com a primeira época."""
    _require_val_classes(val_is_ood)
    scores = [_val_auroc(trace.taus[t], val_positions, val_is_ood) for t in range(trace.num_epochs)]
    return int(np.argmax(scores))


def tau_threshold(val_id_tau: np.ndarray, target_id_tpr: float = 0.95) -> DetectorThreshold:
    """γ = quantil inferior (1 - tpr) por posto mais próximo dos τ ID de validação."""
    val_id_tau = np.asarray(val_id_tau, dtype=np.float64)
    if val_id_tau.size == 0:
        raise ValidationError("limiar τ exige ao menos um nó ID de validação")
    if not 0.0 < target_id_tpr <= 1.0:
        raise ConfigurationError(f"target_id_tpr fora de (0, 1]: {target_id_tpr}")
    return DetectorThreshold(nearest_rank_quantile(val_id_tau, 1.0 - target_id_tpr), target_id_tpr)


def detect_ood_tau(tau: np.ndarray, threshold: DetectorThreshold) -> np.ndarray:
    return (np.asarray(tau) <= threshold.gamma).astype(np.int8)


def project_onto_gradient(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if x.shape != g.shape:
        raise DimensionError(f"x {x.shape} e g {g.shape} incompatíveis")
    norm_sq = float(g @ g)
    if norm_sq == 0.0:
        raise UndefinedProjectionError("projeção sobre gradiente nulo")
    return (float(x @ g) / norm_sq) * g


def dominant_gradient_direction(head: ResonanceHead, p_known: np.ndarray, assigned: np.ndarray) -> np.ndarray:
    """Direção de entrada dominante de ∇_W ℓ: primeiro vetor singular à direita vezes o valor singular."""
    _, grad_h = mse_align_loss(head.forward(p_known), assigned)
    grad_w = backprop_through(head, grad_h)["W"]
    _, singular, right = np.linalg.svd(grad_w, full_matrices=False)
    direction = singular[0] * right[0]
    # sinal canônico: maior componente em módulo positiva
    if direction[np.argmax(np.abs(direction))] < 0:
        direction = -direction
    return direction


def gradient_projection_diagnostic(
    head: ResonanceHead, p_known: np.ndarray, assigned: np.ndarray, p_wild: np.ndarray
) -> np.ndarray:
    """Comprimento com sinal da projeção de cada nó selvagem sobre a direção do gradiente."""
    g = dominant_gradient_direction(head, p_known, assigned)
    lengths = np.zeros(p_wild.shape[0])
    for i, x in enumerate(p_wild):
        lengths[i] = np.sign(x @ g) * np.linalg.norm(project_onto_gradient(x, g))
    return lengths
