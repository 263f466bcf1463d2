"""Orquestração do pipeline em quatro fases e dos comandos por etapa.

Cada etapa relê do disco os artefatos da etapa anterior, de modo que `run`
e a execução etapa por etapa produzem os mesmos arquivos.
"""

import os
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp

from detector.baselines import baseline_scores, fit_prototype
from detector.classifier import (
    EnergyModel,
    build_train_set,
    detect_ood_energy,
    energy_forward,
    energy_threshold,
    train_classifier,
)
from detector.resonance import (
    DetectorThreshold,
    ResonanceHead,
    TrajectoryVariant,
    align_epoch,
    compute_tau,
    detect_ood_tau,
    gradient_projection_diagnostic,
    select_resonant_epoch,
    tau_threshold,
    train_resonance,
    trajectory_scores,
)
from detector.synth import select_candidates, synthesize_nodes
from detector.targets import assign_targets, generate_targets
from errors import ConfigurationError, ReportConsistencyError, ValidationError
from evaluation.ood_metrics import ScoredLabels, metric_block, nearest_rank_quantile
from graph.datasets import Dataset, dataset_from_files, make_sbm_dataset, make_toy_dataset
from graph.graph import FeatureScaler, Graph, normalize_adjacency, propagate
from graph.io import read_edge_list, read_matrix_csv, write_edges, write_features
from logger import LoggerContext, get_logger
from metrics import NODES_SCORED_TOTAL, track_stage
from models.models import (
    BaselineMode,
    DatasetSource,
    MetricBlock,
    RunConfig,
    ScoreReport,
    ScoreSummary,
    TargetMode,
)
from nn.layers import make_rng
from services import artifacts as art

logger = get_logger(__name__)

STAGES = ("resonance", "synthesize", "classify", "score", "eval")


@dataclass(frozen=True)
class Prepared:
    """Conjunto de dados com atributos padronizados e entradas da cabeça P."""

    dataset: Dataset
    graph: Graph  # atributos padronizados
    a_hat: sp.csr_matrix
    head_input: np.ndarray

    @property
    def masks(self):
        return self.dataset.masks

    @property
    def is_ood(self) -> np.ndarray:
        return self.dataset.is_ood


def build_dataset(cfg: RunConfig) -> Dataset:
    if cfg.dataset == DatasetSource.TOY:
        return make_toy_dataset(cfg.toy_spec())
    if cfg.dataset == DatasetSource.SBM:
        return make_sbm_dataset(cfg.sbm_spec())
    return dataset_from_files(
        cfg.edge_path, cfg.feature_path, cfg.split_path, cfg.flags_path, cfg.seed, label_path=cfg.label_path
    )


def prepare(cfg: RunConfig) -> Prepared:
    dataset = build_dataset(cfg)
    scaler = FeatureScaler(cfg.standardize).fit(dataset.graph.features[dataset.masks.known_id])
    graph = dataset.graph.with_features(scaler.transform(dataset.graph.features))
    a_hat = normalize_adjacency(graph)
    # P = Â^hops X quando há arestas; grafo sem arestas ou raw_features usa X
    if cfg.raw_features or not graph.has_edges:
        head_input = graph.features
    else:
        head_input = propagate(a_hat, graph.features, cfg.propagation_hops)
    return Prepared(dataset=dataset, graph=graph, a_hat=a_hat, head_input=head_input)


def known_class_labels(cfg: RunConfig, prep: Prepared) -> Optional[List[int]]:
    """Classe densa 0..C-1 de cada nó conhecido quando os alvos são atribuídos por rótulo."""
    if cfg.target_mode != TargetMode.ETF_BY_LABEL:
        return None
    class_labels = prep.dataset.class_labels
    if class_labels is None:
        raise ConfigurationError("etf_by_label exige classes por nó (label_path quando dataset = files)")
    known = class_labels[prep.masks.known_id]
    if known.size and known.min() < 0:
        raise ValidationError("todo nó conhecido precisa de uma classe ID")
    _, dense = np.unique(known, return_inverse=True)
    return dense.astype(int).tolist()


def _validation(prep: Prepared):
    masks = prep.masks
    return masks.wild_positions(masks.val), prep.is_ood[masks.val]


@track_stage("resonance")
def run_resonance(cfg: RunConfig, out_dir: str) -> Dict[str, float]:
    """Fases 1 e 2: alinhamento com registro de τ, época t*, limiar γ e candidatos."""
    if cfg.window_width > cfg.resonance_epochs:
        raise ConfigurationError(
            f"window_width {cfg.window_width} maior que resonance_epochs ({cfg.resonance_epochs})"
        )
    prep = prepare(cfg)
    masks = prep.masks
    p_known = prep.head_input[masks.known_id]
    p_wild = prep.head_input[masks.wild]

    target_spec = cfg.target_spec(known_class_labels(cfg, prep))
    targets = generate_targets(target_spec)
    assigned = assign_targets(targets, masks.known_id.size, target_spec.labels)
    initial = ResonanceHead.initialize(p_known.shape[1], cfg.resonance_dim, cfg.resonance_lr, cfg.seed + 2)
    val_positions, val_is_ood = _validation(prep)
    final, trace = train_resonance(initial, p_known, p_wild, assigned, cfg.resonance_epochs, val_positions, val_is_ood)

    t_star = select_resonant_epoch(trace, val_positions, val_is_ood)
    tau_star = trace.taus[t_star]
    threshold = tau_threshold(tau_star[masks.wild_positions(masks.val_in)], cfg.target_id_tpr)
    candidates = select_candidates(tau_star, cfg.candidate_config())
    candidate_nodes = masks.wild[candidates.positions]

    variants = {
        "scalar_sum": trajectory_scores(trace, TrajectoryVariant.SCALAR_SUM),
        # ‖h_T - h_0‖ direto dos pesos inicial e final, sem guardar representações por época
        "vector_norm": compute_tau(initial.weight, final.weight, p_wild),
        "window": trajectory_scores(trace, TrajectoryVariant.WINDOW, window=cfg.window_width, epoch=t_star),
    }

    art.write_table(
        art.artifact_path(out_dir, art.RESONANCE_TRACE),
        ["epoch", "node", "tau"],
        ([t, int(node), art.fmt(trace.taus[t, i])] for t in range(trace.num_epochs) for i, node in enumerate(masks.wild)),
    )
    art.write_table(
        art.artifact_path(out_dir, art.RESONANCE_METRICS),
        ["epoch", "val_auroc", "loss"],
        ([t, art.fmt(trace.val_auroc[t]), art.fmt(trace.losses[t])] for t in range(trace.num_epochs)),
    )
    art.write_table(
        art.artifact_path(out_dir, art.CANDIDATES),
        ["rank", "node", "tau"],
        ([rank, int(node), art.fmt(tau_star[pos])] for rank, (pos, node) in enumerate(zip(candidates.positions, candidate_nodes))),
    )
    art.write_table(
        art.artifact_path(out_dir, art.TRAJECTORY_SCORES),
        ["node", "tau", "scalar_sum", "vector_norm", "window"],
        (
            [int(node), art.fmt(tau_star[i])] + [art.fmt(variants[name][i]) for name in ("scalar_sum", "vector_norm", "window")]
            for i, node in enumerate(masks.wild)
        ),
    )
    summary = {
        "t_star": t_star,
        "gamma": threshold.gamma,
        "target_id_tpr": threshold.target_id_tpr,
        "candidate_threshold": candidates.threshold,
        "candidates_n": int(candidates.positions.size),
        "val_auroc_at_t_star": float(trace.val_auroc[t_star]),
    }
    art.write_json(art.artifact_path(out_dir, art.RESONANCE_SUMMARY), summary)

    if cfg.diagnostics:
        head = initial
        for _ in range(t_star):
            head, _ = align_epoch(head, p_known, assigned)
        lengths = gradient_projection_diagnostic(head, p_known, assigned, p_wild)
        art.write_table(
            art.artifact_path(out_dir, art.GRADIENT_PROJECTION),
            ["node", "is_ood", "projection"],
            ([int(node), int(prep.is_ood[node]), art.fmt(lengths[i])] for i, node in enumerate(masks.wild)),
        )

    NODES_SCORED_TOTAL.labels(score="tau").inc(masks.wild.size)
    logger.info("resonance_finished", t_star=t_star, gamma=threshold.gamma, candidate_threshold=candidates.threshold)
    return summary


def _read_candidates(out_dir: str) -> np.ndarray:
    path = art.artifact_path(out_dir, art.CANDIDATES, required=True)
    return art.int_column(art.read_table(path), "node", path)


def _initial_energy_model(cfg: RunConfig, in_dim: int) -> EnergyModel:
    # mesmo estado inicial que train_classifier cria a partir de seed + 4
    return EnergyModel.initialize(in_dim, cfg.classifier_hidden, cfg.classifier_layers, make_rng(cfg.seed + 4))


@track_stage("synthesize")
def run_synthesize(cfg: RunConfig, out_dir: str) -> int:
    """Fase 3: SGLD contra o modelo de energia recém-inicializado."""
    candidates = _read_candidates(out_dir)
    prep = prepare(cfg)
    model = _initial_energy_model(cfg, prep.graph.features.shape[1])
    synthetic = synthesize_nodes(model, prep.graph, candidates, cfg.synth_config())
    write_features(art.artifact_path(out_dir, art.SYNTHETIC_FEATURES), synthetic.features)
    write_edges(art.artifact_path(out_dir, art.SYNTHETIC_EDGES), synthetic.edges)
    return int(synthetic.features.shape[0])


def _read_synthetic(prep: Prepared, out_dir: str):
    features = read_matrix_csv(art.artifact_path(out_dir, art.SYNTHETIC_FEATURES, required=True))
    features = features.reshape(-1, prep.graph.features.shape[1])
    edges_path = art.artifact_path(out_dir, art.SYNTHETIC_EDGES, required=True)
    edges = read_edge_list(edges_path, prep.graph.num_nodes + features.shape[0])
    return features, np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def _augmented_graph(prep: Prepared, out_dir: str) -> Graph:
    return prep.graph.with_extra_nodes(*_read_synthetic(prep, out_dir))


@track_stage("classify")
def run_classify(cfg: RunConfig, out_dir: str) -> int:
    """Fase 4: BCE em conhecidos (1) contra candidatos e sintéticos (0)."""
    candidates = _read_candidates(out_dir)
    prep = prepare(cfg)
    synthetic_features, synthetic_edges = _read_synthetic(prep, out_dir)
    train_set = build_train_set(prep.graph, prep.masks.known_id, candidates, synthetic_features, synthetic_edges)
    result = train_classifier(
        train_set,
        prep.masks.val,
        prep.is_ood[prep.masks.val],
        epochs=cfg.classifier_epochs,
        lr=cfg.classifier_lr,
        seed=cfg.seed + 4,
        dropout=cfg.classifier_dropout,
        hidden=cfg.classifier_hidden,
        layers=cfg.classifier_layers,
    )
    digest = art.save_model(art.artifact_path(out_dir, art.ENERGY_MODEL), result.model.parameters())
    art.write_table(
        art.artifact_path(out_dir, art.CLASSIFIER_METRICS),
        ["epoch", "val_auroc", "loss"],
        (
            [epoch, art.fmt(result.val_auroc[epoch]), art.fmt(result.losses[epoch - 1]) if epoch else ""]
            for epoch in range(result.val_auroc.size)
        ),
    )
    art.write_json(
        art.artifact_path(out_dir, art.CLASSIFIER_SUMMARY),
        {
            "best_epoch": result.best_epoch,
            "best_val_auroc": float(result.val_auroc[result.best_epoch]),
            "epochs": cfg.classifier_epochs,
            "model_sha256": digest,
        },
    )
    return result.best_epoch


@track_stage("score")
def run_score(cfg: RunConfig, out_dir: str, baseline: Optional[BaselineMode] = None) -> art.ScoreTable:
    """Pontua os nós selvagens: τ em t*, energia, baseline opcional e as marcações dos detectores."""
    baseline = baseline or cfg.baseline
    resonance = art.read_json(art.artifact_path(out_dir, art.RESONANCE_SUMMARY, required=True))
    trajectory_path = art.artifact_path(out_dir, art.TRAJECTORY_SCORES, required=True)
    trajectory = art.read_table(trajectory_path)
    model = EnergyModel.from_parameters(art.load_model(art.artifact_path(out_dir, art.ENERGY_MODEL, required=True)))

    prep = prepare(cfg)
    masks = prep.masks
    nodes = art.int_column(trajectory, "node", trajectory_path)
    if not np.array_equal(nodes, masks.wild):
        raise ReportConsistencyError(f"{trajectory_path}: nós não correspondem ao conjunto selvagem da configuração")
    tau = art.float_column(trajectory, "tau", trajectory_path)
    energies = energy_forward(model, _augmented_graph(prep, out_dir), masks.wild)

    gamma_prime = energy_threshold(energies[masks.wild_positions(masks.val_in)], cfg.target_id_tpr)
    split = np.where(np.isin(masks.wild, masks.val), "val", "test").astype(object)
    table = art.ScoreTable(
        node=masks.wild,
        is_ood=prep.is_ood[masks.wild],
        split=split,
        tau=tau,
        energy=energies,
        tau_flag=detect_ood_tau(tau, DetectorThreshold(resonance["gamma"], cfg.target_id_tpr)),
        energy_flag=detect_ood_energy(energies, gamma_prime),
    )
    if baseline is not None:
        mode = BaselineMode(baseline)
        prototype = fit_prototype(prep.head_input[masks.known_id], mode)
        table.baselines[mode.value] = baseline_scores(mode, prototype, prep.head_input[masks.wild])
        NODES_SCORED_TOTAL.labels(score=f"baseline_{mode.value}").inc(masks.wild.size)

    art.write_scores(art.artifact_path(out_dir, art.SCORES), table)
    NODES_SCORED_TOTAL.labels(score="energy").inc(masks.wild.size)
    logger.info("scores_written", nodes=int(masks.wild.size), gamma_prime=gamma_prime, baseline=baseline)
    return table


def _block(ood_score: np.ndarray, is_ood: np.ndarray) -> MetricBlock:
    return metric_block(ScoredLabels(ood_score, is_ood))


def summarize_scores(
    table: art.ScoreTable,
    target_id_tpr: float = 0.95,
    variants: Optional[Dict[str, np.ndarray]] = None,
) -> ScoreSummary:
    """Métricas sobre as linhas de teste e limiares γ/γ′ a partir das linhas ID de validação."""
    test = table.rows_in("test")
    val_id = table.rows_in("val") & ~table.is_ood
    labels = table.is_ood[test]
    summary = ScoreSummary()
    if table.tau is not None:
        summary.tau_only = _block(-table.tau[test], labels)
        if val_id.any():
            summary.gamma = nearest_rank_quantile(table.tau[val_id], 1.0 - target_id_tpr)
    if table.energy is not None:
        summary.classifier = _block(-table.energy[test], labels)
        if val_id.any():
            summary.gamma_prime = nearest_rank_quantile(table.energy[val_id], 1.0 - target_id_tpr)
    summary.baselines = {mode: _block(scores[test], labels) for mode, scores in table.baselines.items()}
    summary.score_variants = {name: _block(-scores[test], labels) for name, scores in (variants or {}).items()}
    return summary


def _score_variants(out_dir: str, table: art.ScoreTable) -> Dict[str, np.ndarray]:
    path = art.artifact_path(out_dir, art.TRAJECTORY_SCORES)
    if not os.path.exists(path):
        return {}
    columns = art.read_table(path)
    position = {node: i for i, node in enumerate(art.int_column(columns, "node", path))}
    if any(int(node) not in position for node in table.node):
        return {}
    order = np.asarray([position[int(node)] for node in table.node])
    return {
        name: art.float_column(columns, name, path)[order]
        for name in ("tau", "scalar_sum", "vector_norm", "window")
        if name in columns
    }


def _optional_json(out_dir: str, name: str) -> Dict:
    path = art.artifact_path(out_dir, name)
    return art.read_json(path) if os.path.exists(path) else {}


@track_stage("eval")
def run_eval(cfg: RunConfig, out_dir: str) -> ScoreReport:
    table = art.read_scores(art.artifact_path(out_dir, art.SCORES, required=True))
    summary = summarize_scores(table, cfg.target_id_tpr, _score_variants(out_dir, table))
    resonance = _optional_json(out_dir, art.RESONANCE_SUMMARY)
    classifier = _optional_json(out_dir, art.CLASSIFIER_SUMMARY)
    summary.t_star = resonance.get("t_star")
    summary.candidate_threshold = resonance.get("candidate_threshold")
    summary.best_epoch = classifier.get("best_epoch")

    report = ScoreReport(seed=cfg.seed, summary=summary, config=cfg.echo())
    art.write_json(art.artifact_path(out_dir, art.REPORT), report.dict())
    logger.info(
        "report_written",
        tau_auroc=summary.tau_only.auroc if summary.tau_only else None,
        classifier_auroc=summary.classifier.auroc if summary.classifier else None,
    )
    return report


def load_report(out_dir: str, tolerance: float = 1e-12) -> ScoreReport:
    """Lê report.json e confere o resumo contra as linhas de scores.csv."""
    report = ScoreReport.parse_obj(art.read_json(art.artifact_path(out_dir, art.REPORT, required=True)))
    table = art.read_scores(art.artifact_path(out_dir, art.SCORES, required=True))
    target_tpr = float(report.config.get("target_id_tpr", 0.95))
    recomputed = summarize_scores(table, target_tpr, _score_variants(out_dir, table))

    def same(a, b) -> bool:
        if a is None or b is None:
            return a is None and b is None
        return all(abs(getattr(a, k) - getattr(b, k)) <= tolerance for k in ("auroc", "aupr", "fpr95"))

    pairs = [("tau_only", report.summary.tau_only, recomputed.tau_only), ("classifier", report.summary.classifier, recomputed.classifier)]
    pairs += [(f"baseline_{m}", report.summary.baselines.get(m), recomputed.baselines.get(m)) for m in recomputed.baselines]
    for name, stored, fresh in pairs:
        if not same(stored, fresh):
            raise ReportConsistencyError(f"{out_dir}: bloco '{name}' não bate com {art.SCORES}")
    return report


def run_stage(stage: str, cfg: RunConfig, out_dir: str, baseline: Optional[BaselineMode] = None):
    handlers = {
        "resonance": lambda: run_resonance(cfg, out_dir),
        "synthesize": lambda: run_synthesize(cfg, out_dir),
        "classify": lambda: run_classify(cfg, out_dir),
        "score": lambda: run_score(cfg, out_dir, baseline),
        "eval": lambda: run_eval(cfg, out_dir),
    }
    os.makedirs(out_dir, exist_ok=True)
    with LoggerContext(stage=stage, seed=cfg.seed, out_dir=out_dir):
        try:
            return handlers[stage]()
        except Exception as e:
            if hasattr(e, "with_stage"):
                e.with_stage(stage)
            raise


def run_pipeline(cfg: RunConfig, out_dir: str, baseline: Optional[BaselineMode] = None) -> ScoreReport:
    """Fases 1 a 4 em ordem, cada uma lendo do disco o que a anterior escreveu."""
    report = None
    for stage in STAGES:
        report = run_stage(stage, cfg, out_dir, baseline)
    return report
