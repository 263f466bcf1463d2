import math
import os
from typing import List, NamedTuple, Optional, Tuple

import networkx as nx
import numpy as np

from errors import ConfigurationError, DimensionError, SplitError
from graph.graph import Graph, SplitMasks
from graph.io import (
    load_class_labels,
    load_flags,
    load_graph,
    load_splits,
    write_edges,
    write_features,
    write_flags,
    write_lines,
)
from logger import get_logger
from models.models import SbmSpec, ToySpec
from nn.layers import make_rng

logger = get_logger(__name__)


class Dataset(NamedTuple):
    graph: Graph
    masks: SplitMasks
    is_ood: np.ndarray  # verdade terrestre por nó (conhecidos são sempre False)
    class_labels: Optional[np.ndarray] = None  # classe ID por nó, -1 para OOD


def stratified_split(known_id: np.ndarray, wild: np.ndarray, is_ood_wild: np.ndarray, seed: int) -> SplitMasks:
    """Embaralha cada classe e envia o primeiro ⌈1/3⌉ para validação, o resto para teste."""
    wild = np.asarray(wild, dtype=np.int64)
    is_ood_wild = np.asarray(is_ood_wild, dtype=bool)
    if wild.size == 0:
        raise SplitError("conjunto selvagem vazio")
    if wild.shape != is_ood_wild.shape:
        raise DimensionError("rótulos OOD devem acompanhar os nós selvagens")
    rng = make_rng(seed)
    parts = {}
    for name, mask in (("in", ~is_ood_wild), ("out", is_ood_wild)):
        nodes = wild[mask]
        if nodes.size == 0:
            raise SplitError(f"classe '{name}' ausente entre os nós selvagens; a seleção de época exige as duas")
        shuffled = rng.permutation(nodes)
        n_val = math.ceil(nodes.size / 3)
        parts[f"val_{name}"] = np.sort(shuffled[:n_val])
        parts[f"test_{name}"] = np.sort(shuffled[n_val:])
    return SplitMasks(
        known_id=np.sort(np.asarray(known_id, dtype=np.int64)),
        wild=np.sort(wild),
        **parts,
    )


def make_toy_dataset(spec: ToySpec) -> Dataset:
    """Clusters gaussianos isotrópicos sem arestas: conhecidos ID, depois selvagens ID e OOD."""
    if spec.n_known < 1:
        raise ConfigurationError("toy: n_known deve ser >= 1")
    id_center = np.asarray(spec.id_center, dtype=np.float64)
    ood_center = np.asarray(spec.ood_center, dtype=np.float64)
    if spec.dim < 1 or id_center.size == 0 or ood_center.size == 0:
        raise DimensionError("toy: centros de comprimento zero")
    if id_center.size != spec.dim or ood_center.size != spec.dim:
        raise DimensionError(f"toy: centros devem ter comprimento {spec.dim}")

    rng = make_rng(spec.seed)
    known = id_center + spec.spread * rng.standard_normal((spec.n_known, spec.dim))
    wild_in = id_center + spec.spread * rng.standard_normal((spec.n_wild_in, spec.dim))
    wild_out = ood_center + spec.spread * rng.standard_normal((spec.n_wild_out, spec.dim))
    features = np.vstack([known, wild_in, wild_out])

    num_nodes = features.shape[0]
    is_ood = np.zeros(num_nodes, dtype=bool)
    is_ood[spec.n_known + spec.n_wild_in:] = True
    known_id = np.arange(spec.n_known)
    wild = np.arange(spec.n_known, num_nodes)
    masks = stratified_split(known_id, wild, is_ood[wild], spec.seed)
    graph = Graph.from_edges(num_nodes, [], features)
    logger.info("toy_dataset_generated", num_nodes=num_nodes, dim=spec.dim, seed=spec.seed)
    return Dataset(graph, masks, is_ood, np.where(is_ood, -1, 0))


def effective_probabilities(p_in: float, p_out: float, homophily_shift: float) -> Tuple[float, float]:
    """Ajusta (p_in, p_out): 0.5 mantém, < 0.5 remove homofilia, > 0.5 a reforça."""
    if homophily_shift < 0.5:
        u = (0.5 - homophily_shift) / 0.5
        mean = 0.5 * (p_in + p_out)
        return (1 - u) * p_in + u * mean, (1 - u) * p_out + u * mean
    u = (homophily_shift - 0.5) / 0.5
    return min(1.0, p_in + u * p_out), (1 - u) * p_out


def _validate_sbm(spec: SbmSpec) -> None:
    for name, value in (("p_in", spec.p_in), ("p_out", spec.p_out), ("homophily_shift", spec.homophily_shift)):
        if not 0.0 <= value <= 1.0:
            raise ConfigurationError(f"sbm: {name} deve estar em [0, 1], recebido {value}")
    if not 0.0 < spec.known_fraction < 1.0:
        raise ConfigurationError("sbm: known_fraction deve estar em (0, 1)")
    if len(spec.block_sizes) != len(spec.block_ood):
        raise ConfigurationError("sbm: block_sizes e block_ood devem ter o mesmo tamanho")
    if any(size < 0 for size in spec.block_sizes):
        raise ConfigurationError("sbm: tamanhos de bloco devem ser >= 0")
    if all(spec.block_ood) or not any(spec.block_ood):
        raise ConfigurationError("sbm: é preciso ao menos um bloco ID e um bloco OOD")
    if len(spec.centers) != len(spec.block_sizes):
        raise DimensionError("sbm: um centro por bloco")
    if any(len(center) != spec.dim for center in spec.centers):
        raise DimensionError(f"sbm: centros devem ter comprimento {spec.dim}")

def block_probabilities(num_blocks: int, p_in: float, p_out: float) -> List[List[float]]:
    """Matriz simétrica de probabilidades: p_in na diagonal, p_out fora dela."""
    return [[p_in if a == b else p_out for b in range(num_blocks)] for a in range(num_blocks)]


def sample_block_edges(block_sizes: List[int], p_in: float, p_out: float, rng: np.random.Generator) -> np.ndarray:
    """Sorteia as arestas do SBM; os nós seguem a ordem dos blocos."""
    probabilities = block_probabilities(len(block_sizes), p_in, p_out)
    sbm = nx.stochastic_block_model(
        list(block_sizes),
        probabilities,
        seed=int(rng.integers(2**32)),
        directed=False,
        selfloops=False,
    )
    edges = np.asarray(list(sbm.edges()), dtype=np.int64)
    return edges.reshape(-1, 2)


def id_block_labels(block_ood: List[bool]) -> np.ndarray:
    """Índice de classe ID de cada bloco (blocos OOD recebem -1)."""
    labels = np.full(len(block_ood), -1, dtype=np.int64)
    id_blocks = [block for block, block_is_ood in enumerate(block_ood) if not block_is_ood]
    labels[id_blocks] = np.arange(len(id_blocks))
    return labels


def make_sbm_dataset(spec: SbmSpec) -> Dataset:
    _validate_sbm(spec)
    p_in, p_out = effective_probabilities(spec.p_in, spec.p_out, spec.homophily_shift)
    rng = make_rng(spec.seed)

    edges = sample_block_edges(spec.block_sizes, p_in, p_out, rng)
    blocks = np.repeat(np.arange(len(spec.block_sizes)), spec.block_sizes)
    centers = np.asarray(spec.centers, dtype=np.float64)
    features = centers[blocks] + spec.spread * rng.standard_normal((blocks.size, spec.dim))
    is_ood = np.asarray(spec.block_ood, dtype=bool)[blocks]

    # 40% de cada bloco ID vira conhecido; o restante dos nós é selvagem
    known_parts = []
    for block, block_is_ood in enumerate(spec.block_ood):
        if block_is_ood:
            continue
        members = np.flatnonzero(blocks == block)
        n_known = int(round(spec.known_fraction * members.size))
        known_parts.append(rng.permutation(members)[:n_known])
    known_id = np.sort(np.concatenate(known_parts)) if known_parts else np.zeros(0, dtype=np.int64)
    wild = np.setdiff1d(np.arange(blocks.size), known_id)
    masks = stratified_split(known_id, wild, is_ood[wild], spec.seed)

    graph = Graph.from_edges(blocks.size, edges, features)
    logger.info(
        "sbm_dataset_generated",
        num_nodes=graph.num_nodes,
        num_edges=graph.num_edges,
        p_in=p_in,
        p_out=p_out,
        seed=spec.seed,
    )
    return Dataset(graph, masks, is_ood, id_block_labels(spec.block_ood)[blocks])


def dataset_from_files(
    edge_path: str,
    feature_path: str,
    split_path: str,
    flags_path: str,
    seed: int,
    label_path: Optional[str] = None,
) -> Dataset:
    """Carrega um conjunto exportado: splits `known|val|test|wild|none`, flags 0/1 e, opcionalmente, classes por nó."""
    graph = load_graph(edge_path, feature_path)
    labels = load_splits(split_path)
    is_ood = load_flags(flags_path)
    if labels.size != graph.num_nodes or is_ood.size != graph.num_nodes:
        raise DimensionError("splits e flags devem ter uma linha por nó")
    class_labels = None
    if label_path:
        class_labels = load_class_labels(label_path)
        if class_labels.size != graph.num_nodes:
            raise DimensionError("classes devem ter uma linha por nó")
    known_id = np.flatnonzero(labels == "known")
    if is_ood[known_id].any():
        raise SplitError("nós conhecidos devem ser ID")
    has_wild = (labels == "wild").any()
    has_explicit = np.isin(labels, ["val", "test"]).any()
    if has_wild and has_explicit:
        raise SplitError("use 'wild' ou 'val'/'test', não ambos")
    if has_wild:
        wild = np.flatnonzero(labels == "wild")
        return Dataset(graph, stratified_split(known_id, wild, is_ood[wild], seed), is_ood, class_labels)
    val = labels == "val"
    test = labels == "test"
    masks = SplitMasks(
        known_id=known_id,
        wild=np.flatnonzero(val | test),
        val_in=np.flatnonzero(val & ~is_ood),
        val_out=np.flatnonzero(val & is_ood),
        test_in=np.flatnonzero(test & ~is_ood),
        test_out=np.flatnonzero(test & is_ood),
    )
    return Dataset(graph, masks, is_ood, class_labels)


def write_dataset(out_dir: str, dataset: Dataset) -> None:
    os.makedirs(out_dir, exist_ok=True)
    graph, masks, is_ood, class_labels = dataset
    labels = np.full(graph.num_nodes, "none", dtype=object)
    labels[masks.known_id] = "known"
    labels[masks.val] = "val"
    labels[masks.test] = "test"
    write_edges(os.path.join(out_dir, "edges.txt"), graph.edge_list())
    write_features(os.path.join(out_dir, "features.csv"), graph.features)
    write_lines(os.path.join(out_dir, "splits.txt"), labels)
    write_flags(os.path.join(out_dir, "flags.txt"), is_ood)
    if class_labels is not None:
        write_lines(os.path.join(out_dir, "labels.txt"), (int(label) for label in class_labels))
    logger.info("dataset_written", out_dir=out_dir, num_nodes=graph.num_nodes)
