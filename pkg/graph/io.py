import csv
import os
from typing import List, Tuple

import numpy as np

from errors import BoundsError, DependencyError, ParseError, ValidationError
from graph.graph import Graph
from logger import get_logger

logger = get_logger(__name__)

SPLIT_LABELS = ("known", "val", "test", "wild", "none")


def _require(path: str) -> None:
    if not os.path.exists(path):
        raise DependencyError(path)


def read_matrix_csv(path: str) -> np.ndarray:
    """Lê um CSV sem cabeçalho de reais, uma linha por nó."""
    _require(path)
    rows: List[List[float]] = []
    with open(path, newline="", encoding="utf-8") as f:
        for line_number, row in enumerate(csv.reader(f), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise ParseError(path, line_number, f"valor não numérico em {row!r}")
            if rows and len(values) != len(rows[0]):
                raise ParseError(path, line_number, f"esperadas {len(rows[0])} colunas, encontradas {len(values)}")
            if not all(np.isfinite(values)):
                raise ValidationError(f"{path}:{line_number}: atributo não finito")
            rows.append(values)
    if not rows:
        return np.zeros((0, 0))
    return np.asarray(rows, dtype=np.float64)


def read_edge_list(path: str, num_nodes: int) -> List[Tuple[int, int]]:
    _require(path)
    edges: List[Tuple[int, int]] = []
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ParseError(path, line_number, f"esperado par de inteiros, recebido {line.strip()!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(path, line_number, f"índices não inteiros em {line.strip()!r}")
            if min(i, j) < 0 or max(i, j) >= num_nodes:
                raise BoundsError(f"{path}:{line_number}: aresta ({i}, {j}) fora de [0, {num_nodes})")
            edges.append((i, j))
    return edges


def load_graph(edge_path: str, feature_path: str) -> Graph:
    features = read_matrix_csv(feature_path)
    num_nodes = features.shape[0]
    edges = read_edge_list(edge_path, num_nodes)
    graph = Graph.from_edges(num_nodes, edges, features)
    logger.info(
        "graph_loaded",
        num_nodes=graph.num_nodes,
        num_edges=graph.num_edges,
        feature_dim=graph.features.shape[1] if num_nodes else 0,
    )
    return graph


def _read_lines(path: str) -> List[str]:
    _require(path)
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def load_flags(path: str) -> np.ndarray:
    """Um rótulo 0/1 por linha (1 = OOD)."""
    flags = []
    for line_number, value in enumerate(_read_lines(path), start=1):
        if value not in ("0", "1"):
            raise ParseError(path, line_number, f"rótulo deve ser 0 ou 1, recebido {value!r}")
        flags.append(value == "1")
    return np.asarray(flags, dtype=bool)


def load_class_labels(path: str) -> np.ndarray:
    """Um inteiro por linha: classe ID (>= 0) ou -1 para nós sem classe."""
    values = []
    for line_number, value in enumerate(_read_lines(path), start=1):
        try:
            label = int(value)
        except ValueError:
            raise ParseError(path, line_number, f"classe deve ser inteira, recebido {value!r}")
        if label < -1:
            raise ParseError(path, line_number, f"classe deve ser >= -1, recebido {label}")
        values.append(label)
    return np.asarray(values, dtype=np.int64)


def load_splits(path: str) -> np.ndarray:
    labels = _read_lines(path)
    for line_number, value in enumerate(labels, start=1):
        if value not in SPLIT_LABELS:
            raise ParseError(path, line_number, f"split deve ser um de {SPLIT_LABELS}, recebido {value!r}")
    return np.asarray(labels, dtype=object)


def write_lines(path: str, values) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for value in values:
            f.write(f"{value}\n")


def write_flags(path: str, flags: np.ndarray) -> None:
    write_lines(path, ("1" if flag else "0" for flag in flags))


def write_edges(path: str, edges: np.ndarray) -> None:
    write_lines(path, (f"{int(i)} {int(j)}" for i, j in np.asarray(edges).reshape(-1, 2)))


def write_features(path: str, features: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, quoting=csv.QUOTE_MINIMAL, delimiter=",")
        for row in np.asarray(features):
            writer.writerow([repr(float(v)) for v in row])
    logger.debug("features_written", path=path, rows=len(features))
