"""Leitura e escrita dos artefatos de cada etapa no diretório de saída."""

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from errors import ChecksumError, DependencyError, ParseError, RslError, ShapeError
from logger import get_logger

logger = get_logger(__name__)

MODEL_HEADER = "# rsl-energy-model v1"
FAILED_MARKER = "FAILED"

RESONANCE_TRACE = "resonance_trace.csv"
RESONANCE_METRICS = "resonance_metrics.csv"
RESONANCE_SUMMARY = "resonance.json"
CANDIDATES = "candidates.csv"
TRAJECTORY_SCORES = "trajectory_scores.csv"
GRADIENT_PROJECTION = "gradient_projection.csv"
SYNTHETIC_FEATURES = "synthetic_features.csv"
SYNTHETIC_EDGES = "synthetic_edges.txt"
ENERGY_MODEL = "energy_model.txt"
CLASSIFIER_METRICS = "classifier_metrics.csv"
CLASSIFIER_SUMMARY = "classifier.json"
SCORES = "scores.csv"
REPORT = "report.json"


def fmt(value: float) -> str:
    """Representação mais curta que relê o mesmo float."""
    return repr(float(value))


def artifact_path(out_dir: str, name: str, required: bool = False) -> str:
    path = os.path.join(out_dir, name)
    if required and not os.path.exists(path):
        raise DependencyError(path)
    return path


def write_table(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_table(path: str) -> Dict[str, List[str]]:
    """CSV com cabeçalho em colunas nomeadas."""
    if not os.path.exists(path):
        raise DependencyError(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header:
            raise ParseError(path, 1, "cabeçalho ausente")
        header = [name.strip() for name in header]
        columns: Dict[str, List[str]] = {name: [] for name in header}
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(path, line_number, f"esperadas {len(header)} colunas, encontradas {len(row)}")
            for name, cell in zip(header, row):
                columns[name].append(cell.strip())
    return columns


def float_column(columns: Dict[str, List[str]], name: str, path: str) -> np.ndarray:
    try:
        return np.asarray([float(v) for v in columns[name]], dtype=np.float64)
    except KeyError:
        raise ParseError(path, 1, f"coluna '{name}' ausente")
    except ValueError as e:
        raise ParseError(path, 0, f"coluna '{name}': {e}")


def int_column(columns: Dict[str, List[str]], name: str, path: str) -> np.ndarray:
    try:
        return np.asarray([int(v) for v in columns[name]], dtype=np.int64)
    except KeyError:
        raise ParseError(path, 1, f"coluna '{name}' ausente")
    except ValueError as e:
        raise ParseError(path, 0, f"coluna '{name}': {e}")


def write_json(path: str, payload: Dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def read_json(path: str) -> Dict:
    if not os.path.exists(path):
        raise DependencyError(path)
    with open(path, encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(path, e.lineno, e.msg)


def save_model(path: str, params: Dict[str, np.ndarray]) -> str:
    """Snapshot textual: cabeçalho, sha256 do conteúdo e cada tensor em linhas `%.17g`."""
    lines: List[str] = []
    for name in sorted(params):
        matrix = np.atleast_2d(np.asarray(params[name], dtype=np.float64))
        lines.append(f"tensor {name} {matrix.shape[0]} {matrix.shape[1]}\n")
        for row in matrix:
            lines.append(" ".join("%.17g" % v for v in row) + "\n")
    payload = "".join(lines)
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"{MODEL_HEADER}\nsha256 {digest}\n{payload}")
    return digest


def load_model(path: str) -> Dict[str, np.ndarray]:
    if not os.path.exists(path):
        raise DependencyError(path)
    with open(path, encoding="utf-8", newline="") as f:
        text = f.read()
    head, _, rest = text.partition("\n")
    if head != MODEL_HEADER:
        raise ShapeError(f"{path}: cabeçalho inesperado {head!r}")
    digest_line, _, payload = rest.partition("\n")
    if not digest_line.startswith("sha256 "):
        raise ShapeError(f"{path}: linha de checksum ausente")
    if hashlib.sha256(payload.encode("utf-8")).hexdigest() != digest_line.split(" ", 1)[1].strip():
        raise ChecksumError(f"{path}: checksum não confere")

    params: Dict[str, np.ndarray] = {}
    lines = payload.splitlines()
    index = 0
    while index < len(lines):
        parts = lines[index].split()
        if len(parts) != 4 or parts[0] != "tensor":
            raise ShapeError(f"{path}: declaração de tensor inválida na linha {index + 3}")
        name, rows, cols = parts[1], int(parts[2]), int(parts[3])
        block = lines[index + 1:index + 1 + rows]
        if len(block) != rows:
            raise ShapeError(f"{path}: tensor '{name}' declara {rows} linhas, encontradas {len(block)}")
        values = [[float(v) for v in line.split()] for line in block]
        if any(len(row) != cols for row in values):
            raise ShapeError(f"{path}: tensor '{name}' com linhas de largura diferente de {cols}")
        params[name] = np.asarray(values, dtype=np.float64).reshape(rows, cols)
        index += 1 + rows
    return params


@dataclass
class ScoreTable:
    """Linhas de scores.csv como colunas."""

    node: np.ndarray
    is_ood: np.ndarray
    split: Optional[np.ndarray] = None
    tau: Optional[np.ndarray] = None
    energy: Optional[np.ndarray] = None
    baselines: Dict[str, np.ndarray] = field(default_factory=dict)
    tau_flag: Optional[np.ndarray] = None
    energy_flag: Optional[np.ndarray] = None

    def rows_in(self, split: str) -> np.ndarray:
        """Máscara das linhas de um split; sem a coluna, todas as linhas."""
        if self.split is None:
            return np.ones(self.node.size, dtype=bool)
        return self.split == split


def write_scores(path: str, table: ScoreTable) -> None:
    header = ["node", "split", "is_ood", "tau", "energy"]
    header += [f"baseline_{mode}" for mode in table.baselines]
    header += ["tau_flag", "energy_flag"]
    rows = []
    for i in range(table.node.size):
        row = [str(int(table.node[i])), table.split[i], str(int(table.is_ood[i])), fmt(table.tau[i]), fmt(table.energy[i])]
        row += [fmt(scores[i]) for scores in table.baselines.values()]
        row += [str(int(table.tau_flag[i])), str(int(table.energy_flag[i]))]
        rows.append(row)
    write_table(path, header, rows)


def read_scores(path: str) -> ScoreTable:
    columns = read_table(path)
    table = ScoreTable(node=int_column(columns, "node", path), is_ood=int_column(columns, "is_ood", path).astype(bool))
    if "split" in columns:
        table.split = np.asarray(columns["split"], dtype=object)
    for name in ("tau", "energy"):
        if name in columns:
            setattr(table, name, float_column(columns, name, path))
    for name in ("tau_flag", "energy_flag"):
        if name in columns:
            setattr(table, name, int_column(columns, name, path))
    table.baselines = {
        name[len("baseline_"):]: float_column(columns, name, path) for name in columns if name.startswith("baseline_")
    }
    return table


def write_failed_marker(out_dir: str, error: RslError) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, FAILED_MARKER), "w", encoding="utf-8") as f:
        f.write(f"stage: {error.stage or '-'}\n")
        f.write(f"error: {type(error).__name__}\n")
        f.write(f"message: {error.message}\n")
    logger.warning("failed_marker_written", out_dir=out_dir, stage=error.stage)


def clear_failed_marker(out_dir: str) -> None:
    path = os.path.join(out_dir, FAILED_MARKER)
    if os.path.exists(path):
        os.remove(path)
