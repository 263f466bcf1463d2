#!/usr/bin/env python3
import os
from dataclasses import dataclass, field
from typing import Dict, Optional

import pydantic
from dotenv import dotenv_values, load_dotenv

from errors import ConfigurationError
from models.models import RunConfig

# Carrega as variáveis de ambiente
load_dotenv()


@dataclass
class RuntimeConfig:
    output_dir: str = field(default_factory=lambda: os.getenv("RSL_OUTPUT_DIR", "runs"))
    single_thread: bool = field(
        default_factory=lambda: os.getenv("RSL_SINGLE_THREAD", "false").lower() == "true"
    )
    debug: bool = field(default_factory=lambda: os.getenv("DEBUG", "false").lower() == "true")
    log_level: str = field(default_factory=lambda: os.getenv("LOG_LEVEL", "INFO"))
    metrics_filename: str = "metrics.prom"


runtime_config = RuntimeConfig()

# Valores compartilhados por todos os conjuntos de dados (hidden 16, dropout 0.1, λ 0.5, 1 camada na cabeça, 2 na GCN)
_SHARED_PRESET = {
    "resonance_dim": "16",
    "classifier_hidden": "16",
    "classifier_layers": "2",
    "classifier_dropout": "0.1",
    "synth_lambda": "0.5",
}


def _preset(lr: str, n: str) -> Dict[str, str]:
    return {**_SHARED_PRESET, "resonance_lr": lr, "classifier_lr": lr, "candidates_n": n}


HYPERPARAMETER_PRESETS: Dict[str, Dict[str, str]] = {
    "squirrel": _preset("0.005", "2"),
    "wikics": _preset("0.01", "1"),
    "yelpchi": _preset("0.005", "2"),
    "amazon": _preset("0.005", "2"),
    "reddit": _preset("0.01", "1"),
    "cora": _preset("0.005", "10"),
    "citeseer": _preset("0.005", "10"),
    "pubmed": _preset("0.01", "5"),
    "chameleon": _preset("0.005", "2"),
}


def _describe(error: pydantic.ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in item['loc'])}: {item['msg']}" for item in error.errors()
    )


def build_run_config(values: Dict[str, Optional[str]], overrides: Optional[Dict[str, object]] = None) -> RunConfig:
    """Valida um dicionário plano key -> value; preset primeiro, depois o arquivo, depois a CLI."""
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise ConfigurationError(f"chaves sem valor: {', '.join(missing)}")

    merged: Dict[str, object] = {}
    preset = (values.get("preset") or "").strip().lower()
    if preset and preset != "none":
        if preset not in HYPERPARAMETER_PRESETS:
            raise ConfigurationError(
                f"preset desconhecido '{preset}'; opções: {', '.join(sorted(HYPERPARAMETER_PRESETS))}"
            )
        merged.update(HYPERPARAMETER_PRESETS[preset])
    merged.update(values)
    merged.update({key: value for key, value in (overrides or {}).items() if value is not None})

    try:
        return RunConfig(**merged)
    except pydantic.ValidationError as e:
        raise ConfigurationError(f"configuração inválida: {_describe(e)}")


def load_run_config(path: Optional[str], overrides: Optional[Dict[str, object]] = None) -> RunConfig:
    values: Dict[str, Optional[str]] = {}
    if path:
        if not os.path.isfile(path):
            raise ConfigurationError(f"arquivo de configuração não encontrado: {path}")
        values = dict(dotenv_values(path, interpolate=False))
    return build_run_config(values, overrides)
