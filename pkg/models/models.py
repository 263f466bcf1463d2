from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Extra, Field, validator


def _parse_float_list(v: Any) -> Any:
    # Listas vêm do arquivo de configuração como "3,0,0"
    if isinstance(v, str):
        if not v.strip():
            return []
        return [float(p) for p in v.split(",")]
    return v


def _parse_int_list(v: Any) -> Any:
    if isinstance(v, str):
        if not v.strip():
            return []
        return [int(p) for p in v.split(",")]
    return v


def _parse_matrix(v: Any) -> Any:
    # Matrizes usam ";" entre linhas: "3,0;0,3"
    if isinstance(v, str):
        if not v.strip():
            return []
        return [[float(p) for p in row.split(",")] for row in v.split(";")]
    return v


def _parse_bool_list(v: Any) -> Any:
    if isinstance(v, str):
        return [p.strip().lower() in ("1", "true", "ood") for p in v.split(",") if p.strip()]
    return v


def _format_list(values: List[Any]) -> str:
    return ",".join(repr(float(x)) if isinstance(x, float) else str(int(x)) for x in values)


def _axis_vector(dim: int, axis: int, scale: float) -> List[float]:
    vector = [0.0] * dim
    if dim > axis:
        vector[axis] = scale
    return vector


class DatasetSource(str, Enum):
    TOY = "toy"
    SBM = "sbm"
    FILES = "files"


class TargetMode(str, Enum):
    SINGLE_RANDOM = "single_random"
    MULTI_RANDOM = "multi_random"
    ETF_BY_LABEL = "etf_by_label"


class StandardizeMode(str, Enum):
    NONE = "none"
    SCALE = "scale"
    ZSCORE = "zscore"


class BaselineMode(str, Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"
    MAHALANOBIS = "mahalanobis"


class ToySpec(BaseModel):
    n_known: int = Field(200, ge=0)
    n_wild_in: int = Field(200, ge=0)
    n_wild_out: int = Field(200, ge=0)
    dim: int = Field(8, ge=0)
    id_center: Optional[List[float]] = None
    ood_center: Optional[List[float]] = None
    spread: float = Field(1.0, ge=0.0)
    seed: int = 0

    class Config:
        extra = Extra.forbid

    _split_centers = validator("id_center", "ood_center", pre=True, allow_reuse=True)(
        _parse_float_list
    )

    @validator("id_center", always=True)
    @classmethod
    def default_id_center(cls, v: Optional[List[float]], values: Dict[str, Any]) -> List[float]:
        # Centros ortogonais: separação de 3·√2 ≈ 4.2 desvios entre os clusters
        if v is None:
            return _axis_vector(values.get("dim", 0), 0, 3.0)
        return v

    @validator("ood_center", always=True)
    @classmethod
    def default_ood_center(cls, v: Optional[List[float]], values: Dict[str, Any]) -> List[float]:
        if v is None:
            return _axis_vector(values.get("dim", 0), 1, 3.0)
        return v


class SbmSpec(BaseModel):
    block_sizes: List[int] = Field(default_factory=lambda: [200, 200, 200])
    block_ood: List[bool] = Field(default_factory=lambda: [False, False, True])
    dim: int = Field(8, ge=1)
    centers: Optional[List[List[float]]] = None
    p_in: float = 0.05
    p_out: float = 0.005
    spread: float = Field(1.0, ge=0.0)
    homophily_shift: float = 0.5
    known_fraction: float = 0.4
    seed: int = 0

    class Config:
        extra = Extra.forbid

    _split_sizes = validator("block_sizes", pre=True, allow_reuse=True)(_parse_int_list)
    _split_flags = validator("block_ood", pre=True, allow_reuse=True)(_parse_bool_list)
    _split_centers = validator("centers", pre=True, allow_reuse=True)(_parse_matrix)

    @validator("centers", always=True)
    @classmethod
    def default_centers(cls, v: Optional[List[List[float]]], values: Dict[str, Any]) -> List[List[float]]:
        # Por padrão cada bloco ID ocupa um eixo e os blocos OOD ficam na origem
        if v is not None:
            return v
        dim = values.get("dim", 8)
        centers = []
        axis = 0
        for is_ood in values.get("block_ood", []):
            if is_ood:
                centers.append([0.0] * dim)
            else:
                centers.append(_axis_vector(dim, axis, 3.0))
                axis += 1
        return centers


class TargetSpec(BaseModel):
    mode: TargetMode = TargetMode.SINGLE_RANDOM
    num_targets: int = Field(1, ge=1)
    dim: int = Field(16, ge=1)
    seed: int = 0
    labels: Optional[List[int]] = None

    class Config:
        extra = Extra.forbid
        use_enum_values = False


class CandidateConfig(BaseModel):
    n: int = Field(2, ge=1)

    class Config:
        extra = Extra.forbid


class SynthConfig(BaseModel):
    count: Optional[int] = Field(None, ge=0)
    steps: int = Field(20, ge=0)
    step_size: float = Field(1.0, gt=0.0)
    lam: float = Field(0.5, ge=0.0, le=1.0, alias="lambda")
    noise_std: float = Field(0.01, ge=0.0)
    knn_k: int = Field(5, ge=1)
    seed: int = 0

    class Config:
        extra = Extra.forbid
        allow_population_by_field_name = True


class RunConfig(BaseModel):
    """Configuração plana de uma execução; as chaves espelham o arquivo key = value."""

    dataset: DatasetSource = DatasetSource.TOY
    seed: int = 0
    preset: Optional[str] = None
    output_dir: Optional[str] = None

    edge_path: Optional[str] = None
    feature_path: Optional[str] = None
    split_path: Optional[str] = None
    flags_path: Optional[str] = None
    label_path: Optional[str] = None

    toy_n_known: int = Field(200, ge=0)
    toy_n_wild_in: int = Field(200, ge=0)
    toy_n_wild_out: int = Field(200, ge=0)
    toy_dim: int = Field(8, ge=0)
    toy_id_center: Optional[List[float]] = None
    toy_ood_center: Optional[List[float]] = None
    toy_spread: float = Field(1.0, ge=0.0)

    sbm_block_sizes: List[int] = Field(default_factory=lambda: [200, 200, 200])
    sbm_block_ood: List[bool] = Field(default_factory=lambda: [False, False, True])
    sbm_centers: Optional[List[List[float]]] = None
    sbm_dim: int = Field(8, ge=1)
    sbm_p_in: float = 0.05
    sbm_p_out: float = 0.005
    sbm_spread: float = Field(1.0, ge=0.0)
    sbm_homophily_shift: float = Field(0.5, ge=0.0, le=1.0)
    sbm_known_fraction: float = Field(0.4, gt=0.0, lt=1.0)

    resonance_lr: float = Field(0.005, gt=0.0)
    resonance_epochs: int = Field(200, ge=1)
    resonance_dim: int = Field(16, ge=1)
    target_mode: TargetMode = TargetMode.SINGLE_RANDOM
    num_targets: int = Field(1, ge=1)
    propagation_hops: int = Field(2, ge=0)
    raw_features: bool = False
    standardize: StandardizeMode = StandardizeMode.SCALE
    target_id_tpr: float = Field(0.95, gt=0.0, le=1.0)
    window_width: int = Field(10, ge=1)
    diagnostics: bool = False

    candidates_n: int = Field(2, ge=1)

    synth_count: Optional[int] = Field(None, ge=0)
    synth_steps: int = Field(20, ge=0)
    synth_step_size: float = Field(1.0, gt=0.0)
    synth_lambda: float = Field(0.5, ge=0.0, le=1.0)
    synth_noise_std: float = Field(0.01, ge=0.0)
    synth_knn_k: int = Field(5, ge=1)

    classifier_epochs: int = Field(200, ge=0)
    classifier_lr: float = Field(0.005, gt=0.0)
    classifier_dropout: float = Field(0.1, ge=0.0, lt=1.0)
    classifier_hidden: int = Field(16, ge=1)
    classifier_layers: int = Field(2, ge=1)

    baseline: Optional[BaselineMode] = None

    class Config:
        extra = Extra.forbid

    _float_lists = validator("toy_id_center", "toy_ood_center", pre=True, allow_reuse=True)(
        _parse_float_list
    )
    _int_lists = validator("sbm_block_sizes", pre=True, allow_reuse=True)(_parse_int_list)
    _bool_lists = validator("sbm_block_ood", pre=True, allow_reuse=True)(_parse_bool_list)
    _matrices = validator("sbm_centers", pre=True, allow_reuse=True)(_parse_matrix)

    @validator("preset", "baseline", "synth_count", "output_dir", "label_path", pre=True)
    @classmethod
    def empty_as_none(cls, v: Any) -> Any:
        if isinstance(v, str) and v.strip().lower() in ("", "none"):
            return None
        return v

    @validator("edge_path", "feature_path", "split_path", "flags_path", always=True)
    @classmethod
    def files_require_paths(cls, v: Optional[str], values: Dict[str, Any], field) -> Optional[str]:
        if values.get("dataset") == DatasetSource.FILES and not v:
            raise ValueError(f"{field.name} é obrigatório quando dataset = files")
        return v

    def toy_spec(self) -> ToySpec:
        return ToySpec(
            n_known=self.toy_n_known,
            n_wild_in=self.toy_n_wild_in,
            n_wild_out=self.toy_n_wild_out,
            dim=self.toy_dim,
            id_center=self.toy_id_center,
            ood_center=self.toy_ood_center,
            spread=self.toy_spread,
            seed=self.seed,
        )

    def sbm_spec(self) -> SbmSpec:
        return SbmSpec(
            block_sizes=self.sbm_block_sizes,
            block_ood=self.sbm_block_ood,
            centers=self.sbm_centers,
            dim=self.sbm_dim,
            p_in=self.sbm_p_in,
            p_out=self.sbm_p_out,
            spread=self.sbm_spread,
            homophily_shift=self.sbm_homophily_shift,
            known_fraction=self.sbm_known_fraction,
            seed=self.seed,
        )

    def target_spec(self, labels: Optional[List[int]] = None) -> TargetSpec:
        return TargetSpec(
            mode=self.target_mode,
            num_targets=self.num_targets,
            dim=self.resonance_dim,
            seed=self.seed + 1,
            labels=labels,
        )

    def candidate_config(self) -> CandidateConfig:
        return CandidateConfig(n=self.candidates_n)

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            count=self.synth_count,
            steps=self.synth_steps,
            step_size=self.synth_step_size,
            lam=self.synth_lambda,
            noise_std=self.synth_noise_std,
            knn_k=self.synth_knn_k,
            seed=self.seed + 3,
        )

    def echo(self) -> Dict[str, str]:
        """Devolve o dicionário plano key -> value que reproduz esta execução."""
        echoed: Dict[str, str] = {}
        for key, value in self.dict().items():
            if value is None:
                continue
            if isinstance(value, Enum):
                echoed[key] = value.value
            elif isinstance(value, bool):
                echoed[key] = "true" if value else "false"
            elif key == "sbm_block_ood":
                echoed[key] = ",".join("1" if flag else "0" for flag in value)
            elif key == "sbm_centers":
                echoed[key] = ";".join(_format_list(row) for row in value)
            elif isinstance(value, list):
                echoed[key] = _format_list(value)
            elif isinstance(value, float):
                echoed[key] = repr(value)
            else:
                echoed[key] = str(value)
        return echoed


class MetricBlock(BaseModel):
    auroc: float = Field(..., ge=0.0, le=1.0)
    aupr: float = Field(..., ge=0.0, le=1.0)
    fpr95: float = Field(..., ge=0.0, le=1.0)


class ScoreSummary(BaseModel):
    t_star: Optional[int] = None
    gamma: Optional[float] = None
    gamma_prime: Optional[float] = None
    candidate_threshold: Optional[float] = None
    best_epoch: Optional[int] = None
    tau_only: Optional[MetricBlock] = None
    classifier: Optional[MetricBlock] = None
    baselines: Dict[str, MetricBlock] = Field(default_factory=dict)
    score_variants: Dict[str, MetricBlock] = Field(default_factory=dict)


class ScoreReport(BaseModel):
    schema_version: int = 1
    seed: Optional[int] = None
    summary: ScoreSummary
    config: Dict[str, str] = Field(default_factory=dict)
