from prometheus_client import Counter, Histogram, REGISTRY, write_to_textfile
from functools import wraps
import time

# Métricas gerais do pipeline
STAGE_RUNS_TOTAL = Counter(
    "rsl_stage_runs_total", "Total de execuções de etapas do pipeline", ["stage", "status"]
)

STAGE_DURATION = Histogram(
    "rsl_stage_duration_seconds",
    "Duração das etapas do pipeline",
    ["stage"],
    buckets=[0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 300.0],
)

STAGE_ERRORS_TOTAL = Counter(
    "rsl_stage_errors_total", "Total de erros ocorridos", ["type", "stage"]
)

EPOCHS_TOTAL = Counter(
    "rsl_epochs_total", "Total de épocas de gradiente executadas", ["phase"]
)

NODES_SCORED_TOTAL = Counter(
    "rsl_nodes_scored_total", "Total de nós pontuados", ["score"]
)


def track_stage(stage: str):
    """Decorador que mede a duração, a contagem e os erros de uma etapa do pipeline."""

    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.time()
            try:
                result = func(*args, **kwargs)
                STAGE_RUNS_TOTAL.labels(stage=stage, status="ok").inc()
                return result
            except Exception as e:
                STAGE_RUNS_TOTAL.labels(stage=stage, status="failed").inc()
                STAGE_ERRORS_TOTAL.labels(type=type(e).__name__, stage=stage).inc()
                raise
            finally:
                STAGE_DURATION.labels(stage=stage).observe(time.time() - start_time)

        return wrapper

    return decorator


def export_metrics(path: str) -> None:
    """Exporta o registro padrão no formato textfile do Prometheus."""
    write_to_textfile(path, REGISTRY)
