from typing import Optional


class RslError(Exception):
    """Erro base do pipeline. Cada subclasse define o código de saída da CLI."""

    exit_code = 1

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def with_stage(self, stage: str) -> "RslError":
        if self.stage is None:
            self.stage = stage
        return self

    def __str__(self) -> str:
        if self.stage:
            return f"[{self.stage}] {self.message}"
        return self.message


class ConfigurationError(RslError, ValueError):
    exit_code = 2


class DependencyError(RslError, FileNotFoundError):
    """Artefato de uma etapa anterior ausente no diretório de saída."""

    exit_code = 3

    def __init__(self, missing_path: str, stage: Optional[str] = None):
        super().__init__(f"artefato obrigatório ausente: {missing_path}", stage)
        self.missing_path = missing_path


class DataError(RslError, ValueError):
    exit_code = 4


class ParseError(DataError):
    def __init__(self, path: str, line_number: int, detail: str):
        super().__init__(f"{path}:{line_number}: {detail}")
        self.path = path
        self.line_number = line_number


class BoundsError(DataError):
    pass


class ValidationError(DataError):
    pass


class DimensionError(DataError):
    pass


class SplitError(DataError):
    pass


class SelectionError(DataError):
    pass


class MetricError(DataError):
    pass


class UndefinedProjectionError(DataError):
    pass


class UndefinedSimilarityError(DataError):
    pass


class ChecksumError(DataError):
    pass


class ShapeError(DataError):
    pass


class ReportConsistencyError(DataError):
    pass


class ForwardCacheError(RslError, RuntimeError):
    exit_code = 4


class NumericalError(RslError, ArithmeticError):
    exit_code = 5
