"""
core/errors.py — Hierarquia de exceções do SkelBox.

Toda falha "esperada" (arquivo malformado, config inválida, shapes
incompatíveis) é uma SkelBoxError. O CLI traduz:
  SkelBoxError → exit code 1
  OSError      → exit code 2
"""
from typing import Optional


class SkelBoxError(Exception):
    """Raiz de todos os erros de domínio."""


class ValidationError(SkelBoxError):
    """Entrada semanticamente inválida. Guarda a linha quando vem de arquivo."""

    def __init__(self, message: str, line_no: Optional[int] = None) -> None:
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class ParseError(ValidationError):
    """Linha de arquivo que não pôde ser interpretada."""


class ConfigError(ValidationError):
    """Configuração inválida (chave desconhecida, faixa inconsistente...)."""


class ShapeError(ValidationError):
    """Shapes de tensores incompatíveis."""

    def __init__(self, message: str, *shapes: tuple) -> None:
        if shapes:
            message = f"{message} ({' vs '.join(str(tuple(s)) for s in shapes)})"
        super().__init__(message)


class DegenerateStatsError(ValidationError):
    """c_max == c_min: a mapeamento global dividiria por zero."""


class EmptyDatasetError(ValidationError):
    """Nenhuma articulação presente no conjunto."""


class TrainingError(SkelBoxError):
    """Treino divergiu (loss não finita)."""

    def __init__(self, message: str, epoch: int, batch: int) -> None:
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"epoch {epoch}, batch {batch}: {message}")
