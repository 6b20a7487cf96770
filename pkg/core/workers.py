"""
core/workers.py — Pool de threads nomeadas com resultados em ordem de entrada.

Usado por encode, detect e pelo cálculo de gradientes por amostra no treino.
A ordem do resultado nunca depende de --jobs.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from core.errors import ConfigError

T = TypeVar("T")
R = TypeVar("R")

THREAD_PREFIX = "SkelBox"


def map_ordered(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1,
                name: str = "Worker") -> list[R]:
    """Aplica `fn` a cada item; jobs=1 roda na thread atual."""
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    items = list(items)
    if jobs == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(jobs, len(items)),
                            thread_name_prefix=f"{THREAD_PREFIX}-{name}") as pool:
        # map() preserva a ordem e relança a primeira exceção
        return list(pool.map(fn, items))
