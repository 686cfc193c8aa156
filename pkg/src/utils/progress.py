"""Progress display for long cohort operations (stderr, so stdout stays clean)."""

from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Iterator, TypeVar

from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn

T = TypeVar("T")


console = Console(stderr=True)


@contextmanager
def spinner(message: str) -> Iterator[None]:
    with Progress(
        SpinnerColumn(),
        TextColumn("[bold blue]{task.description}"),
        TimeElapsedColumn(),
        transient=True,
        console=console,
    ) as progress:
        task_id = progress.add_task(message, total=None)
        try:
            yield
        finally:
            progress.update(task_id, completed=1)


def track_iter(iterable: Iterable[T], description: str | None = None, total: int | None = None) -> Iterator[T]:
    desc = description or "Processing"
    if total is None and hasattr(iterable, "__len__"):
        total = len(iterable)  # type: ignore[arg-type]
    with Progress(
        SpinnerColumn(),
        TextColumn("[bold blue]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        transient=True,
        console=console,
    ) as progress:
        task_id = progress.add_task(desc, total=total)
        for item in iterable:
            yield item
            progress.advance(task_id)
