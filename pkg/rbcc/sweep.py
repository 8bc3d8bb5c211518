"""Tabular sweep results and the ordered parallel map behind every sweep."""

from __future__ import annotations

from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import Any, TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from rbcc.events import SWEEP_POINT_DONE, event_bus

T = TypeVar("T")
R = TypeVar("R")


class SweepResult(BaseModel):
    """One table per experiment: an axis column plus metric columns with units.

    ``group`` names an optional column that splits the rows into independent
    curves (the BER rates); the axis is strictly monotone within each group.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    axis: str
    columns: dict[str, np.ndarray]
    units: dict[str, str]
    meta: dict[str, Any] = Field(default_factory=dict)
    group: str | None = None

    @model_validator(mode="after")
    def _consistent(self) -> SweepResult:
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"{self.name}: columns of unequal length {sorted(lengths)}")
        missing = set(self.columns) - set(self.units)
        if missing:
            raise ValueError(f"{self.name}: columns without units: {sorted(missing)}")
        if self.axis not in self.columns:
            raise ValueError(f"{self.name}: axis column {self.axis!r} missing")
        for rows in self._groups():
            values = self.columns[self.axis][rows]
            if np.any(np.diff(values) <= 0):
                raise ValueError(f"{self.name}: axis {self.axis!r} not strictly increasing")
        return self

    def _groups(self) -> list[np.ndarray]:
        n = len(self)
        if self.group is None:
            return [np.arange(n)]
        keys = self.columns[self.group]
        return [np.flatnonzero(keys == k) for k in dict.fromkeys(keys.tolist())]

    def __len__(self) -> int:
        return len(self.columns[self.axis])

    def __getitem__(self, column: str) -> np.ndarray:
        return self.columns[column]

    def to_frame(self) -> pd.DataFrame:
        """Frame whose headers carry units, e.g. ``pump_power[W]``."""
        return pd.DataFrame(
            {f"{name}[{self.units[name]}]": values for name, values in self.columns.items()}
        )


def run_points(
    fn: Callable[[T], R],
    items: Iterable[T],
    jobs: int = 1,
    experiment: str = "",
) -> list[R]:
    """Map fn over items, in item order, on up to ``jobs`` worker processes.

    fn must be picklable (module-level function or functools.partial) when
    jobs > 1. A SWEEP_POINT_DONE event is emitted per finished item.
    """
    items = list(items)
    total = len(items)
    results: list[R] = []

    if jobs <= 1 or total <= 1:
        mapped: Iterable[R] = map(fn, items)
        for index, result in enumerate(mapped, start=1):
            results.append(result)
            event_bus.emit(SWEEP_POINT_DONE, experiment=experiment, index=index, total=total)
        return results

    with ProcessPoolExecutor(max_workers=min(jobs, total)) as pool:
        for index, result in enumerate(pool.map(fn, items), start=1):
            results.append(result)
            event_bus.emit(SWEEP_POINT_DONE, experiment=experiment, index=index, total=total)
    return results
