"""Life tables, discrete survivor curves, median lifetime and hazard smoothing."""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .exceptions import BadBandwidth, EmptySpells, MedianUndefined, ValidationError
from .panel import Dataset, SponsorshipSpell, _read_text


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SurvivorCurve:
    """Survivor values on the integer period grid ``0, 1, ..., T``."""

    periods: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        periods = _frozen(self.periods, np.int64)
        values = _frozen(self.values, float)
        if periods.shape != values.shape or periods.ndim != 1 or len(periods) == 0:
            raise ValidationError("periods and values must be equal-length 1-d arrays")
        if periods[0] != 0 or np.any(np.diff(periods) != 1):
            raise ValidationError("a survivor curve runs over consecutive periods from 0")
        if np.any((values < 0) | (values > 1)) or np.any(np.isnan(values)):
            raise ValidationError("survivor values must lie in [0, 1]")
        if np.any(np.diff(values) > 1e-12):
            raise ValidationError("survivor values must be non-increasing")
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values: Iterable[float]) -> SurvivorCurve:
        """Curve from ``S(0), S(1), ...``; a leading 1.0 is added when absent."""
        values = [float(v) for v in values]
        if not values or values[0] != 1.0:
            values = [1.0] + values
        return cls(np.arange(len(values)), np.asarray(values))

    @property
    def horizon(self) -> int:
        return int(self.periods[-1])

    def __call__(self, t: int) -> float:
        """S(t); beyond the last period the final value is carried forward."""
        if t < 0:
            raise ValidationError("period must be non-negative")
        return float(self.values[min(int(t), len(self.values) - 1)])

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(p), float(v)) for p, v in zip(self.periods, self.values)]


@dataclass(frozen=True, eq=False)
class LifeTable:
    """Per-period risk counts, events, censorings, hazards and survivor values.

    Period ``j`` covers the interval ``[j, j + 1)`` of tenure in years. Spells
    censored at the end of a period remain in that period's risk set.
    """

    periods: np.ndarray
    beginning: np.ndarray
    ended: np.ndarray
    censored: np.ndarray

    def __post_init__(self):
        for name in ("periods", "beginning", "ended", "censored"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.int64))
        if np.any(self.beginning[1:] != self.beginning[:-1] - self.ended[:-1] - self.censored[:-1]):
            raise ValidationError("risk counts violate beginning(j+1) = beginning(j) - ended(j) - censored(j)")
        if np.any(self.ended + self.censored > self.beginning):
            raise ValidationError("more exits than spells at risk")

    @property
    def hazard(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            h = np.where(self.beginning > 0, self.ended / np.maximum(self.beginning, 1), 0.0)
        return h

    @property
    def survivor(self) -> np.ndarray:
        return np.cumprod(1.0 - self.hazard)

    @property
    def overall_hazard(self) -> float:
        total = int(self.beginning.sum())
        return float(self.ended.sum() / total) if total else 0.0

    @property
    def curve(self) -> SurvivorCurve:
        return SurvivorCurve(
            np.arange(len(self.periods) + 1), np.concatenate(([1.0], self.survivor))
        )

    def __len__(self) -> int:
        return len(self.periods)

    def rows(self) -> list[dict]:
        h, s = self.hazard, self.survivor
        return [
            {
                "period": int(self.periods[i]),
                "beginning": int(self.beginning[i]),
                "ended": int(self.ended[i]),
                "censored": int(self.censored[i]),
                "hazard": float(h[i]),
                "survivor": float(s[i]),
            }
            for i in range(len(self))
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["period", "beginning", "ended", "censored", "hazard", "survivor"])
        for r in self.rows():
            writer.writerow(
                [r["period"], r["beginning"], r["ended"], r["censored"], f"{r['hazard']:.6f}", f"{r['survivor']:.6f}"]
            )
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [
            {**r, "hazard": round(r["hazard"], 6), "survivor": round(r["survivor"], 6)}
            for r in self.rows()
        ]
        return json.dumps(rows, indent=2) + "\n"

    @classmethod
    def from_csv(cls, source) -> LifeTable:
        """Read the CSV export back; hazards and survivors are recomputed from counts."""
        rows = list(csv.DictReader(io.StringIO(_read_text(source))))
        if not rows:
            raise EmptySpells("life table file has no rows")
        try:
            return cls(
                [int(r["period"]) for r in rows],
                [int(r["beginning"]) for r in rows],
                [int(r["ended"]) for r in rows],
                [int(r["censored"]) for r in rows],
            )
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"malformed life table file: {exc}") from None


def life_table(spells: Iterable[SponsorshipSpell] | Dataset) -> LifeTable:
    """Tabulate spells into a life table with one row per period ``1..max duration``."""
    if isinstance(spells, Dataset):
        spells = spells.spells
    spells = list(spells)
    if not spells:
        raise EmptySpells("no spells to tabulate")
    duration = np.array([s.duration for s in spells], dtype=np.int64)
    ended = np.array([s.ended for s in spells], dtype=bool)
    last = int(duration.max())
    events = np.bincount(duration[ended], minlength=last + 1)[1:]
    censored = np.bincount(duration[~ended], minlength=last + 1)[1:]
    exits = events + censored
    beginning = exits[::-1].cumsum()[::-1]
    return LifeTable(np.arange(1, last + 1), beginning, events, censored)


def overall_hazard(table: LifeTable) -> tuple[float, float]:
    """(events per at-risk period, its complement the renewal rate)."""
    h = table.overall_hazard
    return h, 1.0 - h


def median_lifetime(curve: SurvivorCurve | LifeTable) -> float:
    """Period at which the survivor curve crosses .5, linearly interpolated.

    With ``m`` the last period whose survivor value exceeds .5 the result is
    ``m + (S(m) - .5) / (S(m) - S(m + 1))``. A curve that hits .5 exactly at
    period ``j`` returns ``j``.
    """
    if isinstance(curve, LifeTable):
        curve = curve.curve
    s = curve.values
    exact = np.flatnonzero(s == 0.5)
    if exact.size:
        return float(curve.periods[exact[0]])
    above = np.flatnonzero(s > 0.5)
    m = int(above[-1])
    if m + 1 >= len(s):
        raise MedianUndefined(
            f"undefined (curve floor above .5): survivor never drops below .5 (min {s.min():.4f})"
        )
    return float(curve.periods[m]) + (s[m] - 0.5) / (s[m] - s[m + 1])


def epanechnikov(u: np.ndarray) -> np.ndarray:
    return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)


def smoothed_hazard(table: LifeTable, bandwidth: float = 3) -> tuple[np.ndarray, np.ndarray]:
    """Kernel-smoothed period hazards.

    Each period's value is the Epanechnikov-weighted mean of the raw hazards
    within ``bandwidth`` periods; weights are renormalised at the ends of the
    table so that a constant hazard stays constant.

    Returns
    -------
    periods, values : ndarray
        Same length as the table.
    """
    if not np.isfinite(bandwidth) or bandwidth < 1:
        raise BadBandwidth(f"bandwidth must be >= 1 period, got {bandwidth}")
    t = table.periods.astype(float)
    h = table.hazard
    w = epanechnikov((t[None, :] - t[:, None]) / float(bandwidth))
    return table.periods.copy(), (w @ h) / w.sum(axis=1)
