"""Panel data model, CSV parsing and design matrices.

One panel row is one sponsorship-year. A sponsorship (spell) occupies the
contiguous periods ``1..d``; the ``event`` flag is set on period ``d`` when the
sponsor exited and is zero throughout when the spell is right-censored.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import IO, Any

import numpy as np

from .exceptions import (
    BadEnumToken,
    DegenerateColumnWarning,
    EmptyInput,
    EventNotTerminal,
    InvalidValue,
    MissingColumn,
    NonContiguousPeriods,
    UnknownBlockColumn,
    ValidationError,
)

SPONSORSHIP_TYPES = (
    "naming_rights",
    "event_title",
    "league",
    "jersey_shirt",
    "team",
    "olympic",
    "world_cup",
)
BIG_FOUR = ("mlb", "nba", "nhl", "nfl", "none")
LOCATIONS = ("africa", "asia", "australia", "europe", "north_america", "south_america")
CATEGORIES = (
    "alcoholic_beverage",
    "non_alcoholic_beverage",
    "automotive",
    "insurance",
    "apparel",
    "retail",
    "tech",
    "qsr",
    "food",
    "media",
    "bank",
    "credit_card",
    "financial_services",
    "medical_hospitals",
    "pharmaceutical",
    "personal_care",
    "airline",
    "shipping_mail",
    "utilities_power",
    "hotel",
    "betting",
    "tire",
    "telecom",
    "other",
)
FLAG_FIELDS = ("regional_proximity", "congruence", "brand_equity", "b2b", "publicly_traded")

PANEL_COLUMNS = (
    "sponsorship_id",
    "period",
    "sponsorship_type",
    "big_four_property",
    "gdp_growth",
    "cpi_inflation",
    "sponsor_location",
    "sponsor_category",
    "regional_proximity",
    "congruence",
    "brand_equity",
    "b2b",
    "publicly_traded",
    "clutter",
    "event",
)

# Covariate fields, i.e. everything a profile has to describe.
COVARIATE_FIELDS = PANEL_COLUMNS[2:-1]

_ENUMS = {
    "sponsorship_type": SPONSORSHIP_TYPES,
    "big_four_property": BIG_FOUR,
    "sponsor_location": LOCATIONS,
    "sponsor_category": CATEGORIES,
}
_RANGES = {"gdp_growth": (-100.0, 100.0), "cpi_inflation": (-100.0, 5000.0)}


@dataclass(frozen=True, slots=True)
class PanelObservation:
    """One sponsorship-year."""

    sponsorship_id: str
    period: int
    sponsorship_type: str
    big_four_property: str
    gdp_growth: float
    cpi_inflation: float
    sponsor_location: str
    sponsor_category: str
    regional_proximity: bool
    congruence: bool
    brand_equity: bool
    b2b: bool
    publicly_traded: bool
    clutter: int
    event: bool


@dataclass(frozen=True, slots=True)
class SponsorshipSpell:
    sponsorship_id: str
    duration: int
    ended: bool
    cluster_id: str = ""

    def __post_init__(self):
        if self.duration < 1:
            raise ValidationError(f"spell {self.sponsorship_id!r} has duration {self.duration} < 1")
        if not self.cluster_id:
            object.__setattr__(self, "cluster_id", self.sponsorship_id)


# -- scalar parsing ---------------------------------------------------------


def _parse_enum(token: str, column: str, row: int) -> str:
    value = token.strip().lower()
    if column == "big_four_property" and value == "":
        return "none"
    if value not in _ENUMS[column]:
        raise BadEnumToken(row, column, token)
    return value


def _parse_bool(token: str, column: str, row: int) -> bool:
    value = token.strip()
    if value == "1":
        return True
    if value == "0":
        return False
    if value == "":
        raise InvalidValue(row, column, "is empty (missing values are not imputed)")
    raise InvalidValue(row, column, f"must be 0 or 1, got {token!r}")


def _parse_int(token: str, column: str, row: int, minimum: int) -> int:
    try:
        value = int(token.strip())
    except ValueError:
        raise InvalidValue(row, column, f"must be an integer, got {token!r}") from None
    if value < minimum:
        raise InvalidValue(row, column, f"must be >= {minimum}, got {value}")
    return value


def _parse_float(token: str, column: str, row: int) -> float:
    try:
        value = float(token.strip())
    except ValueError:
        raise InvalidValue(row, column, f"must be a number, got {token!r}") from None
    lo, hi = _RANGES[column]
    if not (lo <= value <= hi) or math.isnan(value):
        raise InvalidValue(row, column, f"must lie in [{lo:g}, {hi:g}], got {value}")
    return value


def _observation_from_record(record: Mapping[str, str], row: int) -> PanelObservation:
    sid = record["sponsorship_id"].strip()
    if not sid:
        raise InvalidValue(row, "sponsorship_id", "is empty")
    return PanelObservation(
        sponsorship_id=sid,
        period=_parse_int(record["period"], "period", row, 1),
        sponsorship_type=_parse_enum(record["sponsorship_type"], "sponsorship_type", row),
        big_four_property=_parse_enum(record["big_four_property"], "big_four_property", row),
        gdp_growth=_parse_float(record["gdp_growth"], "gdp_growth", row),
        cpi_inflation=_parse_float(record["cpi_inflation"], "cpi_inflation", row),
        sponsor_location=_parse_enum(record["sponsor_location"], "sponsor_location", row),
        sponsor_category=_parse_enum(record["sponsor_category"], "sponsor_category", row),
        regional_proximity=_parse_bool(record["regional_proximity"], "regional_proximity", row),
        congruence=_parse_bool(record["congruence"], "congruence", row),
        brand_equity=_parse_bool(record["brand_equity"], "brand_equity", row),
        b2b=_parse_bool(record["b2b"], "b2b", row),
        publicly_traded=_parse_bool(record["publicly_traded"], "publicly_traded", row),
        clutter=_parse_int(record["clutter"], "clutter", row, 1),
        event=_parse_bool(record["event"], "event", row),
    )


def _check_observation(obs: PanelObservation, row: int) -> None:
    """Validate an observation that was built in code rather than parsed."""
    if obs.period < 1:
        raise InvalidValue(row, "period", f"must be >= 1, got {obs.period}")
    if obs.clutter < 1:
        raise InvalidValue(row, "clutter", f"must be >= 1, got {obs.clutter}")
    for column, allowed in _ENUMS.items():
        if getattr(obs, column) not in allowed:
            raise BadEnumToken(row, column, str(getattr(obs, column)))
    for column, (lo, hi) in _RANGES.items():
        value = getattr(obs, column)
        if not (lo <= value <= hi):
            raise InvalidValue(row, column, f"must lie in [{lo:g}, {hi:g}], got {value}")


# -- dataset ----------------------------------------------------------------


class Dataset:
    """A validated, immutable collection of panel observations.

    Rows are grouped by sponsorship in order of first appearance and sorted by
    period within each sponsorship. Construction validates contiguity of the
    periods and that an event can only occur on a spell's final period.
    """

    __slots__ = ("_observations", "_spells", "__dict__")

    def __init__(self, observations: Iterable[PanelObservation], *, _validated: bool = False):
        obs = list(observations)
        if not _validated:
            for i, o in enumerate(obs, start=1):
                _check_observation(o, i)
        groups: dict[str, list[PanelObservation]] = {}
        for o in obs:
            groups.setdefault(o.sponsorship_id, []).append(o)
        ordered: list[PanelObservation] = []
        spells: list[SponsorshipSpell] = []
        for sid, rows in groups.items():
            rows.sort(key=lambda o: o.period)
            if [o.period for o in rows] != list(range(1, len(rows) + 1)):
                raise NonContiguousPeriods(sid)
            if any(o.event for o in rows[:-1]):
                raise EventNotTerminal(sid)
            ordered.extend(rows)
            spells.append(SponsorshipSpell(sid, len(rows), rows[-1].event))
        self._observations = tuple(ordered)
        self._spells = tuple(spells)

    @property
    def observations(self) -> tuple[PanelObservation, ...]:
        return self._observations

    @property
    def spells(self) -> tuple[SponsorshipSpell, ...]:
        return self._spells

    @property
    def n_spells(self) -> int:
        return len(self._spells)

    @property
    def n_observations(self) -> int:
        return len(self._observations)

    def __len__(self) -> int:
        return len(self._observations)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self._observations == other._observations

    def __repr__(self) -> str:
        return f"Dataset(n_spells={self.n_spells}, n_observations={self.n_observations})"

    @cached_property
    def arrays(self) -> dict[str, np.ndarray]:
        """Column-oriented view of the observations (read-only arrays)."""
        out: dict[str, np.ndarray] = {}
        for f in fields(PanelObservation):
            values = [getattr(o, f.name) for o in self._observations]
            if f.type == "int":
                arr = np.asarray(values, dtype=np.int64)
            elif f.type == "float":
                arr = np.asarray(values, dtype=float)
            elif f.type == "bool":
                arr = np.asarray(values, dtype=bool)
            else:
                arr = np.asarray(values, dtype=object)
            arr.flags.writeable = False
            out[f.name] = arr
        return out


def parse_panel_csv(source: IO[bytes] | IO[str] | bytes | str | os.PathLike) -> Dataset:
    """Parse a panel CSV file into a validated :class:`Dataset`.

    ``source`` may be a path, raw bytes, or an open binary/text stream.
    """
    text = _read_text(source)
    if not text.strip():
        raise EmptyInput("input contains no header")
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header
    for column in PANEL_COLUMNS:
        if column not in header:
            raise MissingColumn(column)
    observations = []
    for line_no, record in enumerate(reader, start=2):
        if None in record or any(record.get(c) is None for c in PANEL_COLUMNS):
            raise InvalidValue(line_no, "*", "has the wrong number of fields")
        observations.append(_observation_from_record(record, line_no))
    if not observations:
        raise EmptyInput("input contains a header but no rows")
    return Dataset(observations, _validated=True)


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8-sig")
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8-sig")
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return data


def _format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_panel_csv(dataset: Dataset | Iterable[PanelObservation]) -> str:
    """Render observations in the panel CSV format (inverse of :func:`parse_panel_csv`)."""
    observations = dataset.observations if isinstance(dataset, Dataset) else dataset
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PANEL_COLUMNS)
    for o in observations:
        writer.writerow([_format_cell(getattr(o, c)) for c in PANEL_COLUMNS])
    return buf.getvalue()


def spells_from_panel(dataset: Dataset) -> tuple[SponsorshipSpell, ...]:
    return dataset.spells


# -- design matrices --------------------------------------------------------

DEFAULT_BLOCKS: tuple[tuple[str, tuple[str, ...]], ...] = (
    (
        "sponsorship_type",
        (
            "type:naming_rights",
            "type:event_title",
            "type:league",
            "type:olympic",
            "type:world_cup",
            "property:mlb",
            "property:nba",
            "property:nhl",
            "property:nfl",
        ),
    ),
    ("economics", ("gdp_growth", "cpi_inflation")),
    ("location", tuple(f"location:{x}" for x in LOCATIONS if x != "north_america")),
    ("category", tuple(f"category:{x}" for x in CATEGORIES if x != "other")),
    ("characteristics", FLAG_FIELDS + ("clutter",)),
)

_PREFIXES = {
    "type": "sponsorship_type",
    "property": "big_four_property",
    "location": "sponsor_location",
    "category": "sponsor_category",
}
BIG_FOUR_MODES = ("flags", "league_interaction")


def known_columns() -> tuple[str, ...]:
    """Every column name a block specification may use."""
    names = []
    for prefix, field_name in _PREFIXES.items():
        names.extend(f"{prefix}:{level}" for level in _ENUMS[field_name])
    names.extend(("gdp_growth", "cpi_inflation") + FLAG_FIELDS + ("clutter",))
    return tuple(names)


def column_values(
    name: str, data: Mapping[str, np.ndarray], big_four: str = "flags"
) -> np.ndarray:
    """Numeric values of design column ``name`` given column-oriented fields.

    ``data`` maps PanelObservation field names to equal-length arrays.
    """
    if ":" in name:
        prefix, level = name.split(":", 1)
        field_name = _PREFIXES.get(prefix)
        if field_name is None or level not in _ENUMS[field_name]:
            raise UnknownBlockColumn(name)
        hit = np.asarray(data[field_name]) == level
        if prefix == "property" and big_four == "league_interaction":
            hit = hit & (np.asarray(data["sponsorship_type"]) == "league")
        return hit.astype(float)
    if name in ("gdp_growth", "cpi_inflation", "clutter") + FLAG_FIELDS:
        return np.asarray(data[name], dtype=float)
    raise UnknownBlockColumn(name)


@dataclass(frozen=True)
class BlockSpec:
    """Ordered covariate blocks, entered cumulatively by the hierarchical fit.

    ``big_four`` selects how the MLB/NBA/NHL/NFL columns are coded: as property
    flags independent of sponsorship type (``"flags"``) or as league-sponsorship
    interactions (``"league_interaction"``).
    """

    blocks: tuple[tuple[str, tuple[str, ...]], ...]
    big_four: str = "flags"

    def __post_init__(self):
        if self.big_four not in BIG_FOUR_MODES:
            raise ValidationError(f"big_four must be one of {BIG_FOUR_MODES}, got {self.big_four!r}")
        if not self.blocks:
            raise ValidationError("block specification has no blocks")
        catalog = set(known_columns())
        seen: set[str] = set()
        for name, columns in self.blocks:
            if not columns:
                raise ValidationError(f"block {name!r} has no columns")
            for c in columns:
                if c not in catalog:
                    raise UnknownBlockColumn(c)
                if c in seen:
                    raise ValidationError(f"column {c!r} appears in more than one block")
                seen.add(c)

    @classmethod
    def default(cls) -> BlockSpec:
        return cls(DEFAULT_BLOCKS)

    @classmethod
    def from_obj(cls, obj: Any) -> BlockSpec:
        """Build from the JSON form, or from the string ``"default"``.

        The JSON form is ``{"blocks": [...], "big_four": "flags"}`` where each
        block is ``{"name": str, "columns": [str, ...]}`` or the bare name of a
        default block.
        """
        if obj is None or obj == "default":
            return cls.default()
        if isinstance(obj, BlockSpec):
            return obj
        if isinstance(obj, list):
            obj = {"blocks": obj}
        defaults = dict(DEFAULT_BLOCKS)
        blocks = []
        for entry in obj.get("blocks", []):
            if isinstance(entry, str):
                if entry not in defaults:
                    raise ValidationError(f"unknown default block {entry!r}")
                blocks.append((entry, defaults[entry]))
            else:
                blocks.append((str(entry["name"]), tuple(entry["columns"])))
        return cls(tuple(blocks), obj.get("big_four", "flags"))

    @classmethod
    def load(cls, path: str | os.PathLike) -> BlockSpec:
        if str(path) == "default":
            return cls.default()
        with open(path, encoding="utf-8") as fh:
            return cls.from_obj(json.load(fh))

    def to_obj(self) -> dict:
        return {
            "blocks": [{"name": n, "columns": list(c)} for n, c in self.blocks],
            "big_four": self.big_four,
        }

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(c for _, cols in self.blocks for c in cols)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(name for name, cols in self.blocks for _ in cols)

    def encode(self, data: Mapping[str, np.ndarray]) -> np.ndarray:
        """Design rows for column-oriented ``data``; shape (rows, columns)."""
        cols = [column_values(c, data, self.big_four) for c in self.columns]
        n = len(next(iter(data.values()))) if data else 0
        return np.column_stack(cols) if cols else np.empty((n, 0))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Counting-process design: one row per (start, stop] interval.

    For panel data ``start = period - 1`` and ``stop = period``; the covariates
    are those in force during the period, so time-varying values are read at
    each event time.
    """

    X: np.ndarray
    start: np.ndarray
    stop: np.ndarray
    event: np.ndarray
    columns: tuple[str, ...]
    blocks: tuple[str, ...]
    clusters: np.ndarray
    degenerate: tuple[str, ...] = field(default=())
    big_four: str = "flags"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ValidationError("X must be two-dimensional")
        n, p = X.shape
        if len(self.columns) != p or len(self.blocks) != p:
            raise ValidationError("column names and block labels must match the column count")
        if len(set(self.columns)) != p:
            raise ValidationError("column names must be unique")
        for name in ("start", "stop", "event", "clusters"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"{name} must have one entry per row")
        start = np.asarray(self.start, dtype=float)
        stop = np.asarray(self.stop, dtype=float)
        if np.any(stop <= start):
            raise ValidationError("every interval needs stop > start")
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "start", _readonly(start))
        object.__setattr__(self, "stop", _readonly(stop))
        object.__setattr__(self, "event", _readonly(np.asarray(self.event, dtype=bool)))
        object.__setattr__(self, "clusters", _readonly(np.asarray(self.clusters, dtype=object)))

    @classmethod
    def from_arrays(
        cls,
        X,
        stop,
        event,
        *,
        start=None,
        columns: Sequence[str] | None = None,
        blocks: Sequence[str] | None = None,
        clusters=None,
    ) -> DesignMatrix:
        """Build a design from plain arrays; ``start`` defaults to ``stop - 1``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        n, p = X.shape
        stop = np.asarray(stop, dtype=float)
        start = stop - 1.0 if start is None else np.asarray(start, dtype=float)
        columns = tuple(columns) if columns is not None else tuple(f"x{j}" for j in range(p))
        blocks = tuple(blocks) if blocks is not None else ("covariates",) * p
        clusters = np.arange(n).astype(str) if clusters is None else np.asarray(clusters)
        return cls(
            X,
            start,
            stop,
            event,
            columns,
            blocks,
            clusters,
            degenerate=_degenerate_columns(X, columns),
        )

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_columns(self) -> int:
        return self.X.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    @property
    def block_names(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.blocks))

    def select(self, columns: Sequence[str]) -> DesignMatrix:
        """Sub-design restricted to ``columns`` (in the given order)."""
        idx = [self.columns.index(c) for c in columns]
        cols = tuple(columns)
        return DesignMatrix(
            self.X[:, idx],
            self.start,
            self.stop,
            self.event,
            cols,
            tuple(self.blocks[i] for i in idx),
            self.clusters,
            degenerate=tuple(c for c in self.degenerate if c in cols),
            big_four=self.big_four,
        )

    def with_X(self, X: np.ndarray) -> DesignMatrix:
        """Same intervals and labels, different covariate values."""
        return DesignMatrix(
            X,
            self.start,
            self.stop,
            self.event,
            self.columns,
            self.blocks,
            self.clusters,
            degenerate=_degenerate_columns(np.asarray(X, dtype=float), self.columns),
            big_four=self.big_four,
        )


def _degenerate_columns(X: np.ndarray, columns: Sequence[str]) -> tuple[str, ...]:
    if X.shape[0] == 0:
        return tuple(columns)
    flat = np.ptp(X, axis=0) == 0
    return tuple(c for c, bad in zip(columns, flat) if bad)


def design_matrix(
    dataset: Dataset, spec: BlockSpec | Mapping | str | None = None
) -> DesignMatrix:
    """Dummy-coded design for ``dataset`` under a block specification.

    The default specification produces 45 columns in five blocks of sizes
    9, 2, 5, 23 and 6. Zero-variance columns are listed in
    ``DesignMatrix.degenerate`` and announced with a
    :class:`~sponsorsurv.exceptions.DegenerateColumnWarning`; they are not an
    error until a fit is attempted.
    """
    spec = BlockSpec.from_obj(spec)
    data = dataset.arrays
    X = spec.encode(data).reshape(dataset.n_observations, len(spec.columns))
    degenerate = _degenerate_columns(X, spec.columns)
    for c in degenerate:
        warnings.warn(f"DegenerateColumn({c!r}): zero variance", DegenerateColumnWarning, stacklevel=2)
    period = data["period"].astype(float)
    return DesignMatrix(
        X,
        period - 1.0,
        period,
        data["event"],
        spec.columns,
        spec.labels,
        data["sponsorship_id"],
        degenerate=degenerate,
        big_four=spec.big_four,
    )
