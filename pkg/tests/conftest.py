from __future__ import annotations

import numpy as np
import pytest

from sponsorsurv.panel import (
    BIG_FOUR,
    CATEGORIES,
    LOCATIONS,
    SPONSORSHIP_TYPES,
    Dataset,
    DesignMatrix,
    PanelObservation,
)
from sponsorsurv.reference import reference_panel


def make_observation(sid: str, period: int, event: bool = False, **overrides) -> PanelObservation:
    values = dict(
        sponsorship_id=sid,
        period=period,
        sponsorship_type="team",
        big_four_property="none",
        gdp_growth=0.0,
        cpi_inflation=0.0,
        sponsor_location="north_america",
        sponsor_category="other",
        regional_proximity=False,
        congruence=False,
        brand_equity=False,
        b2b=False,
        publicly_traded=False,
        clutter=1,
        event=event,
    )
    values.update(overrides)
    return PanelObservation(**values)


def spell_rows(sid: str, duration: int, ended: bool, **overrides) -> list[PanelObservation]:
    return [make_observation(sid, t, ended and t == duration, **overrides) for t in range(1, duration + 1)]


def tied_instance() -> DesignMatrix:
    """Four subjects: A (x=1) and C (x=0) exit at t=1, B (x=1) and D (x=0) at t=2."""
    return DesignMatrix.from_arrays(
        [[1.0], [1.0], [0.0], [0.0]],
        stop=[1, 2, 1, 2],
        event=[1, 1, 1, 1],
        start=[0, 0, 0, 0],
    )


def random_matrix(
    seed: int,
    n: int = 40,
    p: int = 2,
    max_time: int = 8,
    ties: bool = True,
    censor: float = 0.3,
) -> DesignMatrix:
    """Random (0, T] rows; ``ties=False`` gives every event a distinct time."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    if ties:
        stop = rng.integers(1, max_time + 1, size=n).astype(float)
    else:
        stop = rng.permutation(n).astype(float) + 1.0
    event = rng.random(n) > censor
    event[0] = True
    return DesignMatrix.from_arrays(X, stop, event, start=np.zeros(n))


def time_varying_matrix(seed: int, n_spells: int = 30, p: int = 2) -> DesignMatrix:
    """Panel-style rows (period - 1, period] with covariates redrawn each period."""
    rng = np.random.default_rng(seed)
    rows, stops, events, clusters = [], [], [], []
    for i in range(n_spells):
        d = int(rng.integers(1, 7))
        ended = bool(rng.random() < 0.7)
        base = rng.normal(size=p)
        for t in range(1, d + 1):
            rows.append(base + 0.5 * rng.normal(size=p))
            stops.append(t)
            events.append(ended and t == d)
            clusters.append(f"s{i}")
    return DesignMatrix.from_arrays(np.array(rows), stops, events, clusters=clusters)


@pytest.fixture(scope="session")
def reference():
    return reference_panel()


def random_panel(seed: int, n_spells: int = 2000, base_hazard: float = 0.2):
    """Panel with every enum level represented and exits driven by a few covariates."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_spells):
        fixed = dict(
            sponsorship_type=str(rng.choice(SPONSORSHIP_TYPES)),
            big_four_property=str(rng.choice(BIG_FOUR)),
            sponsor_location=str(rng.choice(LOCATIONS)),
            sponsor_category=str(rng.choice(CATEGORIES)),
            regional_proximity=bool(rng.random() < 0.4),
            congruence=bool(rng.random() < 0.5),
            brand_equity=bool(rng.random() < 0.3),
            b2b=bool(rng.random() < 0.2),
            publicly_traded=bool(rng.random() < 0.6),
            clutter=int(rng.integers(1, 40)),
        )
        eta = -0.4 * fixed["congruence"] + 0.3 * fixed["b2b"] + 0.01 * fixed["clutter"]
        for t in range(1, 31):
            gdp, cpi = float(rng.normal(2, 2)), float(rng.normal(3, 1.5))
            p = min(base_hazard * np.exp(eta - 0.05 * gdp), 0.95)
            ended = bool(rng.random() < p)
            last = ended or rng.random() < 0.05 or t == 30
            rows.append(make_observation(f"P{i:05d}", t, ended, gdp_growth=gdp, cpi_inflation=cpi, **fixed))
            if last:
                break
    return Dataset(rows)
