"""Small argument and array checks shared by the estimators and the CLI."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ValidationError

TIES_METHODS = ("efron", "breslow")
SURVIVAL_FORMS = ("exponential", "product")


def check_ties(ties: str) -> str:
    value = str(ties).lower()
    if value not in TIES_METHODS:
        raise ValidationError(f"ties must be one of {TIES_METHODS}, got {ties!r}")
    return value


def check_form(form: str) -> str:
    if form not in SURVIVAL_FORMS:
        raise ValidationError(f"survival form must be one of {SURVIVAL_FORMS}, got {form!r}")
    return form


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValidationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_non_negative(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ValidationError(f"{name} must be a finite non-negative number, got {value!r}")
    return value


def check_survival_target(y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a survival target into (start, stop, event).

    ``y`` is an array with two columns ``(stop, event)`` or three columns
    ``(start, stop, event)``; with two columns ``start = stop - 1`` (one row per
    whole period).
    """
    # sklearn is only needed here; importing it lazily keeps the CLI fast.
    from sklearn.utils.validation import check_array

    y = check_array(y, ensure_2d=True, dtype=float)
    if y.shape[1] == 2:
        stop, event = y[:, 0], y[:, 1]
        start = stop - 1.0
    elif y.shape[1] == 3:
        start, stop, event = y[:, 0], y[:, 1], y[:, 2]
    else:
        raise ValidationError("y needs columns (stop, event) or (start, stop, event)")
    if not np.all(np.isin(event, (0.0, 1.0))):
        raise ValidationError("event indicators must be 0 or 1")
    if np.any(stop <= start):
        raise ValidationError("every interval needs stop > start")
    return start, stop, event.astype(bool)
