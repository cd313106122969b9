"""Input validation helpers and the two error classes used across the package.

``ValidationError`` signals a malformed request (wrong shapes, out-of-range
parameters). ``GuardError`` signals a numerical guard: the request is
well-formed but the computation would be unreliable (coarse grid, missing
band limit, truncated table). The CLI maps them to exit codes 2 and 3.
"""

from numbers import Integral, Real

import numpy as np


class ValidationError(ValueError):
    pass


class GuardError(RuntimeError):
    pass


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_real(value, name, low=None, high=None, strict_low=False):
    if isinstance(value, bool) or not isinstance(value, Real):
        raise ValidationError(f"{name} must be a real number, got {value!r}")
    if not np.isfinite(float(value)):
        raise ValidationError(f"{name} must be finite")
    if low is not None:
        if strict_low and not value > low:
            raise ValidationError(f"{name} must be > {low}, got {value}")
        if not strict_low and value < low:
            raise ValidationError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ValidationError(f"{name} must be <= {high}, got {value}")
    return value


def as_quaternion(q):
    """Return ``q`` as a unit quaternion array of shape (..., 4)."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4:
        raise ValidationError(f"quaternions need a trailing axis of size 4, got {q.shape}")
    norm = np.linalg.norm(q, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-9):
        raise ValidationError("quaternions must have unit norm")
    return q
