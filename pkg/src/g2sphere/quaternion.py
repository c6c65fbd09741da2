"""Quaternion helpers and the double cover Sp(1) -> SO(3).

Quaternions are numpy arrays (h0, h1, h2, h3) for h0 + h1 i + h2 j + h3 k.
"""

import logging

import numpy as np

from g2sphere.config import DEFAULT_SETTINGS, Settings
from g2sphere.exceptions import ParameterDomainError

logger = logging.getLogger(__name__)

ONE = np.array([1.0, 0.0, 0.0, 0.0])


def multiply(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product p q."""
    p0, p1, p2, p3 = p
    q0, q1, q2, q3 = q
    return np.array(
        [
            p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
            p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
            p0 * q2 - p1 * q3 + p2 * q0 + p3 * q1,
            p0 * q3 + p1 * q2 - p2 * q1 + p3 * q0,
        ]
    )


def conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def imaginary(vector: np.ndarray) -> np.ndarray:
    """Imaginary quaternion with components (x1, x2, x3)."""
    return np.array([0.0, *vector])


def to_unit(h, settings: Settings = DEFAULT_SETTINGS) -> np.ndarray:
    """Validate a unit quaternion, renormalizing small drift.

    Raises:
        ParameterDomainError: If the norm deviates from 1 by more than
            settings.drift_reject
    """
    q = np.asarray(h, dtype=float).reshape(-1)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise ParameterDomainError(f"Quaternion needs four finite components, got {h!r}")
    drift = abs(float(np.linalg.norm(q)) - 1.0)
    if drift > settings.drift_reject:
        raise ParameterDomainError(f"Quaternion {q.tolist()} is not unit (drift {drift:.3e})")
    if drift > settings.drift_renormalize:
        logger.debug("Renormalizing quaternion with drift %.3e", drift)
        q = q / np.linalg.norm(q)
    return q


def upsilon(h: np.ndarray) -> np.ndarray:
    """Rotation Υ(h) of p1 + p2 + p3, x -> h x h̄ in the basis (i, j, k)."""
    h0, h1, h2, h3 = h
    return np.array(
        [
            [h0**2 + h1**2 - h2**2 - h3**2, 2 * (h1 * h2 - h0 * h3), 2 * (h1 * h3 + h0 * h2)],
            [2 * (h1 * h2 + h0 * h3), h0**2 - h1**2 + h2**2 - h3**2, 2 * (h2 * h3 - h0 * h1)],
            [2 * (h1 * h3 - h0 * h2), 2 * (h2 * h3 + h0 * h1), h0**2 - h1**2 - h2**2 + h3**2],
        ]
    )


def canonical_sign(q: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Representative of ±q whose first nonzero component is positive."""
    for component in q:
        if abs(component) > atol:
            return q if component > 0 else -q
    return q


def from_rotation(rotation: np.ndarray) -> np.ndarray:
    """Unit quaternion h with Υ(h) = rotation (Shepperd's method), canonical sign."""
    r = np.asarray(rotation, dtype=float)
    trace = np.trace(r)
    pivot = int(np.argmax([trace, r[0, 0], r[1, 1], r[2, 2]]))
    if pivot == 0:
        h0 = 0.5 * np.sqrt(1.0 + trace)
        q = np.array(
            [h0, (r[2, 1] - r[1, 2]) / (4 * h0), (r[0, 2] - r[2, 0]) / (4 * h0), (r[1, 0] - r[0, 1]) / (4 * h0)]
        )
    elif pivot == 1:
        h1 = 0.5 * np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
        q = np.array(
            [(r[2, 1] - r[1, 2]) / (4 * h1), h1, (r[0, 1] + r[1, 0]) / (4 * h1), (r[0, 2] + r[2, 0]) / (4 * h1)]
        )
    elif pivot == 2:
        h2 = 0.5 * np.sqrt(1.0 - r[0, 0] + r[1, 1] - r[2, 2])
        q = np.array(
            [(r[0, 2] - r[2, 0]) / (4 * h2), (r[0, 1] + r[1, 0]) / (4 * h2), h2, (r[1, 2] + r[2, 1]) / (4 * h2)]
        )
    else:
        h3 = 0.5 * np.sqrt(1.0 - r[0, 0] - r[1, 1] + r[2, 2])
        q = np.array(
            [(r[1, 0] - r[0, 1]) / (4 * h3), (r[0, 2] + r[2, 0]) / (4 * h3), (r[1, 2] + r[2, 1]) / (4 * h3), h3]
        )
    return canonical_sign(q / np.linalg.norm(q))


def random_unit(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)
