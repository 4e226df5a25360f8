"""Two-dimensional matrix identities behind every mode transfer.

For ``u = cos(kx) + s cos(k'y)`` the "add" matrix ``A_s`` satisfies
``A_s grad u = V`` with ``div V = cos(k'y)``.  The "remove" matrix is the
mirror image: for ``v = s cos(kx) + cos(k'y)`` it gives ``div V = cos(kx)``.
Both are symmetric with one vanishing diagonal entry.

The ``*_entries`` functions are the raw vectorised kernels used by the
segment evaluators.  They accept arrays for ``x``, ``y`` and ``s`` and do
not check the wavenumber ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

Variant = Literal["add", "remove"]


class ParameterDomainError(ValueError):
    """A construction parameter lies outside its admissible range."""


@dataclass(frozen=True)
class PlanarParams:
    k: int
    kprime: int
    s: float = 0.0

    def __post_init__(self):
        if not (1 <= self.k <= self.kprime <= 2 * self.k):
            raise ParameterDomainError(f"need 1 <= k <= k' <= 2k, got k={self.k}, k'={self.kprime}")
        if self.s < 0:
            raise ParameterDomainError("mixing amplitude s must be non-negative")


@dataclass(frozen=True)
class PlanarMatrix:
    """Symmetric ``[[a, b], [b, c]]``; entries may be arrays."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def as_array(self) -> np.ndarray:
        a, b, c = np.broadcast_arrays(self.a, self.b, self.c)
        return np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)


@dataclass(frozen=True)
class PlanarEntries:
    """Matrix entries with their x, y and s partials, all for one variant."""

    m: PlanarMatrix
    dx: PlanarMatrix
    dy: PlanarMatrix
    ds: PlanarMatrix


def add_entries(k, kp, s, x, y) -> PlanarEntries:
    cx, sx = np.cos(k * x), np.sin(k * x)
    cy, sy = np.cos(kp * y), np.sin(kp * y)
    k2 = k * k
    zero = np.zeros(np.broadcast(x, y, s).shape)
    a = -cy * cx / k2 + 2.0 * s * sy * sy / k2
    b = -2.0 * sy * sx / (k * kp)
    m = PlanarMatrix(a + zero, b + zero, zero)
    dx = PlanarMatrix(cy * sx / k + zero, -2.0 * sy * cx / kp + zero, zero)
    dy = PlanarMatrix((kp / k2) * (sy * cx + 4.0 * s * sy * cy) + zero, -2.0 * cy * sx / k + zero, zero)
    ds = PlanarMatrix(2.0 * sy * sy / k2 + zero, zero, zero)
    return PlanarEntries(m, dx, dy, ds)


def remove_entries(k, kp, s, x, y) -> PlanarEntries:
    cx, sx = np.cos(k * x), np.sin(k * x)
    cy, sy = np.cos(kp * y), np.sin(kp * y)
    kp2 = kp * kp
    zero = np.zeros(np.broadcast(x, y, s).shape)
    b = -2.0 * sx * sy / (k * kp)
    c = -cx * cy / kp2 + 2.0 * s * sx * sx / kp2
    m = PlanarMatrix(zero, b + zero, c + zero)
    dx = PlanarMatrix(zero, -2.0 * cx * sy / kp + zero, (k / kp2) * (sx * cy + 4.0 * s * sx * cx) + zero)
    dy = PlanarMatrix(zero, -2.0 * sx * cy / k + zero, cx * sy / kp + zero)
    ds = PlanarMatrix(zero, zero, 2.0 * sx * sx / kp2 + zero)
    return PlanarEntries(m, dx, dy, ds)


def entries(variant: Variant, k, kp, s, x, y) -> PlanarEntries:
    if variant == "add":
        return add_entries(k, kp, s, x, y)
    if variant == "remove":
        return remove_entries(k, kp, s, x, y)
    raise ValueError(f"unknown variant {variant!r}")


def vector_field_add(p: PlanarParams, x, y) -> tuple[np.ndarray, np.ndarray]:
    k, kp = p.k, p.kprime
    v1 = np.sin(2 * k * x) * np.cos(kp * y) / (2 * k)
    v2 = 2.0 * np.sin(kp * y) * np.sin(k * x) ** 2 / kp
    return v1, v2


def vector_field_remove(p: PlanarParams, x, y) -> tuple[np.ndarray, np.ndarray]:
    k, kp = p.k, p.kprime
    v1 = 2.0 * np.sin(k * x) * np.sin(kp * y) ** 2 / k
    v2 = np.sin(2 * kp * y) * np.cos(k * x) / (2 * kp)
    return v1, v2


def matrix_add(p: PlanarParams, x, y) -> PlanarMatrix:
    return add_entries(p.k, p.kprime, p.s, x, y).m


def matrix_remove(p: PlanarParams, x, y) -> PlanarMatrix:
    return remove_entries(p.k, p.kprime, p.s, x, y).m


def matrix_gradient(variant: Variant, p: PlanarParams, x, y) -> tuple[PlanarMatrix, PlanarMatrix]:
    e = entries(variant, p.k, p.kprime, p.s, x, y)
    return e.dx, e.dy


def matrix_s_derivative(variant: Variant, p: PlanarParams, x, y) -> PlanarMatrix:
    return entries(variant, p.k, p.kprime, p.s, x, y).ds


def apply(m: PlanarMatrix, g1, g2) -> tuple[np.ndarray, np.ndarray]:
    return m.a * g1 + m.b * g2, m.b * g1 + m.c * g2
