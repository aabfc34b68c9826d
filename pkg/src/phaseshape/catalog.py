"""Named reference constellations for comparisons and CLI input."""

from __future__ import annotations

import math

import numpy as np

from .core import Constellation
from .optimize import apsk_realize

# Spiral defaults: radius grows linearly while the angle advances by the
# golden angle each point, giving strictly distinct magnitudes (and hence a
# zero error floor).  The construction this stands in for is not fully
# parameterized in the literature we compare against, so these values are
# documented approximations.
SPIRAL_GROWTH_DEFAULT = 0.12
SPIRAL_STEP_DEFAULT = 2.0 * math.pi * (1.0 - 2.0 / (1.0 + math.sqrt(5.0)))


def psk(m: int, power: float = 1.0) -> Constellation:
    """m points uniformly on one circle at the budgeted power."""
    if m < 1:
        raise ValueError("need at least one point")
    pts = math.sqrt(power) * np.exp(2j * math.pi * np.arange(m) / m)
    return Constellation(pts, power)


def qam(m: int, power: float = 1.0) -> Constellation:
    """Square QAM grid (m a perfect even square), power-normalized."""
    side = int(round(math.sqrt(m)))
    if side * side != m or side % 2 != 0:
        raise ValueError(f"square QAM needs m to be an even perfect square, got {m}")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    grid = (levels[:, None] + 1j * levels[None, :]).ravel()
    return Constellation(grid, power).normalize_power()


def spiral_qam(
    m: int = 16,
    power: float = 1.0,
    growth: float = SPIRAL_GROWTH_DEFAULT,
    step: float = SPIRAL_STEP_DEFAULT,
) -> Constellation:
    """Spiral constellation: monotone radius growth, constant angle step.

    ``growth`` is the per-point relative radius increment; ``step`` the angle
    increment in radians.  All magnitudes are strictly distinct.
    """
    if growth <= 0:
        raise ValueError("spiral growth must be positive for distinct magnitudes")
    k = np.arange(m)
    pts = (1.0 + growth * k) * np.exp(1j * step * k)
    return Constellation(pts, power).normalize_power()


def builtin_constellation(name: str, m: int, power: float = 1.0) -> Constellation:
    """Resolve a constellation by registry name.

    Accepted names: ``psk``, ``qam``, ``spiral-qam``, ``apsk:<n1,n2,...>``
    and ``file:<path>`` (JSON or CSV per the constellation file formats).
    The result is power-normalized.
    """
    if name == "psk":
        return psk(m, power)
    if name == "qam":
        return qam(m, power)
    if name == "spiral-qam":
        return spiral_qam(m, power)
    if name.startswith("apsk:"):
        comp = tuple(int(tok) for tok in name[len("apsk:") :].split(","))
        if sum(comp) != m:
            raise ValueError(f"composition {comp} sums to {sum(comp)}, expected m={m}")
        _, const = apsk_realize(comp, power)
        return const
    if name.startswith("file:"):
        const = Constellation.load(name[len("file:") :])
        if const.size != m:
            raise ValueError(f"constellation file has {const.size} points, expected m={m}")
        return Constellation(const.points, power).normalize_power()
    raise ValueError(f"unknown constellation name {name!r}")
