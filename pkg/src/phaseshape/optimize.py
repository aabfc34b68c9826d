"""Constellation design by global search and by exhaustive ring enumeration.

Three criteria are supported: minimizing the SEP union bound (``sep-a``),
maximizing the MI of the discrete detector channel (``mi-a``), and maximizing
the MI of the continuous-output channel (``mi-b``, which tries both
likelihood characterizations and keeps the better one).

``optimize_global`` runs multi-start projected gradient descent over the 2M
real coordinates under the average-power constraint; ``optimize_apsk``
exhaustively scores every ordered ring composition of M points on uniformly
spaced radii.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import ChannelParams, Constellation, derive_rng
from .detectors import AdmissibilityError
from .metrics import (
    LikelihoodKind,
    QuadratureGrid,
    _channel_weight,
    _mi_quadrature,
    _mi_surrogate,
    _polar_nodes,
    mi_dc_best,
    mi_dd,
    sep_union_bound,
)

ARMIJO_C1 = 1e-4
BACKTRACK_SHRINK = 0.5
TWO_PI_J = 2j * math.pi


class Criterion(str, Enum):
    SEP_A = "sep-a"
    MI_A = "mi-a"
    MI_B = "mi-b"


@dataclass(frozen=True)
class SearchConfig:
    """Budget and tolerances of the multi-start global search."""

    n_starts: int = 64
    max_iterations: int = 2000
    step_tolerance: float = 1e-8
    objective_tolerance: float = 1e-10
    seed: int = 0
    # MI-B descents evaluate a reduced-resolution surrogate for speed; the
    # final reported value is always re-evaluated at full resolution.
    descent_grid: tuple = (128, 256)

    def __post_init__(self):
        if self.n_starts < 1 or self.max_iterations < 1:
            raise ValueError("search budget must be positive")
        if self.step_tolerance <= 0 or self.objective_tolerance <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class ApskConfig:
    """Ring composition with its realized uniformly spaced radii."""

    ring_sizes: tuple
    delta: float
    radii: tuple
    phase_offsets: tuple
    degenerate: bool = False


@dataclass(frozen=True)
class OptimizationResult:
    constellation: Constellation
    value: float
    criterion: Criterion
    params: ChannelParams
    n_starts: int
    per_start_values: tuple
    converged: bool
    seed: int | None
    method: str
    kind: str | None = None
    composition: tuple | None = None
    delta: float | None = None
    leaderboard: tuple = ()


def objective(
    c: Constellation,
    criterion: Criterion,
    params: ChannelParams,
    grid: QuadratureGrid | None = None,
) -> float:
    """Criterion value in minimization sense.

    ``sep-a`` is the SEP union bound, ``mi-a`` is minus the detector-channel
    MI, ``mi-b`` is minus the better of the two continuous-channel MI
    characterizations.  The first two reject constellations with a point at
    the origin (the high-SNR detector cannot score one).
    """
    criterion = Criterion(criterion)
    if criterion is Criterion.SEP_A:
        return sep_union_bound(c, params).value
    if criterion is Criterion.MI_A:
        return -mi_dd(c, params)
    return -mi_dc_best(c, params, grid).bits


# --- multi-start projected gradient descent ---------------------------------


def _pack(points: np.ndarray) -> np.ndarray:
    return np.concatenate([points.real, points.imag])


def _unpack(vec: np.ndarray) -> np.ndarray:
    m = vec.size // 2
    return vec[:m] + 1j * vec[m:]


def _project(vec: np.ndarray, power: float) -> np.ndarray:
    # rescale onto the average-power sphere; the constraint is active at any
    # optimum since scaling up only reduces the effective noise
    avg = float(np.mean(vec[: vec.size // 2] ** 2 + vec[vec.size // 2 :] ** 2))
    if avg == 0.0:
        raise ValueError("cannot project an all-zero point set onto the power sphere")
    return vec * math.sqrt(power / avg)


def _central_gradient(fn, vec: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    grad = np.empty_like(vec)
    for k in range(vec.size):
        h = rel_step * max(abs(vec[k]), 1.0)
        up = vec.copy()
        up[k] += h
        down = vec.copy()
        down[k] -= h
        grad[k] = (fn(up) - fn(down)) / (2.0 * h)
    return grad


def _descend(fn, vec0: np.ndarray, power: float, search: SearchConfig):
    """Projected gradient descent with Armijo backtracking line search."""
    vec = _project(vec0, power)
    value = fn(vec)
    if not math.isfinite(value):
        return vec, value, False
    step = 1.0
    converged = False
    for _ in range(search.max_iterations):
        grad = _central_gradient(fn, vec)
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            converged = True
            break
        step = min(step * 4.0, 1e3)
        accepted = False
        while step * gnorm >= search.step_tolerance:
            cand = _project(vec - step * grad, power)
            cand_value = fn(cand)
            if math.isfinite(cand_value) and cand_value <= value - ARMIJO_C1 * step * gnorm * gnorm:
                accepted = True
                break
            step *= BACKTRACK_SHRINK
        if not accepted:
            converged = True
            break
        improvement = value - cand_value
        vec, value = cand, cand_value
        if improvement <= search.objective_tolerance * max(1.0, abs(value)):
            converged = True
            break
    return vec, value, converged


def _random_start(rng: np.random.Generator, m: int, power: float) -> np.ndarray:
    # uniform in the disk of radius sqrt(2 P), then power-projected
    radius = math.sqrt(2.0 * power) * np.sqrt(rng.uniform(0.0, 1.0, m))
    angle = rng.uniform(-math.pi, math.pi, m)
    return _project(_pack(radius * np.exp(1j * angle)), power)


def _multi_start(fn, m: int, power: float, search: SearchConfig, stream_key: int):
    best_vec, best_value, best_converged = None, math.inf, False
    per_start = []
    for s in range(search.n_starts):
        rng = derive_rng(search.seed, stream_key, s)
        vec, value, converged = _descend(fn, _random_start(rng, m, power), power, search)
        per_start.append(value)
        if value < best_value or (value == best_value and best_vec is None):
            best_vec, best_value, best_converged = vec, value, converged
    return best_vec, best_value, best_converged, per_start


def optimize_global(
    criterion: Criterion,
    params: ChannelParams,
    m: int,
    search: SearchConfig | None = None,
    power: float = 1.0,
) -> OptimizationResult:
    """Multi-start local descent over point coordinates under the power
    constraint; returns the best local optimum found.

    Gradients are central differences (relative step 1e-6); every step is
    re-projected onto the power sphere.  Reproducible for a fixed seed.  For
    ``mi-b`` the descents run separately under each likelihood kind and the
    constellation with the higher full-resolution MI is kept.
    """
    if m < 2:
        raise ValueError("need at least two points to optimize")
    criterion = Criterion(criterion)
    search = search or SearchConfig()

    if criterion is Criterion.MI_B:
        n_r, n_phi = search.descent_grid
        candidates = []
        per_start_all = []
        for key, kind in enumerate((LikelihoodKind.PHN, LikelihoodKind.SNR)):
            def surrogate(vec, _kind=kind):
                try:
                    return -_mi_surrogate(_unpack(vec), params, _kind, n_r, n_phi)
                except (AdmissibilityError, FloatingPointError):
                    return math.inf
            vec, value, converged, per_start = _multi_start(surrogate, m, power, search, key)
            per_start_all.extend(per_start)
            if vec is not None and math.isfinite(value):
                candidates.append((vec, converged))
        if not candidates:
            raise AdmissibilityError("every descent start failed; no admissible constellation found")
        scored = []
        for vec, converged in candidates:
            const = Constellation(_unpack(vec), power).normalize_power()
            est = mi_dc_best(const, params)
            scored.append((-est.bits, const, converged, est.kind.value))
        scored.sort(key=lambda t: t[0])
        value, const, converged, kind = scored[0]
        return OptimizationResult(
            const, value, criterion, params, search.n_starts, tuple(per_start_all),
            converged, search.seed, "global", kind=kind,
        )

    def fn(vec):
        # the union bound spans many decades; descending its log keeps
        # gradient scales uniform (monotone, so the argmin is unchanged)
        try:
            const = Constellation(_unpack(vec), power)
            if criterion is Criterion.SEP_A:
                return math.log(max(sep_union_bound(const, params).raw, 1e-300))
            return -mi_dd(const, params)
        except (AdmissibilityError, FloatingPointError):
            return math.inf

    vec, value, converged, per_start = _multi_start(fn, m, power, search, 0)
    if vec is None or not math.isfinite(value):
        raise AdmissibilityError("every descent start failed; no admissible constellation found")
    const = Constellation(_unpack(vec), power).normalize_power()
    return OptimizationResult(
        const, objective(const, criterion, params), criterion, params,
        search.n_starts, tuple(per_start), converged, search.seed, "global",
    )


# --- APSK enumeration --------------------------------------------------------


def enumerate_apsk(m: int):
    """All ordered ring compositions of m points: 2^(m-1) tuples, emitted in
    a fixed deterministic order (ring count, then lexicographic)."""
    if m < 1:
        raise ValueError("need at least one point")
    for rings in range(1, m + 1):
        yield from _compositions(m, rings)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(1, total - parts + 2):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


def apsk_realize(ring_sizes, p: float = 1.0):
    """Realize a ring composition as a constellation with exact power p.

    Ring l holds n_l points uniformly spaced in angle with zero phase offset
    at radius k_l * delta, where k_l counts from 0 when the first ring is a
    single center point and from 1 otherwise.  delta is solved in closed form
    from (1/M) * sum n_l r_l^2 = p.  The lone composition (1,) realizes a
    single point at the origin and is flagged degenerate.
    """
    comp = tuple(int(n) for n in ring_sizes)
    if not comp or any(n < 1 for n in comp):
        raise ValueError(f"invalid ring composition {ring_sizes}")
    m = sum(comp)
    offsets = tuple(range(len(comp))) if comp[0] == 1 else tuple(range(1, len(comp) + 1))
    denom = sum(n * k * k for n, k in zip(comp, offsets))
    degenerate = denom == 0
    delta = 0.0 if degenerate else math.sqrt(m * p / denom)
    points = []
    for n, k in zip(comp, offsets):
        radius = delta * k
        points.extend(radius * np.exp(TWO_PI_J * j / n) for j in range(n))
    config = ApskConfig(comp, delta, tuple(delta * k for k in offsets), (0.0,) * len(comp), degenerate)
    return config, Constellation(np.asarray(points), p)


def _scan_threads() -> int:
    env = os.environ.get("PHASESHAPE_THREADS")
    if env:
        return max(1, int(env))
    return min(2, os.cpu_count() or 1)


def _mib_scan_value(points, params: ChannelParams, n_r: int, n_phi: int, phase_nodes: int) -> float:
    """Best-kind MI at scan resolution, sharing one channel weight between
    the two likelihood kinds."""
    mags = np.abs(points)
    r_max = float(np.max(mags)) + 8.0 * math.sqrt(params.n0 / 2.0)
    grid = QuadratureGrid(r_max=r_max, n_r=n_r, n_phi=n_phi, phase_nodes=phase_nodes)
    rho, phi, _, _ = _polar_nodes(grid)
    weight = _channel_weight(points, params, rho, phi, phase_nodes)
    best = -math.inf
    for kind in (LikelihoodKind.PHN, LikelihoodKind.SNR):
        best = max(best, _mi_quadrature(points, params, kind, grid, weight=weight))
    return best


def optimize_apsk(
    criterion: Criterion,
    params: ChannelParams,
    m: int,
    power: float = 1.0,
    scan_grid: tuple = (96, 192),
    scan_phase_nodes: int = 12,
    top_k: int = 10,
    threads: int | None = None,
) -> OptimizationResult:
    """Exhaustive search over all 2^(m-1) ring compositions.

    Every composition is scored at reduced scan resolution; the ``top_k``
    shortlist is then re-evaluated with :func:`objective` at default
    resolution, which also yields the reported leaderboard.  Ties break
    toward the lexicographically smaller composition.  Deterministic, and
    independent of the thread count.
    """
    if m > 24:
        raise ValueError("the exhaustive composition search is limited to m <= 24")
    criterion = Criterion(criterion)
    comps = list(enumerate_apsk(m))

    def scan(comp):
        config, const = apsk_realize(comp, power)
        if criterion in (Criterion.SEP_A, Criterion.MI_A):
            if config.degenerate or config.radii[0] == 0.0:
                return math.inf  # origin point: inadmissible under the high-SNR detector
            if criterion is Criterion.SEP_A:
                return sep_union_bound(const, params).value
            return -mi_dd(const, params)
        if config.degenerate:
            return math.inf
        return -_mib_scan_value(const.points, params, *scan_grid, scan_phase_nodes)

    workers = threads if threads is not None else _scan_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(scan, comps, chunksize=256))
    else:
        scores = [scan(comp) for comp in comps]

    order = sorted(range(len(comps)), key=lambda i: (scores[i], comps[i]))
    shortlist = [i for i in order if math.isfinite(scores[i])][:top_k]
    if not shortlist:
        raise AdmissibilityError("no admissible composition for this criterion")

    refined = []
    for i in shortlist:
        config, const = apsk_realize(comps[i], power)
        refined.append((objective(const, criterion, params), comps[i], config, const))
    refined.sort(key=lambda t: (t[0], t[1]))
    value, comp, config, const = refined[0]
    leaderboard = tuple(
        {"rank": r + 1, "composition": entry[1], "delta": entry[2].delta, "objective": entry[0]}
        for r, entry in enumerate(refined)
    )
    return OptimizationResult(
        const, value, criterion, params, len(comps), tuple(scores[i] for i in shortlist),
        True, None, "apsk", composition=comp, delta=config.delta, leaderboard=leaderboard,
    )
