"""Analytic performance functionals for the phase-noise channel.

Covers the pairwise error statistics of the high-SNR detector, the SEP union
bound built from them, the asymptotic (N0 -> 0) error floor, the mutual
information of the discrete detector channel, and the mutual information of
the continuous-output channel scored under either approximate likelihood.

The continuous-output MI is the auxiliary-channel rate: expectation, under
the true channel law, of log2(M * f(r|x) / sum_k f(r|x_k)) with f the chosen
approximate likelihood.  It is evaluated on a polar grid by a composite
trapezoidal rule; the true channel density is expanded over the phase with
Gauss-Hermite nodes.  A Monte Carlo estimator of the identical functional
lives in :mod:`phaseshape.montecarlo`, which is what makes the two a valid
cross-check pair.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import erfc

from .core import ChannelParams, Constellation, wrap_angle
from .detectors import AdmissibilityError

TWO_PI = 2.0 * math.pi

# Densities are floored here before logs to keep integrands finite.
DENSITY_FLOOR = 1e-300

# Magnitudes closer than this (relative) count as equal energy in the floor.
EQUAL_ENERGY_REL_TOL = 1e-9

# Smallest diagonal transition probability before a row is renormalized.
DIAGONAL_FLOOR = 1e-12


def q_function(z):
    """Gaussian tail probability via the complementary error function.

    Relative accuracy is that of erfc (better than 1e-12 on [0, 38]);
    arguments beyond ~38 underflow to exactly 0 in double precision.
    """
    return 0.5 * erfc(np.asarray(z, dtype=float) / math.sqrt(2.0))


# --- pairwise error statistics ---------------------------------------------


@dataclass(frozen=True)
class PairwiseStats:
    """Moments of the high-SNR metric difference between two symbols.

    For transmitted symbol i and rival j, the detector picks j when the
    metric difference crosses the deterministic log-variance shift.  Fields:

    radial_gap        squared magnitude gap over the radial variance N0/2
    angular_gap       squared wrapped angle gap over the rival's angular
                      variance sigma_p^2 + N0/(2|x_j|^2)
    variance_ratio    angular-variance ratio, transmitted over rival
    log_ratio         log of the tangential-variance ratio (the metric's
                      deterministic offset)
    mean_diff         mean of the quadratic part of the metric difference,
                      1 - (radial_gap + angular_gap + variance_ratio)
    var_diff          its variance, 2 + 4a + 2c^2 + 4bc - 4c with
                      a, b, c the three fields above
    """

    radial_gap: float
    angular_gap: float
    variance_ratio: float
    log_ratio: float
    mean_diff: float
    var_diff: float

    @property
    def degenerate(self) -> bool:
        return self.var_diff <= 0.0


def pairwise_stats(c: Constellation, i: int, j: int, params: ChannelParams) -> PairwiseStats:
    """Error-event statistics for deciding symbol j when symbol i was sent."""
    if i == j:
        raise ValueError("pairwise statistics need two distinct symbols")
    mags = c.magnitudes()
    angs = c.angles()
    if mags[i] == 0.0 or mags[j] == 0.0:
        raise AdmissibilityError("pairwise statistics are undefined for a symbol at the origin")
    v_r = params.n0 / 2.0
    v_phi_i = params.sigma_p2 + params.n0 / (2.0 * mags[i] ** 2)
    v_phi_j = params.sigma_p2 + params.n0 / (2.0 * mags[j] ** 2)
    w_i = mags[i] ** 2 * params.sigma_p2 + v_r
    w_j = mags[j] ** 2 * params.sigma_p2 + v_r
    a = (mags[i] - mags[j]) ** 2 / v_r
    b = wrap_angle(angs[i] - angs[j]) ** 2 / v_phi_j
    ratio = v_phi_i / v_phi_j
    y = math.log(w_i / w_j)
    mean = 1.0 - (a + b + ratio)
    var = 2.0 + 4.0 * a + 2.0 * ratio * ratio + 4.0 * b * ratio - 4.0 * ratio
    return PairwiseStats(a, b, ratio, y, mean, var)


def pairwise_error_prob(stats: PairwiseStats) -> float:
    """Probability that the rival symbol beats the transmitted one.

    Q((log_ratio - mean_diff) / sqrt(var_diff)).  A non-positive variance is
    a degenerate pair; it is flagged with a warning and scored 0.5.
    """
    if stats.var_diff <= 0.0:
        warnings.warn("degenerate symbol pair (non-positive metric-difference variance)", RuntimeWarning)
        return 0.5
    return float(q_function((stats.log_ratio - stats.mean_diff) / math.sqrt(stats.var_diff)))


def _pairwise_prob_matrix(c: Constellation, params: ChannelParams) -> np.ndarray:
    """All ordered pairwise error probabilities at once; diagonal is zero."""
    mags = c.magnitudes()
    angs = c.angles()
    if np.any(mags == 0.0):
        raise AdmissibilityError("pairwise statistics are undefined for a symbol at the origin")
    v_r = params.n0 / 2.0
    v_phi = params.sigma_p2 + params.n0 / (2.0 * mags * mags)
    w = mags * mags * params.sigma_p2 + v_r
    dmag = mags[:, None] - mags[None, :]
    a = dmag * dmag / v_r
    dphi = wrap_angle(angs[:, None] - angs[None, :])
    b = dphi * dphi / v_phi[None, :]
    ratio = v_phi[:, None] / v_phi[None, :]
    y = np.log(w)[:, None] - np.log(w)[None, :]
    mean = 1.0 - (a + b + ratio)
    var = 2.0 + 4.0 * a + 2.0 * ratio * ratio + 4.0 * b * ratio - 4.0 * ratio
    np.fill_diagonal(var, 1.0)  # unused; avoids 0/0 on the diagonal
    if np.any(var <= 0.0):
        warnings.warn("degenerate symbol pair (non-positive metric-difference variance)", RuntimeWarning)
    p = np.where(var > 0.0, q_function((y - mean) / np.sqrt(np.abs(var))), 0.5)
    np.fill_diagonal(p, 0.0)
    return p


@dataclass(frozen=True)
class UnionBound:
    """SEP union bound; ``value`` is clipped to [0, 1], ``raw`` is not."""

    value: float
    raw: float


def sep_union_bound(c: Constellation, params: ChannelParams) -> UnionBound:
    """Union bound on the symbol error probability of the high-SNR detector:
    the mean over transmitted symbols of all pairwise error probabilities."""
    if c.size == 1:
        return UnionBound(0.0, 0.0)
    raw = float(_pairwise_prob_matrix(c, params).sum() / c.size)
    return UnionBound(min(max(raw, 0.0), 1.0), raw)


def sep_floor(c: Constellation, sigma_p2: float, paper_literal: bool = False) -> float:
    """Symbol error probability floor as the AWGN vanishes.

    Only equal-energy pairs survive the N0 -> 0 limit; each contributes
    Q(|wrapped angle gap| / (2 sigma_p)), which is the limit of the pairwise
    error probability.  Returns 0 when all magnitudes are distinct.

    ``paper_literal`` switches to the audit form Q(sqrt(|angle gap|/sigma_p)),
    kept only for comparison; it does not reproduce the derived limit.
    """
    if sigma_p2 <= 0:
        raise ValueError("the error floor needs a positive phase-noise variance")
    mags = c.magnitudes()
    angs = c.angles()
    sigma_p = math.sqrt(sigma_p2)
    m = c.size
    total = 0.0
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            if abs(mags[i] - mags[j]) > EQUAL_ENERGY_REL_TOL * max(mags[i], mags[j]):
                continue
            gap = abs(wrap_angle(angs[j] - angs[i]))
            if paper_literal:
                total += float(q_function(math.sqrt(gap / sigma_p)))
            else:
                total += float(q_function(gap / (2.0 * sigma_p)))
    return total / m


# --- discrete detector channel ----------------------------------------------


@dataclass(frozen=True)
class TransitionMatrix:
    """Symbol transition probabilities p[i, j] = P(decide j | sent i).

    Rows sum to 1.  ``clamped`` marks rows whose raw diagonal went negative
    (the pairwise approximation breaking down at low SNR) and were
    renormalized after flooring the diagonal.
    """

    probs: np.ndarray
    clamped: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        f = np.asarray(self.clamped, dtype=bool)
        f.setflags(write=False)
        object.__setattr__(self, "clamped", f)


def transition_matrix(c: Constellation, params: ChannelParams) -> TransitionMatrix:
    """Transition matrix of the channel formed by phase noise, AWGN and the
    high-SNR detector, with off-diagonals from the pairwise probabilities and
    the diagonal absorbing the remainder."""
    m = c.size
    p = _pairwise_prob_matrix(c, params)
    off_sum = p.sum(axis=1)
    raw_diag = 1.0 - off_sum
    clamped = raw_diag < DIAGONAL_FLOOR
    probs = p.copy()
    for i in range(m):
        if clamped[i]:
            probs[i, :] *= (1.0 - DIAGONAL_FLOOR) / off_sum[i]
            probs[i, i] = DIAGONAL_FLOOR
        else:
            probs[i, i] = raw_diag[i]
    return TransitionMatrix(probs, clamped)


def mi_from_transition_probs(probs: np.ndarray) -> float:
    """MI (bits) of a uniform-input discrete channel given its transition
    matrix, with 0*log 0 := 0 and the result clipped to [0, log2 M]."""
    p = np.asarray(probs, dtype=float)
    m = p.shape[0]
    col = p.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where((p > 0.0) & (col[None, :] > 0.0), p * np.log2(p / np.where(col > 0, col, 1.0)[None, :]), 0.0)
    bits = math.log2(m) + float(terms.sum()) / m
    return min(max(bits, 0.0), math.log2(m))


def mi_dd(c: Constellation, params: ChannelParams) -> float:
    """Mutual information (bits) of the discrete channel input -> detected
    symbol, from the analytic transition matrix."""
    return mi_from_transition_probs(transition_matrix(c, params).probs)


# --- continuous-output channel MI -------------------------------------------


class LikelihoodKind(str, Enum):
    SNR = "snr-likelihood"
    PHN = "phn-likelihood"


@dataclass(frozen=True)
class QuadratureGrid:
    """Polar integration grid.

    ``r_max`` must cover the largest symbol magnitude plus 8 radial noise
    deviations; ``phase_nodes`` sets the Gauss-Hermite order used to expand
    the channel density over the phase-noise variable.
    """

    r_max: float
    n_r: int = 512
    n_phi: int = 1024
    phase_nodes: int = 64

    def __post_init__(self):
        if self.n_r < 16 or self.n_phi < 16:
            raise ValueError("the grid needs at least 16 steps per dimension")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        if self.phase_nodes < 1:
            raise ValueError("phase_nodes must be >= 1")

    @classmethod
    def for_channel(
        cls,
        c: Constellation,
        params: ChannelParams,
        n_r: int = 512,
        n_phi: int = 1024,
        phase_nodes: int = 64,
    ) -> "QuadratureGrid":
        r_max = float(np.max(c.magnitudes())) + 8.0 * math.sqrt(params.n0 / 2.0)
        return cls(r_max=r_max, n_r=n_r, n_phi=n_phi, phase_nodes=phase_nodes)

    def halved(self) -> "QuadratureGrid":
        return QuadratureGrid(self.r_max, max(16, self.n_r // 2), max(16, self.n_phi // 2), self.phase_nodes)


@dataclass(frozen=True)
class MiEstimate:
    """MI value in bits with its half-grid discretization error estimate."""

    bits: float
    error_estimate: float
    kind: LikelihoodKind
    flags: tuple = ()


def _polar_nodes(grid: QuadratureGrid):
    rho = np.linspace(0.0, grid.r_max, grid.n_r)
    phi = -np.pi + TWO_PI * np.arange(grid.n_phi) / grid.n_phi
    w_rho = np.full(grid.n_r, rho[1] - rho[0])
    w_rho[0] *= 0.5
    w_rho[-1] *= 0.5
    w_phi = TWO_PI / grid.n_phi  # trapezoid on the periodic angle
    return rho, phi, w_rho, w_phi


def _likelihoods_on_grid(points, params: ChannelParams, kind: LikelihoodKind, rho, phi):
    """Likelihood of every grid point under every symbol; shape (M, n_r, n_phi).

    For the snr kind a symbol exactly at the origin is scored with the exact
    circular-Gaussian density (the channel adds no rotation to a zero symbol),
    since the polar form is singular there.
    """
    mags = np.abs(points)
    angs = np.angle(points)
    v_r = params.n0 / 2.0
    m = len(points)
    f = np.empty((m, rho.size, phi.size))
    if kind is LikelihoodKind.SNR:
        for k in range(m):
            if mags[k] == 0.0:
                f[k] = (np.exp(-rho * rho / params.n0) / (math.pi * params.n0))[:, None]
                continue
            v_phi = params.sigma_p2 + params.n0 / (2.0 * mags[k] ** 2)
            w = mags[k] ** 2 * params.sigma_p2 + v_r
            rad = np.exp(-0.5 * (rho - mags[k]) ** 2 / v_r)
            ang = np.exp(-0.5 * wrap_angle(phi - angs[k]) ** 2 / v_phi)
            f[k] = np.outer(rad, ang) / (TWO_PI * math.sqrt(v_r * w))
        return f
    w = mags * mags * params.sigma_p2 + v_r
    cosd = np.cos(phi[None, :] - angs[:, None])
    sind = np.sin(phi[None, :] - angs[:, None])
    for k in range(m):
        u = rho[:, None] * cosd[k][None, :] - mags[k]
        v = rho[:, None] * sind[k][None, :]
        f[k] = np.exp(-0.5 * (u * u / v_r + v * v / w[k])) / (TWO_PI * math.sqrt(v_r * w[k]))
    return f


def _channel_weight(points, params: ChannelParams, rho, phi, phase_nodes: int):
    """True channel density on the grid, times the polar Jacobian rho.

    The density of x e^{j theta} + n is a Gaussian mixture over the phase,
    integrated with Gauss-Hermite nodes; for sigma_p2 = 0 it is a single
    Gaussian.  Shape (M, n_r, n_phi).
    """
    m = len(points)
    if params.sigma_p2 > 0:
        nodes, weights = np.polynomial.hermite_e.hermegauss(phase_nodes)
        thetas = math.sqrt(params.sigma_p2) * nodes
        omegas = weights / math.sqrt(TWO_PI)
    else:
        thetas = np.array([0.0])
        omegas = np.array([1.0])
    grid = rho[:, None] * np.exp(1j * phi)[None, :]
    out = np.empty((m, rho.size, phi.size))
    for k in range(m):
        acc = np.zeros((rho.size, phi.size))
        for theta, omega in zip(thetas, omegas):
            mu = points[k] * np.exp(1j * theta)
            d = grid - mu
            acc += omega * np.exp(-(d.real * d.real + d.imag * d.imag) / params.n0)
        out[k] = acc * (rho[:, None] / (math.pi * params.n0))
    return out


def _mi_quadrature(
    points,
    params: ChannelParams,
    kind: LikelihoodKind,
    grid: QuadratureGrid,
    weight: np.ndarray | None = None,
) -> float:
    """Raw (unclipped) auxiliary-channel MI in bits on the given grid.

    ``weight`` may carry a precomputed channel weight for this grid so that
    callers evaluating both likelihood kinds pay for it once.
    """
    m = len(points)
    if m == 1:
        return 0.0
    rho, phi, w_rho, w_phi = _polar_nodes(grid)
    f = _likelihoods_on_grid(points, params, kind, rho, phi)
    mix = np.clip(f.sum(axis=0), DENSITY_FLOOR, None)
    log_mix = np.log2(mix)
    if weight is None:
        weight = _channel_weight(points, params, rho, phi, grid.phase_nodes)
    total = 0.0
    for i in range(m):
        integrand = np.log2(np.clip(f[i], DENSITY_FLOOR, None)) - log_mix
        total += float(np.einsum("rp,rp,r->", weight[i], integrand, w_rho)) * w_phi
    return math.log2(m) + total / m


def mi_dc(
    c: Constellation,
    params: ChannelParams,
    kind: LikelihoodKind,
    grid: QuadratureGrid | None = None,
) -> MiEstimate:
    """MI (bits) of the discrete-input continuous-output channel, scored with
    the chosen approximate likelihood.

    Composite trapezoidal quadrature over a polar grid, weighted by the true
    channel density.  The returned error estimate is the difference against
    the half-resolution grid.  The value is clipped to [0, log2 M].
    """
    kind = LikelihoodKind(kind)
    if grid is None:
        grid = QuadratureGrid.for_channel(c, params)
    flags = []
    if kind is LikelihoodKind.SNR and np.any(c.magnitudes() == 0.0):
        flags.append("origin-exact-density")
    full = _mi_quadrature(c.points, params, kind, grid)
    half = _mi_quadrature(c.points, params, kind, grid.halved())
    bits = min(max(full, 0.0), math.log2(c.size)) if c.size > 1 else 0.0
    if bits != full:
        flags.append("clipped")
    return MiEstimate(bits, abs(full - half), kind, tuple(flags))


def mi_dc_best(
    c: Constellation,
    params: ChannelParams,
    grid: QuadratureGrid | None = None,
) -> MiEstimate:
    """Evaluate the continuous-output MI under both likelihood kinds and
    return the higher one with its kind label."""
    phn = mi_dc(c, params, LikelihoodKind.PHN, grid)
    snr = mi_dc(c, params, LikelihoodKind.SNR, grid)
    return snr if snr.bits > phn.bits else phn


def likelihoods_at(r, c: Constellation, params: ChannelParams, kind: LikelihoodKind) -> np.ndarray:
    """Likelihood of received samples under every symbol; shape (n, M).

    Applies the same origin handling as the quadrature, so the Monte Carlo
    estimator in :mod:`phaseshape.montecarlo` scores the identical functional.
    """
    kind = LikelihoodKind(kind)
    r_arr = np.atleast_1d(np.asarray(r, dtype=np.complex128))
    mags = c.magnitudes()
    angs = c.angles()
    v_r = params.n0 / 2.0
    out = np.empty((r_arr.size, c.size))
    if kind is LikelihoodKind.SNR:
        r_mag = np.abs(r_arr)
        r_ang = np.angle(r_arr)
        for k in range(c.size):
            if mags[k] == 0.0:
                out[:, k] = np.exp(-r_mag * r_mag / params.n0) / (math.pi * params.n0)
                continue
            v_phi = params.sigma_p2 + params.n0 / (2.0 * mags[k] ** 2)
            w = mags[k] ** 2 * params.sigma_p2 + v_r
            dmag = r_mag - mags[k]
            dphi = wrap_angle(r_ang - angs[k])
            out[:, k] = np.exp(-0.5 * (dmag * dmag / v_r + dphi * dphi / v_phi)) / (
                TWO_PI * math.sqrt(v_r * w)
            )
        return out
    w = mags * mags * params.sigma_p2 + v_r
    for k in range(c.size):
        z = r_arr * np.exp(-1j * (angs[k] if mags[k] > 0 else 0.0))
        u = z.real - mags[k]
        v = z.imag
        out[:, k] = np.exp(-0.5 * (u * u / v_r + v * v / w[k])) / (TWO_PI * math.sqrt(v_r * w[k]))
    return out


def _mi_surrogate(points, params: ChannelParams, kind: LikelihoodKind, n_r: int, n_phi: int) -> float:
    """Cheap self-weighted MI used inside optimization descents.

    Weights the integrand with the approximate likelihood itself instead of
    the true channel density, avoiding the phase expansion.  Smooth in the
    point coordinates; only the final reported values use :func:`mi_dc`.
    """
    m = len(points)
    if m == 1:
        return 0.0
    mags = np.abs(points)
    v_r = params.n0 / 2.0
    w = mags * mags * params.sigma_p2 + v_r
    r_max = float(np.max(np.sqrt((mags + 8.0 * math.sqrt(v_r)) ** 2 + 64.0 * w)))
    grid = QuadratureGrid(r_max=r_max, n_r=n_r, n_phi=n_phi, phase_nodes=1)
    rho, phi, w_rho, w_phi = _polar_nodes(grid)
    f = _likelihoods_on_grid(points, params, kind, rho, phi)
    mix = np.clip(f.sum(axis=0), DENSITY_FLOOR, None)
    log_mix = np.log2(mix)
    total = 0.0
    for i in range(m):
        integrand = np.log2(np.clip(f[i], DENSITY_FLOOR, None)) - log_mix
        total += float(np.einsum("rp,rp,r->", f[i] * rho[:, None], integrand, w_rho)) * w_phi
    return math.log2(m) + total / m


def metric_record(
    c: Constellation,
    params: ChannelParams,
    metric: str,
    value: float,
    error_estimate: float | None = None,
    flags=(),
) -> dict:
    """JSON-ready record of one metric evaluation."""
    return {
        "constellation_hash": c.content_hash(),
        "sigma_p2": params.sigma_p2,
        "eb_n0_db": params.eb_n0_db,
        "metric": metric,
        "value": value,
        "error_estimate": error_estimate,
        "flags": list(flags),
    }
