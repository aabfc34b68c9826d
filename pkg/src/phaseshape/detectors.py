"""Approximate maximum-likelihood detectors for the phase-noise channel.

Two Gaussian approximations of the received-sample likelihood are provided,
each with its argmin decision metric:

* ``gap-d`` -- a bivariate Gaussian in (|r|, arg r), accurate when the
  instantaneous SNR |x|^2/N0 is high, for any phase-noise variance.  Its
  polar form is singular for a symbol at the origin.
* ``lpn-d`` -- a bivariate Gaussian in the frame rotated onto the symbol,
  from linearizing the rotation (e^{j theta} ~ 1 + j theta).  Accurate for
  small instantaneous phase noise at any SNR, and defined at the origin.

A plain Euclidean nearest-neighbor rule is included as a baseline.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .core import ChannelParams, Constellation, wrap_angle

TWO_PI = 2.0 * math.pi


class AdmissibilityError(ValueError):
    """An operation was asked to score a symbol it is not defined for."""


class DetectorKind(str, Enum):
    GAP_D = "gap-d"
    LPN_D = "lpn-d"
    EUCLIDEAN = "euclidean"


def _angular_var(x_mag: float, params: ChannelParams) -> float:
    # variance of the received angle around arg x at high instantaneous SNR
    return params.sigma_p2 + params.n0 / (2.0 * x_mag * x_mag)


def _total_tangential_var(x_mag: float, params: ChannelParams) -> float:
    # variance of the tangential component: phase noise plus AWGN
    return params.sigma_p2 * x_mag * x_mag + params.n0 / 2.0


def likelihood_snr(r, x: complex, params: ChannelParams):
    """High-SNR likelihood of received sample(s) ``r`` given symbol ``x``.

    Gaussian in (|r|, arg r) with radial variance N0/2 and angular variance
    sigma_p^2 + N0/(2|x|^2); the angle residual is wrapped to (-pi, pi].
    Undefined for |x| = 0.
    """
    m = abs(x)
    if m == 0.0:
        raise AdmissibilityError("the high-SNR likelihood is singular for a symbol at the origin")
    v_r = params.n0 / 2.0
    v_phi = _angular_var(m, params)
    w = _total_tangential_var(m, params)
    r_arr = np.asarray(r, dtype=np.complex128)
    dmag = np.abs(r_arr) - m
    dphi = wrap_angle(np.angle(r_arr) - math.atan2(x.imag, x.real))
    expo = -0.5 * (dmag * dmag / v_r + dphi * dphi / v_phi)
    out = np.exp(expo) / (TWO_PI * math.sqrt(v_r * w))
    return float(out) if np.ndim(r) == 0 else out


def gap_d_metric(r, x: complex, params: ChannelParams):
    """Decision metric of the high-SNR detector (lower is better).

    Equals -2*ln(likelihood_snr) minus the symbol-independent constant
    2*ln(2*pi) + ln(N0/2).
    """
    m = abs(x)
    if m == 0.0:
        raise AdmissibilityError("the high-SNR metric is singular for a symbol at the origin")
    v_r = params.n0 / 2.0
    v_phi = _angular_var(m, params)
    w = _total_tangential_var(m, params)
    r_arr = np.asarray(r, dtype=np.complex128)
    dmag = np.abs(r_arr) - m
    dphi = wrap_angle(np.angle(r_arr) - math.atan2(x.imag, x.real))
    out = dmag * dmag / v_r + dphi * dphi / v_phi + math.log(w)
    return float(out) if np.ndim(r) == 0 else out


def likelihood_phn(r, x: complex, params: ChannelParams):
    """Low-phase-noise likelihood of received sample(s) ``r`` given ``x``.

    Gaussian in (u, v) = (Re{r e^{-j arg x}} - |x|, Im{r e^{-j arg x}}) with
    variances N0/2 and sigma_p^2 |x|^2 + N0/2.  For x at the origin both
    variances reduce to N0/2 (a circular Gaussian), which is exact there.
    """
    m = abs(x)
    v_r = params.n0 / 2.0
    w = _total_tangential_var(m, params)
    phase = math.atan2(x.imag, x.real) if m > 0 else 0.0
    z = np.asarray(r, dtype=np.complex128) * np.exp(-1j * phase)
    u = z.real - m
    v = z.imag
    out = np.exp(-0.5 * (u * u / v_r + v * v / w)) / (TWO_PI * math.sqrt(v_r * w))
    return float(out) if np.ndim(r) == 0 else out


def lpn_d_metric(r, x: complex, params: ChannelParams):
    """Decision metric of the low-phase-noise detector (lower is better).

    With sigma_p^2 = 0 this reduces to |r - x|^2/(N0/2) + log(N0/2), i.e. the
    Euclidean rule.
    """
    m = abs(x)
    v_r = params.n0 / 2.0
    w = _total_tangential_var(m, params)
    phase = math.atan2(x.imag, x.real) if m > 0 else 0.0
    z = np.asarray(r, dtype=np.complex128) * np.exp(-1j * phase)
    u = z.real - m
    v = z.imag
    out = u * u / v_r + v * v / w + math.log(w)
    return float(out) if np.ndim(r) == 0 else out


def metric_matrix(r, c: Constellation, params: ChannelParams, kind: DetectorKind) -> np.ndarray:
    """Decision metrics for samples ``r`` against every constellation point.

    Returns shape (len(r), M); row n holds the metric of sample n under each
    symbol hypothesis.  Vectorized over samples for Monte Carlo use.
    """
    kind = DetectorKind(kind)
    r_arr = np.atleast_1d(np.asarray(r, dtype=np.complex128))
    pts = c.points
    mags = c.magnitudes()
    if kind is DetectorKind.GAP_D:
        if np.any(mags == 0.0):
            raise AdmissibilityError(
                "gap-d cannot score a constellation with a point at the origin; use lpn-d"
            )
        v_r = params.n0 / 2.0
        v_phi = params.sigma_p2 + params.n0 / (2.0 * mags * mags)
        w = params.sigma_p2 * mags * mags + params.n0 / 2.0
        dmag = np.abs(r_arr)[:, None] - mags[None, :]
        dphi = wrap_angle(np.angle(r_arr)[:, None] - c.angles()[None, :])
        return dmag * dmag / v_r + dphi * dphi / v_phi[None, :] + np.log(w)[None, :]
    if kind is DetectorKind.LPN_D:
        v_r = params.n0 / 2.0
        w = params.sigma_p2 * mags * mags + params.n0 / 2.0
        phases = np.where(mags > 0, c.angles(), 0.0)
        z = r_arr[:, None] * np.exp(-1j * phases)[None, :]
        u = z.real - mags[None, :]
        v = z.imag
        return u * u / v_r + v * v / w[None, :] + np.log(w)[None, :]
    d = r_arr[:, None] - pts[None, :]
    return d.real * d.real + d.imag * d.imag


def decide(r, c: Constellation, params: ChannelParams, kind: DetectorKind) -> np.ndarray:
    """Metric-minimizing symbol index for each sample; ties go to the lowest
    index, so runs are reproducible."""
    return np.argmin(metric_matrix(r, c, params, kind), axis=1)


def detect(r: complex, c: Constellation, params: ChannelParams, kind: DetectorKind) -> int:
    """Decide a single received sample.  See :func:`decide`."""
    return int(decide(np.asarray([r]), c, params, kind)[0])
