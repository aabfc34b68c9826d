"""Seeded Monte Carlo estimators: SEP, transition matrices, and MI.

These are the empirical counterparts of the analytic metrics.  Each run is
reproducible from (inputs, seed); long runs periodically checkpoint their
counts and generator state to a resumable file.  The MI estimator draws from
the true channel and scores with the chosen approximate likelihood, i.e. it
estimates exactly the functional that the quadrature in
:mod:`phaseshape.metrics` integrates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ChannelParams, Constellation, make_rng, sample_channel
from .detectors import DetectorKind, decide
from .metrics import DENSITY_FLOOR, LikelihoodKind, TransitionMatrix, likelihoods_at

CHUNK = 1 << 18
CHECKPOINT_INTERVAL = 10_000_000


@dataclass(frozen=True)
class SimReport:
    """One simulation estimate with its standard error and provenance."""

    estimate: float
    std_error: float
    n_samples: int
    seed: int
    kind: str
    params: dict


def merge_reports(reports) -> SimReport:
    """Combine independent chunk reports into one.

    The merged estimate is the sample-size-weighted mean and the merged
    standard error is sqrt(sum (n_k * se_k)^2) / N; for counts-based
    estimates this equals pooling the raw counts.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to merge")
    n_total = sum(r.n_samples for r in reports)
    est = sum(r.n_samples * r.estimate for r in reports) / n_total
    se = math.sqrt(sum((r.n_samples * r.std_error) ** 2 for r in reports)) / n_total
    first = reports[0]
    return SimReport(est, se, n_total, first.seed, first.kind, first.params)


def _binomial_std_error(errors: int, n: int) -> float:
    # rule-of-three upper bound when no (or only) error events were seen
    if errors == 0 or errors == n:
        return 3.0 / n
    p = errors / n
    return math.sqrt(p * (1.0 - p) / n)


def _run_hash(c: Constellation, params: ChannelParams, kind: str, n: int, seed: int) -> str:
    import hashlib

    payload = json.dumps(
        [c.content_hash(), params.snapshot(), str(kind), int(n), int(seed)], separators=(",", ":")
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _load_checkpoint(path, run_hash):
    path = Path(path)
    if not path.exists():
        return None
    state = json.loads(path.read_text())
    if state.get("run") != run_hash:
        return None
    return state


def _save_checkpoint(path, state):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(state))
    tmp.replace(path)


def empirical_sep(
    c: Constellation,
    params: ChannelParams,
    kind: DetectorKind,
    n: int,
    seed: int,
    checkpoint_path=None,
    checkpoint_interval: int = CHECKPOINT_INTERVAL,
) -> SimReport:
    """Symbol error rate of a detector by simulation.

    Draws symbols uniformly, passes them through the channel, detects, and
    reports the error fraction with its binomial standard error.
    """
    if n < 10_000:
        raise ValueError("use at least 1e4 samples for a meaningful error rate")
    kind = DetectorKind(kind)
    run = _run_hash(c, params, kind.value, n, seed)
    rng = make_rng(seed)
    done, errors = 0, 0
    state = _load_checkpoint(checkpoint_path, run) if checkpoint_path else None
    if state is not None:
        done, errors = state["done"], state["errors"]
        rng.bit_generator.state = state["rng_state"]
    last_saved = done
    while done < n:
        size = min(CHUNK, n - done)
        idx = rng.integers(0, c.size, size)
        r = sample_channel(c.points[idx], params, rng)
        errors += int(np.count_nonzero(decide(r, c, params, kind) != idx))
        done += size
        if checkpoint_path and done - last_saved >= checkpoint_interval and done < n:
            _save_checkpoint(
                checkpoint_path,
                {"run": run, "done": done, "errors": errors, "rng_state": rng.bit_generator.state},
            )
            last_saved = done
    p = errors / n
    return SimReport(p, _binomial_std_error(errors, n), n, seed, kind.value, params.snapshot())


def empirical_transition_matrix(
    c: Constellation,
    params: ChannelParams,
    kind: DetectorKind,
    n: int,
    seed: int,
    checkpoint_path=None,
    checkpoint_interval: int = CHECKPOINT_INTERVAL,
):
    """Row-conditional decision frequencies.

    Each symbol is transmitted n // M times, so rows sum to 1 exactly.
    Returns (TransitionMatrix, counts).
    """
    m = c.size
    if n < 100 * m * m:
        raise ValueError(f"transition estimation needs n >= 100*M^2 = {100 * m * m}")
    kind = DetectorKind(kind)
    per_row = n // m
    run = _run_hash(c, params, kind.value, n, seed)
    rng = make_rng(seed)
    counts = np.zeros((m, m), dtype=np.int64)
    row, done_in_row = 0, 0
    state = _load_checkpoint(checkpoint_path, run) if checkpoint_path else None
    if state is not None:
        counts = np.array(state["counts"], dtype=np.int64)
        row, done_in_row = state["row"], state["done_in_row"]
        rng.bit_generator.state = state["rng_state"]
    total_done = row * per_row + done_in_row
    last_saved = total_done
    while row < m:
        size = min(CHUNK, per_row - done_in_row)
        r = sample_channel(np.full(size, c.points[row]), params, rng)
        counts[row] += np.bincount(decide(r, c, params, kind), minlength=m)
        done_in_row += size
        total_done += size
        if done_in_row == per_row:
            row += 1
            done_in_row = 0
        if checkpoint_path and total_done - last_saved >= checkpoint_interval and row < m:
            _save_checkpoint(
                checkpoint_path,
                {
                    "run": run,
                    "counts": counts.tolist(),
                    "row": row,
                    "done_in_row": done_in_row,
                    "rng_state": rng.bit_generator.state,
                },
            )
            last_saved = total_done
    probs = counts / per_row
    return TransitionMatrix(probs, np.zeros(m, dtype=bool)), counts


def empirical_mi_dc(
    c: Constellation,
    params: ChannelParams,
    kind: LikelihoodKind,
    n: int,
    seed: int,
) -> SimReport:
    """Sample-mean estimate of the continuous-output MI under a likelihood.

    Averages log2(M * f(r|x) / sum_k f(r|x_k)) over true channel draws, with
    the standard error of the mean.  Matches the quadrature in
    :func:`phaseshape.metrics.mi_dc` up to discretization error.
    """
    if n < 100_000:
        raise ValueError("use at least 1e5 samples for a stable MI estimate")
    kind = LikelihoodKind(kind)
    rng = make_rng(seed)
    m = c.size
    total, total_sq, done = 0.0, 0.0, 0
    while done < n:
        size = min(CHUNK, n - done)
        idx = rng.integers(0, m, size)
        r = sample_channel(c.points[idx], params, rng)
        f = likelihoods_at(r, c, params, kind)
        mix = np.clip(f.sum(axis=1), DENSITY_FLOOR, None)
        fi = np.clip(f[np.arange(size), idx], DENSITY_FLOOR, None)
        vals = math.log2(m) + np.log2(fi / mix)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += size
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return SimReport(mean, math.sqrt(var / n), n, seed, kind.value, params.snapshot())
