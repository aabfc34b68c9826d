"""Domain types and the channel model.

A constellation is an ordered set of complex symbols with an average-power
budget.  The channel rotates each transmitted symbol by a zero-mean Gaussian
phase and adds circular complex Gaussian noise; successive uses are
independent.  Points are plain Python/NumPy complex numbers throughout.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * math.pi

# Power budgets are enforced to this relative accuracy.
POWER_REL_TOL = 1e-12


def wrap_angle(delta):
    """Wrap an angle difference (radians) to the principal interval (-pi, pi].

    Accepts scalars or arrays.  Plain differences of angles near the +-pi
    boundary would otherwise inflate quadratic angle penalties.
    """
    d = np.asarray(delta, dtype=float)
    wrapped = np.mod(d + np.pi, TWO_PI) - np.pi
    wrapped = np.where(wrapped == -np.pi, np.pi, wrapped)
    if np.ndim(delta) == 0:
        return float(wrapped)
    return wrapped


def eb_n0_to_n0(eb_n0_db: float, m: int, p: float) -> float:
    """Convert SNR per bit (dB) to the total complex-noise variance N0.

    Uses Es = P and Es/N0 = (Eb/N0) * log2(M), so
    N0 = P / (log2(M) * 10**(Eb/N0 / 10)).
    """
    if m < 2:
        raise ValueError(f"constellation order must be >= 2 to carry bits, got m={m}")
    if p <= 0:
        raise ValueError(f"average power must be positive, got p={p}")
    return p / (math.log2(m) * 10.0 ** (eb_n0_db / 10.0))


def n0_to_eb_n0(n0: float, m: int, p: float) -> float:
    """Inverse of :func:`eb_n0_to_n0`."""
    if m < 2:
        raise ValueError(f"constellation order must be >= 2 to carry bits, got m={m}")
    if p <= 0 or n0 <= 0:
        raise ValueError("power and N0 must be positive")
    return 10.0 * math.log10(p / (math.log2(m) * n0))


@dataclass(frozen=True)
class ChannelParams:
    """Memoryless phase-noise channel parameters.

    Attributes
    ----------
    sigma_p2 : float
        Phase-noise variance in rad^2 (residual phase error after ideal
        estimation; zero-mean Gaussian).
    n0 : float
        Total complex AWGN variance; each real dimension carries n0/2.
    eb_n0_db : float or None
        Provenance record of the Eb/N0 value this n0 was derived from, if any.
    """

    sigma_p2: float
    n0: float
    eb_n0_db: float | None = None

    def __post_init__(self):
        if self.sigma_p2 < 0:
            raise ValueError(f"sigma_p2 must be >= 0, got {self.sigma_p2}")
        if self.n0 <= 0:
            raise ValueError(f"n0 must be > 0, got {self.n0}")

    @classmethod
    def from_eb_n0(cls, eb_n0_db: float, m: int, sigma_p2: float, p: float = 1.0) -> "ChannelParams":
        return cls(sigma_p2=sigma_p2, n0=eb_n0_to_n0(eb_n0_db, m, p), eb_n0_db=eb_n0_db)

    @property
    def noise_var_per_dim(self) -> float:
        return self.n0 / 2.0

    def snapshot(self) -> dict:
        """JSON-ready record of the parameters."""
        return {"sigma_p2": self.sigma_p2, "n0": self.n0, "eb_n0_db": self.eb_n0_db}


@dataclass(frozen=True)
class Constellation:
    """Ordered list of complex symbols with an average-power budget.

    The point order is stable: index i identifies the same symbol in every
    operation.  Instances are immutable; ``normalize_power`` returns a new
    object.
    """

    points: np.ndarray
    power_budget: float = 1.0

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=np.complex128))
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("a constellation needs a 1-D list of at least one point")
        if self.power_budget <= 0:
            raise ValueError(f"power budget must be positive, got {self.power_budget}")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return int(self.points.size)

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.points)

    def angles(self) -> np.ndarray:
        return np.angle(self.points)

    def average_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def is_power_normalized(self, rel_tol: float = POWER_REL_TOL) -> bool:
        return abs(self.average_power() - self.power_budget) <= rel_tol * self.power_budget

    def normalize_power(self) -> "Constellation":
        """Scale all points by one positive factor so the average power equals
        the budget exactly.  Angles are unchanged.  Idempotent."""
        avg = self.average_power()
        if avg == 0.0:
            raise ValueError("cannot normalize an all-zero constellation")
        if abs(avg - self.power_budget) <= POWER_REL_TOL * self.power_budget:
            return self  # already on the budget: exact fixed point
        scale = math.sqrt(self.power_budget / avg)
        return Constellation(self.points * scale, self.power_budget)

    def rotated(self, phi: float) -> "Constellation":
        return Constellation(self.points * np.exp(1j * phi), self.power_budget)

    def content_hash(self) -> str:
        """Stable short hash of the point coordinates and power budget."""
        payload = json.dumps(
            {
                "power": repr(float(self.power_budget)),
                "points": [[repr(float(z.real)), repr(float(z.imag))] for z in self.points],
            },
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    # --- file formats -----------------------------------------------------
    # JSON: {"m": int, "power": float, "points": [[re, im], ...]}
    # CSV:  two columns re,im (header optional), one row per point.

    def to_json(self) -> str:
        return json.dumps(
            {
                "m": self.size,
                "power": self.power_budget,
                "points": [[float(z.real), float(z.imag)] for z in self.points],
            },
            indent=2,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["re", "im"])
        for z in self.points:
            writer.writerow([repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue()

    @classmethod
    def from_json(cls, text: str) -> "Constellation":
        data = json.loads(text)
        pts = np.array([complex(re, im) for re, im in data["points"]])
        if "m" in data and int(data["m"]) != pts.size:
            raise ValueError(f"constellation file says m={data['m']} but has {pts.size} points")
        return cls(pts, float(data.get("power", 1.0)))

    @classmethod
    def from_csv(cls, text: str) -> "Constellation":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]  # skip header
        pts = np.array([complex(float(r[0]), float(r[1])) for r in rows])
        return cls(pts)

    @classmethod
    def load(cls, path: str | Path) -> "Constellation":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
            return cls.from_json(text)
        return cls.from_csv(text)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix.lower() == ".csv":
            path.write_text(self.to_csv())
        else:
            path.write_text(self.to_json())


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


# --- random streams -------------------------------------------------------


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator with deterministic replay: same seed, same draws."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for a worker, derived from (master seed, key).

    Distinct keys give statistically independent streams; the mapping is
    deterministic, so parallel runs are reproducible.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def sample_channel(x, params: ChannelParams, rng: np.random.Generator):
    """Pass symbols through the channel: r = x * exp(j*theta) + n.

    theta ~ N(0, sigma_p2) and n is circular complex Gaussian with total
    variance n0 (n0/2 per real dimension).  Successive calls draw i.i.d.
    noise.  ``x`` may be a scalar or an array; the output has the same shape.
    """
    x_arr = np.asarray(x, dtype=np.complex128)
    shape = x_arr.shape
    # scale 0 still consumes draws, keeping streams aligned across sigma_p2
    theta = rng.normal(0.0, math.sqrt(params.sigma_p2), size=shape)
    std = math.sqrt(params.n0 / 2.0)
    noise = rng.normal(0.0, std, size=shape) + 1j * rng.normal(0.0, std, size=shape)
    out = x_arr * np.exp(1j * theta) + noise
    if np.ndim(x) == 0:
        return complex(out)
    return out
