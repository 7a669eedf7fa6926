"""Probability distributions on a 2-D grid.

Arrays are stored as ``density[y, x]`` (row-major, one row per y); public
functions take and return cell coordinates as ``(x, y)``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

MASS_TOL = 1e-9

# in-bounds 8-neighbourhood offsets (dx, dy)
NEIGHBOURS = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0)]


class VanishedBelief(ValueError):
    """Raised when fusion leaves no probability mass anywhere on the grid."""

    def __init__(self, msg="vanished belief: evidence is contradictory with the prior"):
        super().__init__(msg)


class GridDistribution:
    """Nonnegative densities over a ``width x height`` grid summing to 1.

    The underlying array is read-only so instances can be shared between
    agents without copying.
    """

    __slots__ = ("_d",)

    def __init__(self, density):
        d = np.array(density, dtype=float, copy=True)
        if d.ndim != 2 or d.size == 0:
            raise ValueError(f"density must be a non-empty 2-D array, got shape {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("densities must be finite and nonnegative")
        total = d.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"densities sum to {total!r}, not 1")
        d.setflags(write=False)
        self._d = d

    @classmethod
    def uniform(cls, width: int, height: int) -> "GridDistribution":
        return cls(np.full((height, width), 1.0 / (width * height)))

    @classmethod
    def delta(cls, width: int, height: int, cell) -> "GridDistribution":
        d = np.zeros((height, width))
        x, y = cell
        d[y, x] = 1.0
        return cls(d)

    @property
    def density(self) -> np.ndarray:
        return self._d

    @property
    def width(self) -> int:
        return self._d.shape[1]

    @property
    def height(self) -> int:
        return self._d.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._d.shape

    def __getitem__(self, cell) -> float:
        x, y = cell
        return float(self._d[y, x])

    def digest(self) -> str:
        return hashlib.sha1(self._d.tobytes()).hexdigest()[:16]

    def __repr__(self):
        return f"GridDistribution({self.width}x{self.height}, argmax={argmax_location(self)})"


@dataclass(frozen=True)
class Displacement:
    dx: float
    dy: float

    def __post_init__(self):
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "dy", float(self.dy))
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise ValueError(f"displacement must be finite: {self}")

    def __add__(self, other: "Displacement") -> "Displacement":
        return Displacement(self.dx + other.dx, self.dy + other.dy)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.dx, self.dy)


ZERO = Displacement(0.0, 0.0)


@dataclass(frozen=True)
class DiffusionParams:
    leak: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.leak <= 1.0:
            raise ValueError(f"leak must lie in [0, 1], got {self.leak}")


class MatchKernel:
    """``weights[y, x, y2, x2]``: probability that an observation taken at
    ``(x, y)`` matches location ``(x2, y2)``. Each ``weights[y, x]`` slice is a
    grid distribution."""

    def __init__(self, weights):
        w = np.array(weights, dtype=float, copy=True)
        if w.ndim != 4 or w.shape[:2] != w.shape[2:]:
            raise ValueError(f"kernel must have shape (H, W, H, W), got {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("kernel entries must be finite and nonnegative")
        sums = w.sum(axis=(2, 3))
        bad = np.argwhere(np.abs(sums - 1.0) > MASS_TOL)
        if len(bad):
            y, x = bad[0]
            raise ValueError(f"kernel row for cell {(int(x), int(y))} sums to {sums[y, x]!r}")
        w.setflags(write=False)
        self.weights = w

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape[:2]

    def row(self, cell) -> GridDistribution:
        x, y = cell
        return GridDistribution(self.weights[y, x])

    @classmethod
    def identity(cls, width: int, height: int) -> "MatchKernel":
        n = width * height
        return cls(np.eye(n).reshape(height, width, height, width))

    @classmethod
    def uniform(cls, width: int, height: int) -> "MatchKernel":
        n = width * height
        return cls(np.full((height, width, height, width), 1.0 / n))


def _check_same_shape(*dists) -> None:
    shapes = {d.shape for d in dists}
    if len(shapes) != 1:
        raise ValueError(f"grid dimension mismatch: {sorted(shapes)}")


def normalize(raw) -> GridDistribution:
    d = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ValueError("raw grid must be finite and nonnegative")
    total = d.sum()
    if total <= 0.0:
        raise VanishedBelief()
    d = d / total
    # one more pass keeps the sum within tolerance after heavy cancellation
    return GridDistribution(d / d.sum())


def fuse_match(prior: GridDistribution, observation: GridDistribution,
               kernel: MatchKernel) -> GridDistribution:
    """Bayesian update of ``prior`` with a matcher output.

    Each cell is weighted by how well the observed match distribution agrees
    with what an observation taken at that cell would produce, i.e.
    ``sum(observation * kernel[cell])``.
    """
    _check_same_shape(prior, observation)
    if kernel.shape != prior.shape:
        raise ValueError(f"kernel shape {kernel.shape} does not match grid {prior.shape}")
    likelihood = np.tensordot(kernel.weights, observation.density, axes=([2, 3], [0, 1]))
    return normalize(prior.density * likelihood)


def estimate_kernel(matcher: Callable, width: int, height: int) -> MatchKernel:
    """Query ``matcher((x, y))`` at every cell and stack the answers."""
    w = np.empty((height, width, height, width))
    for y in range(height):
        for x in range(width):
            out = matcher((x, y))
            arr = out.density if isinstance(out, GridDistribution) else np.asarray(out, float)
            if arr.shape != (height, width):
                raise ValueError(f"matcher output for cell {(x, y)} has shape {arr.shape}")
            if (not np.all(np.isfinite(arr)) or np.any(arr < 0)
                    or abs(arr.sum() - 1.0) > MASS_TOL):
                raise ValueError(f"matcher output for cell {(x, y)} is not a distribution")
            w[y, x] = arr
    return MatchKernel(w)


def gps_likelihood(width: int, height: int, reading, p_gps: float) -> np.ndarray:
    x, y = reading
    lik = np.zeros((height, width))
    lik[y, x] = p_gps
    for dx, dy in NEIGHBOURS:
        nx, ny = x + dx, y + dy
        if 0 <= nx < width and 0 <= ny < height:
            lik[ny, nx] = (1.0 - p_gps) / 8.0
    return lik


def fuse_gps(prior: GridDistribution, reading, p_gps: float) -> GridDistribution:
    x, y = reading
    if not (0 <= x < prior.width and 0 <= y < prior.height):
        raise ValueError(f"GPS reading {reading} outside {prior.width}x{prior.height} grid")
    if not 0.0 < p_gps <= 1.0:
        raise ValueError(f"p_gps must lie in (0, 1], got {p_gps}")
    return normalize(prior.density * gps_likelihood(prior.width, prior.height, reading, p_gps))


def _shift(d: np.ndarray, move: Displacement) -> np.ndarray:
    h, w = d.shape
    out = np.zeros_like(d)
    ix, iy = math.floor(move.dx), math.floor(move.dy)
    fx, fy = move.dx - ix, move.dy - iy
    xs, ys = np.arange(w), np.arange(h)
    for ox, wx in ((ix, 1.0 - fx), (ix + 1, fx)):
        if wx == 0.0:
            continue
        tx = np.clip(xs + ox, 0, w - 1)
        for oy, wy in ((iy, 1.0 - fy), (iy + 1, fy)):
            if wy == 0.0:
                continue
            ty = np.clip(ys + oy, 0, h - 1)
            np.add.at(out, (ty[:, None], tx[None, :]), d * (wx * wy))
    return out


def neighbour_counts(height: int, width: int) -> np.ndarray:
    counts = np.zeros((height, width))
    for dx, dy in NEIGHBOURS:
        counts[max(0, -dy):height - max(0, dy), max(0, -dx):width - max(0, dx)] += 1
    return counts


def _diffuse(d: np.ndarray, leak: float) -> np.ndarray:
    if leak == 0.0:
        return d
    h, w = d.shape
    counts = neighbour_counts(h, w)
    leaking = np.where(counts > 0, leak * d, 0.0)
    share = np.divide(leaking, counts, out=np.zeros_like(d), where=counts > 0)
    out = d - leaking
    for dx, dy in NEIGHBOURS:
        # mass at (x, y) moves to (x + dx, y + dy)
        src = share[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
        out[max(0, dy):h - max(0, -dy), max(0, dx):w - max(0, -dx)] += src
    return out


def propagate(belief: GridDistribution, move: Displacement,
              diffusion: DiffusionParams) -> GridDistribution:
    """Shift the belief by ``move`` (bilinear split, clamped at the border),
    then let each cell leak ``diffusion.leak`` of its mass to its neighbours."""
    return normalize(_diffuse(_shift(belief.density, move), diffusion.leak))


class TrajectoryForecast(tuple):
    """Predicted location distributions ``F_0 .. F_{H-1}``."""

    @property
    def horizon(self) -> int:
        return len(self)

    def stack(self) -> np.ndarray:
        return np.stack([f.density for f in self])


def forecast(belief: GridDistribution, plan: Sequence[Displacement],
             perturb: Sequence[Displacement], diffusion: DiffusionParams,
             horizon: int) -> TrajectoryForecast:
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if len(plan) < horizon or len(perturb) < horizon:
        raise ValueError(
            f"plan ({len(plan)}) and perturbation ({len(perturb)}) must cover horizon {horizon}"
        )
    steps = [belief]
    for n in range(1, horizon):
        steps.append(propagate(steps[-1], plan[n - 1] + perturb[n - 1], diffusion))
    return TrajectoryForecast(steps)


def violation_probability(fc: Sequence[GridDistribution], nofly) -> float:
    """Greatest density on any masked cell across all forecast steps."""
    mask = np.asarray(nofly, dtype=bool)
    if mask.shape != fc[0].shape:
        raise ValueError(f"mask shape {mask.shape} does not match grid {fc[0].shape}")
    if not mask.any():
        return 0.0
    return float(max(f.density[mask].max() for f in fc))


def mean_location(d: GridDistribution) -> tuple[float, float]:
    ys, xs = np.indices(d.shape)
    return float((xs * d.density).sum()), float((ys * d.density).sum())


def argmax_location(d: GridDistribution) -> tuple[int, int]:
    # np.argmax returns the first maximum in row-major order: lowest y, then x
    y, x = np.unravel_index(int(np.argmax(d.density)), d.shape)
    return int(x), int(y)


def entropy(d: GridDistribution) -> float:
    p = d.density[d.density > 0]
    return float(-(p * np.log(p)).sum())


def to_pgm(d: GridDistribution) -> bytes:
    """8-bit binary graymap; the densest cell maps to 255."""
    peak = d.density.max()
    pixels = np.rint(d.density / peak * 255.0).astype(np.uint8)
    header = f"P5\n{d.width} {d.height}\n255\n".encode("ascii")
    return header + pixels.tobytes()


def write_pgm(path, d: GridDistribution) -> None:
    with open(path, "wb") as fh:
        fh.write(to_pgm(d))
