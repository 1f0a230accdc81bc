"""2-D gradient noise on a power-of-two lattice and labeled noise datasets.

A sample is produced in four steps: a ``2**n x 2**m`` cell grid is laid over
the ``W x H`` canvas, a random gradient vector is placed at every lattice
point, each pixel takes the dot products of the four surrounding corner
gradients with its offsets from those corners, and the four values are
blended by bilinear interpolation. The category of a sample is
``(n - 1) * M + m``, so denser grids (more complex noise) get larger labels.

Array layout: planes are indexed ``[x, y]`` (shape ``(W, H)``) and samples
are ``(W, H, C)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidGridError, InvalidParameterError, OutOfDomainError
from .tensor_core import DTYPE, derive_seed, substream, uniform

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class GridSpec:
    n: int
    m: int
    width: int
    height: int

    @property
    def cells_x(self) -> int:
        return 1 << self.n

    @property
    def cells_y(self) -> int:
        return 1 << self.m

    @property
    def lattice_shape(self) -> tuple[int, int]:
        return self.cells_x + 1, self.cells_y + 1

    def lattice_points_px(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel coordinates of the lattice columns and rows."""
        xs = np.arange(self.cells_x + 1) * (self.width / self.cells_x)
        ys = np.arange(self.cells_y + 1) * (self.height / self.cells_y)
        return xs, ys


def make_grid(n: int, m: int, width: int, height: int) -> GridSpec:
    if n < 1 or m < 1:
        raise InvalidGridError(f"grid exponents must be >= 1, got n={n}, m={m}")
    if width < 1 or height < 1:
        raise InvalidGridError(f"canvas must be non-empty, got {width}x{height}")
    if (1 << n) > width:
        raise InvalidGridError(f"2^n <= W violated: 2^{n} = {1 << n} > W = {width}")
    if (1 << m) > height:
        raise InvalidGridError(f"2^m <= H violated: 2^{m} = {1 << m} > H = {height}")
    return GridSpec(n, m, width, height)


@dataclass
class GradientField:
    grid: GridSpec
    vectors: np.ndarray  # (2**n + 1, 2**m + 1, 2)
    radius: float
    seed: int


def gradient_radius(width: int, height: int) -> float:
    """Magnitude cap for lattice gradients: one percent of the longer side."""
    return 0.01 * max(width, height)


def lattice_stream(p: int, q: int) -> int:
    return (p << 32) | q


def sample_gradient_field(grid: GridSpec, seed: int) -> GradientField:
    """Random gradients with magnitude in ``[0, R)`` and angle in ``[0, 2pi)``.

    The vector at lattice point ``(p, q)`` is drawn from its own substream of
    ``seed``, so it does not depend on the grid size or on evaluation order.
    """
    radius = gradient_radius(grid.width, grid.height)
    px, qy = grid.lattice_shape
    vectors = np.empty((px, qy, 2), dtype=DTYPE)
    for p in range(px):
        for q in range(qy):
            rng = substream(seed, lattice_stream(p, q))
            magnitude = uniform(rng, 0.0, radius)
            angle = uniform(rng, 0.0, TWO_PI)
            vectors[p, q, 0] = magnitude * math.cos(angle)
            vectors[p, q, 1] = magnitude * math.sin(angle)
    return GradientField(grid, vectors, radius, seed)


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _cell_index(coord, cells):
    # the closed upper edge belongs to the last cell, with fraction 1.0
    idx = np.minimum(np.floor(coord), cells - 1).astype(np.int64)
    return idx, coord - idx


def _blend(vectors, i, j, fu, fv, smooth):
    g00 = vectors[i, j]
    g10 = vectors[i + 1, j]
    g01 = vectors[i, j + 1]
    g11 = vectors[i + 1, j + 1]
    d00 = g00[..., 0] * fu + g00[..., 1] * fv
    d10 = g10[..., 0] * (fu - 1.0) + g10[..., 1] * fv
    d01 = g01[..., 0] * fu + g01[..., 1] * (fv - 1.0)
    d11 = g11[..., 0] * (fu - 1.0) + g11[..., 1] * (fv - 1.0)
    wu = _fade(fu) if smooth else fu
    wv = _fade(fv) if smooth else fv
    bottom = (1.0 - wu) * d00 + wu * d10
    top = (1.0 - wu) * d01 + wu * d11
    return (1.0 - wv) * bottom + wv * top


def eval_noise(field: GradientField, u: float, v: float, smooth: bool = False) -> float:
    """Noise value at continuous grid coordinates ``(u, v)``.

    ``0 <= u <= 2**n`` and ``0 <= v <= 2**m``; each cell is a unit square.
    """
    grid = field.grid
    if not (0.0 <= u <= grid.cells_x and 0.0 <= v <= grid.cells_y):
        raise OutOfDomainError(
            f"({u}, {v}) lies outside the grid [0, {grid.cells_x}] x [0, {grid.cells_y}]"
        )
    i, fu = _cell_index(np.float64(u), grid.cells_x)
    j, fv = _cell_index(np.float64(v), grid.cells_y)
    return float(_blend(field.vectors, i, j, fu, fv, smooth))


def pixel_coords(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Grid coordinates of pixel centers along x and y."""
    u = (np.arange(grid.width) + 0.5) * grid.cells_x / grid.width
    v = (np.arange(grid.height) + 0.5) * grid.cells_y / grid.height
    return u, v


def render_noise(field: GradientField, smooth: bool = False) -> np.ndarray:
    """Evaluate the field at every pixel center; returns a ``(W, H)`` plane."""
    grid = field.grid
    u, v = pixel_coords(grid)
    i, fu = _cell_index(u, grid.cells_x)
    j, fv = _cell_index(v, grid.cells_y)
    return _blend(field.vectors, i[:, None], j[None, :], fu[:, None], fv[None, :], smooth)


def normalize_plane(plane: np.ndarray) -> np.ndarray:
    """Min-max map to ``[0, 1]``; a constant plane becomes all 0.5."""
    plane = np.asarray(plane, dtype=DTYPE)
    lo = plane.min()
    hi = plane.max()
    if hi == lo:
        return np.full_like(plane, 0.5)
    return (plane - lo) / (hi - lo)


def gradient_energy(values: np.ndarray) -> float:
    """Mean absolute forward difference along x plus the same along y."""
    values = np.asarray(values, dtype=DTYPE)
    return float(np.abs(np.diff(values, axis=0)).mean() + np.abs(np.diff(values, axis=1)).mean())


def noise_label(n: int, m: int, M: int) -> int:
    """Category of a sample generated with grid exponents ``(n, m)``."""
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if not 1 <= m <= M:
        raise InvalidParameterError(f"m must lie in [1, {M}], got {m}")
    return (n - 1) * M + m


def label_to_params(y: int, M: int) -> tuple[int, int]:
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    if y < 1:
        raise InvalidParameterError(f"label must be >= 1, got {y}")
    n = (y - 1) // M + 1
    return n, y - (n - 1) * M


@dataclass(frozen=True)
class DatasetConfig:
    N: int = 3
    M: int = 3
    K: int = 100
    width: int = 32
    height: int = 32
    channels: int = 1
    master_seed: int = 0
    smooth: bool = False
    independent_channels: bool = False

    @property
    def num_classes(self) -> int:
        return self.N * self.M

    @property
    def total(self) -> int:
        return self.N * self.M * self.K

    def validate(self) -> None:
        for name in ("N", "M", "K", "width", "height", "channels"):
            if getattr(self, name) < 1:
                raise InvalidConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if (1 << self.N) > self.width:
            raise InvalidConfigError(
                f"2^N <= W violated: 2^{self.N} = {1 << self.N} exceeds W = {self.width}; "
                "every grid cell must span at least one pixel"
            )
        if (1 << self.M) > self.height:
            raise InvalidConfigError(
                f"2^M <= H violated: 2^{self.M} = {1 << self.M} exceeds H = {self.height}; "
                "every grid cell must span at least one pixel"
            )
        if not 0 <= self.master_seed < (1 << 64):
            raise InvalidConfigError(f"master_seed must fit in 64 bits, got {self.master_seed}")

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form of the config."""
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class NoiseSample:
    values: np.ndarray  # (W, H, C), each plane in [0, 1]
    label: int
    n: int
    m: int
    k: int
    seed: int


@dataclass
class NoiseDataset:
    config: DatasetConfig
    samples: list[NoiseSample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    def images(self) -> np.ndarray:
        return np.stack([s.values for s in self.samples])

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)


def render_sample_plane(grid: GridSpec, seed: int, smooth: bool = False) -> np.ndarray:
    return normalize_plane(render_noise(sample_gradient_field(grid, seed), smooth=smooth))


def generate_sample(cfg: DatasetConfig, index: int) -> NoiseSample:
    """Sample number ``index`` (1-based, category-major) of the dataset for ``cfg``."""
    if not 1 <= index <= cfg.total:
        raise InvalidParameterError(f"sample index must lie in [1, {cfg.total}], got {index}")
    y = (index - 1) // cfg.K + 1
    k = (index - 1) % cfg.K + 1
    n, m = label_to_params(y, cfg.M)
    grid = make_grid(n, m, cfg.width, cfg.height)
    seed = derive_seed(cfg.master_seed, index)
    plane = render_sample_plane(grid, seed, cfg.smooth)
    if cfg.independent_channels:
        planes = [plane] + [
            render_sample_plane(grid, derive_seed(seed, c), cfg.smooth) for c in range(1, cfg.channels)
        ]
        values = np.stack(planes, axis=-1)
    else:
        values = np.repeat(plane[:, :, None], cfg.channels, axis=2)
    return NoiseSample(values=values, label=noise_label(n, m, cfg.M), n=n, m=m, k=k, seed=seed)


def build_dataset(cfg: DatasetConfig) -> NoiseDataset:
    cfg.validate()
    return NoiseDataset(cfg, [generate_sample(cfg, i) for i in range(1, cfg.total + 1)])
