"""Compactly supported functions sampled on uniform grids in R^n (n = 1, 2).

A :class:`GridSpec` fixes the lattice ``origin - L + i*h`` along every axis and
the box ``[origin - L, origin + L]^n``.  A :class:`GridFunction` stores samples
only on an axis-aligned index box (its *support box*); every grid point outside
that box holds an implicit zero.  All quadrature is the midpoint rule
``h^n * sum(samples)``.

Discrete balls are strict: a grid point ``x`` belongs to ``B(c, r)`` iff
``|x - c| < r``.  Doubling the radius about a fixed center therefore produces
nested point sets, which the telescoping constructions downstream rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "Ball",
    "GridFunction",
    "GridError",
    "integrate",
    "indicator",
    "lp_norm",
    "average_on_ball",
    "axpy",
    "pointwise_multiply",
    "scale",
    "inner",
    "restrict_to_ball",
    "ball_count",
    "block_average",
    "coarse_spec",
    "prolong",
    "save_grid_function",
    "load_grid_function",
]

# relative tolerance for "2L/h is an integer" and lattice alignment checks
_ALIGN_TOL = 1e-9

FORMAT_VERSION = 1


class GridError(ValueError):
    """Raised when grids, balls or boxes are incompatible."""


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball ``B(center, radius)``."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise GridError(f"ball radius must be positive and finite, got {self.radius}")
        if not all(math.isfinite(v) for v in c):
            raise GridError("ball center must be finite")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        """Lebesgue measure of the continuum ball."""
        return unit_ball_volume(self.dim) * self.radius**self.dim

    def dilate(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)

    def distance_to(self, other: "Ball") -> float:
        return float(np.linalg.norm(np.subtract(self.center, other.center)))

    def disjoint_from(self, other: "Ball") -> bool:
        return self.distance_to(other) >= self.radius + other.radius


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the box ``[origin - L, origin + L]^dim`` with spacing ``h``.

    ``2L/h`` must be a positive integer so that both box faces are grid
    points.  The default origin is the zero vector.
    """

    dim: int
    half_width: float
    spacing: float
    origin: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        h = float(self.spacing)
        L = float(self.half_width)
        if not (h > 0 and math.isfinite(h)):
            raise GridError(f"spacing must be positive, got {self.spacing}")
        if not (L > 0 and math.isfinite(L)):
            raise GridError(f"half_width must be positive, got {self.half_width}")
        cells = 2 * L / h
        if abs(cells - round(cells)) > _ALIGN_TOL * max(1.0, cells) or round(cells) < 1:
            raise GridError(f"2L/h = {cells!r} is not a positive integer")
        origin = (0.0,) * self.dim if self.origin is None else tuple(float(v) for v in self.origin)
        if len(origin) != self.dim:
            raise GridError("origin has the wrong dimension")
        object.__setattr__(self, "spacing", h)
        object.__setattr__(self, "half_width", L)
        object.__setattr__(self, "origin", origin)

    # -- geometry ---------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return int(round(2 * self.half_width / self.spacing))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_cells + 1,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def lower_corner(self) -> np.ndarray:
        return np.asarray(self.origin) - self.half_width

    def axis_coords(self, axis: int, lo: int = 0, hi: int | None = None) -> np.ndarray:
        hi = self.n_cells + 1 if hi is None else hi
        return self.origin[axis] - self.half_width + self.spacing * np.arange(lo, hi)

    def box_points(self, lo: Sequence[int], hi: Sequence[int]) -> np.ndarray:
        """Coordinates of the box points, shape ``(*box_shape, dim)``."""
        axes = [self.axis_coords(k, lo[k], hi[k]) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def full_box(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return (0,) * self.dim, self.shape

    def contains_ball(self, ball: Ball, tol: float = 1e-12) -> bool:
        if ball.dim != self.dim:
            return False
        slack = self.half_width * (1 + tol)
        return all(
            abs(c - o) + ball.radius <= slack for c, o in zip(ball.center, self.origin)
        )

    def ball_box(self, ball: Ball) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Smallest index box (clipped to the grid) holding every point of ``ball``."""
        corner = self.lower_corner()
        lo, hi = [], []
        for k in range(self.dim):
            a = math.floor((ball.center[k] - ball.radius - corner[k]) / self.spacing)
            b = math.ceil((ball.center[k] + ball.radius - corner[k]) / self.spacing) + 1
            lo.append(min(max(a, 0), self.n_cells + 1))
            hi.append(min(max(b, 0), self.n_cells + 1))
        return tuple(lo), tuple(hi)

    def nearest_index(self, point: Sequence[float]) -> tuple[int, ...]:
        corner = self.lower_corner()
        return tuple(
            int(round((float(point[k]) - corner[k]) / self.spacing)) for k in range(self.dim)
        )

    # -- lattice relations -------------------------------------------------
    def lattice_offset(self, other: "GridSpec") -> tuple[int, ...]:
        """Index shift mapping ``other`` indices onto ``self`` indices.

        Both grids must share spacing and lattice; raises otherwise.
        """
        if other.dim != self.dim or abs(other.spacing - self.spacing) > _ALIGN_TOL * self.spacing:
            raise GridError("grids do not share a spacing")
        shift = (other.lower_corner() - self.lower_corner()) / self.spacing
        out = np.round(shift)
        if np.any(np.abs(shift - out) > 1e-6):
            raise GridError("grids are not lattice aligned")
        return tuple(int(v) for v in out)

    def enclosing(self, center: Sequence[float], half_width: float) -> "GridSpec":
        """Grid on the same lattice, centered at the lattice point nearest ``center``."""
        idx = self.nearest_index(center)
        origin = tuple(self.lower_corner()[k] + idx[k] * self.spacing for k in range(self.dim))
        cells = max(1, math.ceil(half_width / self.spacing - 1e-9))
        return GridSpec(self.dim, cells * self.spacing, self.spacing, origin)


def _as_box(lo, hi, dim):
    lo = tuple(int(v) for v in lo)
    hi = tuple(int(v) for v in hi)
    if len(lo) != dim or len(hi) != dim:
        raise GridError("box has the wrong dimension")
    return lo, hi


class GridFunction:
    """Real function on a :class:`GridSpec`, stored on its support box.

    ``samples`` has shape ``hi - lo``; the value at every grid index outside
    ``[lo, hi)`` is zero.  Instances are immutable.
    """

    __slots__ = ("spec", "lo", "hi", "samples")

    def __init__(self, spec: GridSpec, samples, lo: Sequence[int] | None = None):
        arr = np.array(samples, dtype=float, copy=True)
        if lo is None:
            lo = (0,) * spec.dim
            if arr.shape != spec.shape:
                raise GridError(f"dense samples must have shape {spec.shape}, got {arr.shape}")
        if arr.ndim != spec.dim:
            raise GridError("samples must have one axis per grid dimension")
        lo = tuple(int(v) for v in lo)
        hi = tuple(l + s for l, s in zip(lo, arr.shape))
        if any(l < 0 for l in lo) or any(h > n for h, n in zip(hi, spec.shape)):
            raise GridError("support box exceeds the grid")
        if not np.all(np.isfinite(arr)):
            raise GridError("samples must be finite")
        arr.flags.writeable = False
        self.spec = spec
        self.lo = lo
        self.hi = hi
        self.samples = arr

    # -- constructors -----------------------------------------------------
    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridFunction":
        return cls(spec, np.zeros((0,) * spec.dim), (0,) * spec.dim)

    @classmethod
    def from_callable(
        cls,
        spec: GridSpec,
        func: Callable[[np.ndarray], np.ndarray],
        box: tuple[Sequence[int], Sequence[int]] | None = None,
    ) -> "GridFunction":
        """Sample ``func`` (vectorized over points of shape ``(..., dim)``) on a box."""
        lo, hi = box if box is not None else spec.full_box()
        lo, hi = _as_box(lo, hi, spec.dim)
        pts = spec.box_points(lo, hi)
        vals = np.asarray(func(pts), dtype=float).reshape(pts.shape[:-1])
        return cls(spec, vals, lo)

    # -- views ------------------------------------------------------------
    @property
    def support(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self.lo, self.hi

    @property
    def is_empty_box(self) -> bool:
        return self.samples.size == 0

    def dense(self) -> np.ndarray:
        out = np.zeros(self.spec.shape)
        if not self.is_empty_box:
            out[tuple(slice(l, h) for l, h in zip(self.lo, self.hi))] = self.samples
        return out

    def points(self) -> np.ndarray:
        return self.spec.box_points(self.lo, self.hi)

    def nonzero(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates ``(k, dim)`` and values ``(k,)`` of the nonzero samples, row-major."""
        if self.is_empty_box:
            return np.zeros((0, self.spec.dim)), np.zeros(0)
        mask = self.samples != 0
        return self.points()[mask], self.samples[mask]

    def box_values(self, lo: Sequence[int], hi: Sequence[int]) -> np.ndarray:
        """Samples on an arbitrary index box (zeros where outside the support)."""
        lo, hi = _as_box(lo, hi, self.spec.dim)
        out = np.zeros(tuple(max(0, b - a) for a, b in zip(lo, hi)))
        if self.is_empty_box or out.size == 0:
            return out
        ilo = [max(a, b) for a, b in zip(lo, self.lo)]
        ihi = [min(a, b) for a, b in zip(hi, self.hi)]
        if any(a >= b for a, b in zip(ilo, ihi)):
            return out
        dst = tuple(slice(a - l, b - l) for a, b, l in zip(ilo, ihi, lo))
        src = tuple(slice(a - l, b - l) for a, b, l in zip(ilo, ihi, self.lo))
        out[dst] = self.samples[src]
        return out

    def sup(self) -> float:
        return float(np.max(np.abs(self.samples))) if self.samples.size else 0.0

    def tight(self) -> "GridFunction":
        """Same function with the support box shrunk to the nonzero samples."""
        if self.is_empty_box:
            return self
        nz = np.nonzero(self.samples)
        if len(nz[0]) == 0:
            return GridFunction.zeros(self.spec)
        lo = [int(ix.min()) for ix in nz]
        hi = [int(ix.max()) + 1 for ix in nz]
        sl = tuple(slice(a, b) for a, b in zip(lo, hi))
        return GridFunction(self.spec, self.samples[sl], [l + a for l, a in zip(self.lo, lo)])

    def with_box(self, lo: Sequence[int], hi: Sequence[int]) -> "GridFunction":
        """Re-store on a box; samples outside the new box must be zero."""
        lo, hi = _as_box(lo, hi, self.spec.dim)
        out = GridFunction(self.spec, self.box_values(lo, hi), lo)
        if not self.is_empty_box and abs(integrate_abs(out) - integrate_abs(self)) > 0:
            raise GridError("with_box would drop nonzero samples")
        return out

    def embed(self, spec: GridSpec) -> "GridFunction":
        """Move onto a lattice-aligned grid (e.g. a larger box)."""
        if spec == self.spec:
            return self
        shift = spec.lattice_offset(self.spec)
        tight = self.tight()
        if tight.is_empty_box:
            return GridFunction.zeros(spec)
        lo = [l + s for l, s in zip(tight.lo, shift)]
        return GridFunction(spec, tight.samples, lo)

    def map_values(self, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return GridFunction(self.spec, func(self.samples), self.lo)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, GridFunction):
            return axpy(1.0, other, self)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            return axpy(-1.0, other, self)
        return NotImplemented

    def __neg__(self):
        return scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            return pointwise_multiply(self, other)
        if np.isscalar(other):
            return scale(float(other), self)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return scale(1.0 / float(other), self)
        return NotImplemented

    def __repr__(self):
        return f"GridFunction(dim={self.spec.dim}, h={self.spec.spacing}, box={self.lo}->{self.hi})"


def _require_same(f: GridFunction, g: GridFunction):
    if f.spec != g.spec:
        raise GridError("grid functions live on different grids")


def integrate(f: GridFunction) -> float:
    """Midpoint rule ``h^n * sum(samples)`` (numpy pairwise summation)."""
    if f.is_empty_box:
        return 0.0
    return float(np.sum(f.samples)) * f.spec.cell_volume


def integrate_abs(f: GridFunction) -> float:
    if f.is_empty_box:
        return 0.0
    return float(np.sum(np.abs(f.samples))) * f.spec.cell_volume


def _ball_mask(spec: GridSpec, ball: Ball, lo, hi) -> np.ndarray:
    pts = spec.box_points(lo, hi)
    d2 = np.sum((pts - np.asarray(ball.center)) ** 2, axis=-1)
    return d2 < ball.radius**2


def indicator(spec: GridSpec, ball: Ball) -> GridFunction:
    """Indicator of the strict discrete ball ``{x : |x - c| < r}``."""
    if ball.dim != spec.dim:
        raise GridError("ball and grid dimensions differ")
    if not spec.contains_ball(ball):
        raise GridError(f"ball {ball} is not inside the grid box")
    if ball.radius < 2 * spec.spacing * (1 - 1e-12):
        raise GridError(f"ball radius {ball.radius} is below two grid cells ({2 * spec.spacing})")
    lo, hi = spec.ball_box(ball)
    mask = _ball_mask(spec, ball, lo, hi)
    return GridFunction(spec, mask.astype(float), lo).tight()


def ball_count(spec: GridSpec, ball: Ball) -> int:
    """Number of grid points in the strict discrete ball (clipped to the grid)."""
    lo, hi = spec.ball_box(ball)
    if any(a >= b for a, b in zip(lo, hi)):
        return 0
    return int(np.count_nonzero(_ball_mask(spec, ball, lo, hi)))


def restrict_to_ball(f: GridFunction, ball: Ball) -> GridFunction:
    """``f * chi_B`` without the box-inclusion requirement of :func:`indicator`."""
    lo, hi = f.spec.ball_box(ball)
    lo = tuple(max(a, b) for a, b in zip(lo, f.lo))
    hi = tuple(min(a, b) for a, b in zip(hi, f.hi))
    if any(a >= b for a, b in zip(lo, hi)):
        return GridFunction.zeros(f.spec)
    vals = f.box_values(lo, hi) * _ball_mask(f.spec, ball, lo, hi)
    return GridFunction(f.spec, vals, lo)


def lp_norm(f: GridFunction, p: float) -> float:
    """``(h^n sum |f|^p)^(1/p)``; ``p = inf`` gives the max modulus."""
    if math.isinf(p):
        return f.sup()
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    if f.is_empty_box:
        return 0.0
    s = float(np.sum(np.abs(f.samples) ** p)) * f.spec.cell_volume
    return s ** (1.0 / p)


def average_on_ball(f: GridFunction, ball: Ball) -> float:
    """Grid average over the discrete ball, normalized by its discrete measure."""
    if not f.spec.contains_ball(ball):
        raise GridError(f"ball {ball} is not inside the grid box")
    count = ball_count(f.spec, ball)
    if count == 0:
        raise GridError("discrete ball is empty")
    return integrate(restrict_to_ball(f, ball)) / (count * f.spec.cell_volume)


def axpy(a: float, x: GridFunction, y: GridFunction) -> GridFunction:
    """``a*x + y``; the support box is the union of the two boxes."""
    _require_same(x, y)
    if x.is_empty_box:
        return y
    if y.is_empty_box:
        return scale(a, x)
    lo = tuple(min(p, q) for p, q in zip(x.lo, y.lo))
    hi = tuple(max(p, q) for p, q in zip(x.hi, y.hi))
    vals = a * x.box_values(lo, hi) + y.box_values(lo, hi)
    return GridFunction(x.spec, vals, lo)


def scale(c: float, f: GridFunction) -> GridFunction:
    return GridFunction(f.spec, c * f.samples, f.lo)


def pointwise_multiply(f: GridFunction, g: GridFunction) -> GridFunction:
    """Pointwise product; the support box is the intersection of the boxes."""
    _require_same(f, g)
    lo = tuple(max(p, q) for p, q in zip(f.lo, g.lo))
    hi = tuple(min(p, q) for p, q in zip(f.hi, g.hi))
    if f.is_empty_box or g.is_empty_box or any(a >= b for a, b in zip(lo, hi)):
        return GridFunction.zeros(f.spec)
    return GridFunction(f.spec, f.box_values(lo, hi) * g.box_values(lo, hi), lo)


def inner(f: GridFunction, g: GridFunction) -> float:
    """Grid L^2 pairing ``h^n sum f g``."""
    return integrate(pointwise_multiply(f, g))


# -- multiscale transfer ----------------------------------------------------
def coarse_spec(fine: GridSpec, factor: int, center: Sequence[float], half_width: float) -> GridSpec:
    """Grid of spacing ``factor*h`` whose points are centroids of fine cell blocks.

    Block ``J`` collects the ``factor`` consecutive fine indices starting at
    ``start + J*factor`` on every axis, where ``start`` places the block that
    holds the fine point nearest ``center`` at coarse offset zero.
    """
    factor = int(factor)
    if factor < 1:
        raise GridError("coarsening factor must be >= 1")
    H = factor * fine.spacing
    near = fine.nearest_index(center)
    corner = fine.lower_corner()
    start = [i - (factor - 1) // 2 for i in near]
    origin = tuple(corner[k] + (start[k] + (factor - 1) / 2) * fine.spacing for k in range(fine.dim))
    cells = max(1, math.ceil(half_width / H - 1e-9))
    return GridSpec(fine.dim, cells * H, H, origin)


def _block_map(fine: GridSpec, coarse: GridSpec):
    """Per-axis (factor, fine index of the first point of coarse block 0)."""
    ratio = coarse.spacing / fine.spacing
    factor = int(round(ratio))
    if abs(ratio - factor) > 1e-9 * ratio or factor < 1:
        raise GridError("coarse spacing is not an integer multiple of the fine spacing")
    c_corner = coarse.lower_corner()
    f_corner = fine.lower_corner()
    first = []
    for k in range(fine.dim):
        pos = (c_corner[k] - f_corner[k]) / fine.spacing - (factor - 1) / 2
        ipos = round(pos)
        if abs(pos - ipos) > 1e-6:
            raise GridError("coarse grid points are not fine-block centroids")
        first.append(int(ipos))
    return factor, first


def block_average(f: GridFunction, coarse: GridSpec) -> GridFunction:
    """Average ``f`` over fine-cell blocks onto ``coarse``.

    Integrals are preserved exactly up to roundoff and the sup norm cannot grow.
    Pairing identity: ``inner_coarse(phi, R f) == inner_fine(prolong(phi), f)``.
    """
    factor, first = _block_map(f.spec, coarse)
    tight = f.tight()
    if tight.is_empty_box:
        return GridFunction.zeros(coarse)
    # coarse block index of the first/last fine support point on each axis
    jlo = [(l - s) // factor for l, s in zip(tight.lo, first)]
    jhi = [(h - 1 - s) // factor + 1 for h, s in zip(tight.hi, first)]
    if any(j < 0 for j in jlo) or any(j > n for j, n in zip(jhi, coarse.shape)):
        raise GridError("function support does not fit the coarse grid")
    flo = [s + j * factor for s, j in zip(first, jlo)]
    fhi = [s + j * factor for s, j in zip(first, jhi)]
    vals = tight.box_values(flo, fhi)
    shape = []
    for k in range(f.spec.dim):
        shape += [jhi[k] - jlo[k], factor]
    blocks = vals.reshape(shape)
    summed = blocks.sum(axis=tuple(range(1, 2 * f.spec.dim, 2)))
    return GridFunction(coarse, summed / factor**f.spec.dim, jlo)


def prolong(F: GridFunction, fine: GridSpec) -> GridFunction:
    """Piecewise-constant injection of a coarse function onto ``fine`` (adjoint of block sums)."""
    factor, first = _block_map(fine, F.spec)
    tight = F.tight()
    if tight.is_empty_box:
        return GridFunction.zeros(fine)
    vals = tight.samples
    for k in range(fine.dim):
        vals = np.repeat(vals, factor, axis=k)
    lo = [s + j * factor for s, j in zip(first, tight.lo)]
    hi = [l + n for l, n in zip(lo, vals.shape)]
    clo = [max(0, l) for l in lo]
    chi = [min(n, h) for n, h in zip(fine.shape, hi)]
    sl = tuple(slice(a - l, b - l) for a, b, l in zip(clo, chi, lo))
    return GridFunction(fine, vals[sl], clo)


# -- serialization ------------------------------------------------------------
def spec_to_dict(spec: GridSpec) -> dict:
    return {
        "dim": spec.dim,
        "half_width": spec.half_width,
        "spacing": spec.spacing,
        "origin": list(spec.origin),
    }


def spec_from_dict(d: dict) -> GridSpec:
    return GridSpec(int(d["dim"]), float(d["half_width"]), float(d["spacing"]), tuple(d["origin"]))


def grid_function_arrays(f: GridFunction, prefix: str = "") -> dict[str, np.ndarray]:
    return {
        prefix + "grid": np.array(
            [f.spec.dim, f.spec.half_width, f.spec.spacing, *f.spec.origin], dtype=float
        ),
        prefix + "lo": np.array(f.lo, dtype=np.int64),
        prefix + "samples": np.ascontiguousarray(f.samples),
    }


def grid_function_from_arrays(arrs, prefix: str = "") -> GridFunction:
    g = np.asarray(arrs[prefix + "grid"], dtype=float)
    dim = int(g[0])
    spec = GridSpec(dim, float(g[1]), float(g[2]), tuple(float(v) for v in g[3 : 3 + dim]))
    return GridFunction(spec, np.asarray(arrs[prefix + "samples"]), tuple(arrs[prefix + "lo"]))


def save_grid_function(path, f: GridFunction) -> None:
    """Write ``f`` as an ``.npz`` container (layout in docs/FORMATS.md)."""
    arrays = grid_function_arrays(f)
    arrays["format_version"] = np.array(FORMAT_VERSION)
    arrays["kind"] = np.array("GridFunction")
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_grid_function(path) -> GridFunction:
    with np.load(path, allow_pickle=False) as z:
        if str(z["kind"]) != "GridFunction":
            raise GridError(f"{path} does not hold a GridFunction")
        if int(z["format_version"]) > FORMAT_VERSION:
            raise GridError("unsupported format version")
        return grid_function_from_arrays(z)


def functions_equal(fs: Iterable[GridFunction]) -> bool:
    fs = list(fs)
    return all(
        f.spec == fs[0].spec and np.array_equal(f.dense(), fs[0].dense()) for f in fs[1:]
    )
