"""Periodic uniform grids, binary set fields, set algebra, and distances.

The domain is the torus [0, extent_i) per axis, discretized into cells of
equal spacing; cell i has its center at (i + 1/2) * spacing. Sets are
cell-center indicators, so all set algebra is exact boolean algebra and
measures are additive without tolerance. Euclidean distances between sets
use an exact distance transform. Rasters round-trip through the MBOF1
format bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    ConfigurationError,
    ContainmentError,
    PreconditionError,
    SpecMismatchError,
)

_GUARD_TOL = 1e-9  # slack for containment checks at exact-fit configurations


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid over [0, extent_i) per axis.

    Args:
        dims: cells per axis; 2 or 3 axes, each at least 8.
        extent: physical side length per axis.
    """

    dims: tuple[int, ...]
    extent: tuple[float, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(n) for n in self.dims)
        extent = tuple(float(e) for e in self.extent)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "extent", extent)
        if len(dims) not in (2, 3):
            raise ConfigurationError(f"grid must have 2 or 3 axes, got {len(dims)}")
        if len(extent) != len(dims):
            raise ConfigurationError(
                f"extent has {len(extent)} entries for {len(dims)} axes"
            )
        if any(n < 8 for n in dims):
            raise ConfigurationError(f"dims must be >= 8 per axis, got {dims}")
        if any(e <= 0 for e in extent):
            raise ConfigurationError(f"extent must be positive, got {extent}")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extent, self.dims))

    @property
    def max_spacing(self) -> float:
        return max(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.dims))

    def cell_centers(self) -> tuple[np.ndarray, ...]:
        """1D arrays of cell-center coordinates per axis."""
        return tuple(
            (np.arange(n) + 0.5) * s for n, s in zip(self.dims, self.spacing)
        )

    def center_mesh(self) -> np.ndarray:
        """Array of shape dims + (ndim,) holding every cell center."""
        grids = np.meshgrid(*self.cell_centers(), indexing="ij")
        return np.stack(grids, axis=-1)

    def offset_mesh(self) -> np.ndarray:
        """Minimal-image lattice offsets in FFT (wrap) order, shape dims + (ndim,).

        Entry k holds the coordinates of the offset ((k + N/2) mod N - N/2) * s,
        so index 0 is the zero offset. Kernels are sampled on this mesh.
        """
        axes = []
        for n, s in zip(self.dims, self.spacing):
            k = np.arange(n)
            axes.append((((k + n // 2) % n) - n // 2) * s)
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)


def _require_same_spec(a, b) -> None:
    if a.spec != b.spec:
        raise SpecMismatchError(f"fields on different grids: {a.spec} vs {b.spec}")


@dataclass(frozen=True, eq=False)
class BinarySetField:
    """Cell-center indicator of a set on a GridSpec."""

    spec: GridSpec
    mask: np.ndarray

    def __post_init__(self) -> None:
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.spec.dims:
            raise SpecMismatchError(
                f"mask shape {mask.shape} does not match dims {self.spec.dims}"
            )
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def measure(self) -> float:
        return self.count * self.spec.cell_volume

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    def complement(self) -> BinarySetField:
        return BinarySetField(self.spec, ~self.mask)

    def union(self, other: BinarySetField) -> BinarySetField:
        _require_same_spec(self, other)
        return BinarySetField(self.spec, self.mask | other.mask)

    def intersection(self, other: BinarySetField) -> BinarySetField:
        _require_same_spec(self, other)
        return BinarySetField(self.spec, self.mask & other.mask)

    def difference(self, other: BinarySetField) -> BinarySetField:
        _require_same_spec(self, other)
        return BinarySetField(self.spec, self.mask & ~other.mask)

    def is_subset_of(self, other: BinarySetField) -> bool:
        _require_same_spec(self, other)
        return not (self.mask & ~other.mask).any()

    def same_set(self, other: BinarySetField) -> bool:
        _require_same_spec(self, other)
        return bool(np.array_equal(self.mask, other.mask))

    def touches_border(self) -> bool:
        m = self.mask
        for axis in range(m.ndim):
            first = np.take(m, 0, axis=axis)
            last = np.take(m, -1, axis=axis)
            if first.any() or last.any():
                return True
        return False


def union(a: BinarySetField, b: BinarySetField) -> BinarySetField:
    return a.union(b)


def intersection(a: BinarySetField, b: BinarySetField) -> BinarySetField:
    return a.intersection(b)


def difference(a: BinarySetField, b: BinarySetField) -> BinarySetField:
    return a.difference(b)


def complement(a: BinarySetField) -> BinarySetField:
    return a.complement()


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real-valued field sampled at cell centers."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.spec.dims:
            raise SpecMismatchError(
                f"values shape {values.shape} does not match dims {self.spec.dims}"
            )
        if not np.isfinite(values).all():
            raise PreconditionError("scalar field contains non-finite values")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ProbeSet:
    """Analytic boundary probes: points, outward normals, principal data.

    curvatures has shape (n, ndim-1) (principal curvatures) and tangents has
    shape (n, ndim-1, ndim) (principal directions), both from the analytic
    shape, never from the raster.
    """

    points: np.ndarray
    normals: np.ndarray
    curvatures: np.ndarray
    tangents: np.ndarray

    def __post_init__(self) -> None:
        for name in ("points", "normals", "curvatures", "tangents"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.points.shape[0]


_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def _golden_angles(n: int, exclusion: float, period_targets: np.ndarray) -> np.ndarray:
    """n angles in [0, 2pi) by golden-ratio stepping, skipping excluded arcs."""
    out: list[float] = []
    j = 0
    while len(out) < n:
        if j > 100 * n + 1000:
            raise PreconditionError(
                f"cannot place {n} probes with exclusion margin {exclusion}"
            )
        theta = (0.5 + j * _GOLDEN_ANGLE) % (2.0 * math.pi)
        j += 1
        if exclusion > 0.0:
            gap = np.abs(np.angle(np.exp(1j * (theta - period_targets))))
            if gap.min() < exclusion:
                continue
        out.append(theta)
    return np.asarray(out)


_AXIS_NORMALS_2D = np.array([0.0, 0.5, 1.0, 1.5]) * math.pi


class Shape:
    """Analytic shape descriptor; subclasses implement containment."""

    kind: str = "shape"
    guard_exempt: bool = False  # periodic-by-construction shapes skip the guard

    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned (lower, upper) bounds of the shape."""
        raise NotImplementedError

    def validate(self, spec: GridSpec, guard: float) -> None:
        """Raise ContainmentError if the shape plus guard band leaves the domain."""
        if self.guard_exempt:
            return
        lo, hi = self.bounds()
        extent = np.asarray(spec.extent)
        if (lo < guard - _GUARD_TOL).any() or (hi > extent - guard + _GUARD_TOL).any():
            raise ContainmentError(
                f"{self.kind} with bounds [{lo}, {hi}] does not fit inside "
                f"domain {spec.extent} minus guard band {guard}"
            )

    def boundary_probes(self, n: int, *, axis_exclusion: float = 0.0) -> ProbeSet:
        raise PreconditionError(f"{self.kind} has no analytic boundary probes")

    def frame_at(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Outward normal, principal directions, principal curvatures at x."""
        raise PreconditionError(f"{self.kind} has no analytic boundary frame")


@dataclass(frozen=True)
class Ball(Shape):
    center: tuple[float, ...]
    radius: float
    kind = "ball"

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise PreconditionError(f"ball radius must be positive, got {self.radius}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        delta = points - np.asarray(self.center)
        return np.einsum("...i,...i->...", delta, delta) < self.radius**2

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def boundary_probes(self, n: int, *, axis_exclusion: float = 0.0) -> ProbeSet:
        c = np.asarray(self.center, dtype=np.float64)
        if len(c) == 2:
            theta = _golden_angles(n, axis_exclusion, _AXIS_NORMALS_2D)
            normals = np.stack([np.cos(theta), np.sin(theta)], axis=1)
            tangents = np.stack([-np.sin(theta), np.cos(theta)], axis=1)[:, None, :]
            curv = np.full((n, 1), 1.0 / self.radius)
            return ProbeSet(c + self.radius * normals, normals, curv, tangents)
        # d=3: Fibonacci sphere points; axis exclusion tests all 6 axis normals
        k = np.arange(n * 4)
        z = 1.0 - (2.0 * k + 1.0) / (n * 4)
        phi = k * _GOLDEN_ANGLE
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        cand = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
        if axis_exclusion > 0.0:
            ok = np.abs(cand).max(axis=1) < math.cos(axis_exclusion)
            cand = cand[ok]
        if cand.shape[0] < n:
            raise PreconditionError(
                f"cannot place {n} sphere probes with exclusion {axis_exclusion}"
            )
        normals = cand[:n]
        # principal directions: any orthonormal pair in the tangent plane
        helper = np.where(
            (np.abs(normals[:, 0]) < 0.9)[:, None], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]
        )
        t1 = np.cross(normals, helper)
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        t2 = np.cross(normals, t1)
        tangents = np.stack([t1, t2], axis=1)
        curv = np.full((n, 2), 1.0 / self.radius)
        return ProbeSet(c + self.radius * normals, normals, curv, tangents)

    def frame_at(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        nu = x - np.asarray(self.center)
        nu = nu / np.linalg.norm(nu)
        if len(nu) == 2:
            tangents = np.array([[-nu[1], nu[0]]])
            curv = np.array([1.0 / self.radius])
        else:
            helper = np.array([1.0, 0.0, 0.0]) if abs(nu[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
            t1 = np.cross(nu, helper)
            t1 /= np.linalg.norm(t1)
            tangents = np.stack([t1, np.cross(nu, t1)])
            curv = np.array([1.0 / self.radius, 1.0 / self.radius])
        return nu, tangents, curv


@dataclass(frozen=True)
class Ellipse(Shape):
    """Axis-aligned ellipse (2D) or ellipsoid (3D)."""

    center: tuple[float, ...]
    semi_axes: tuple[float, ...]
    kind = "ellipse"

    def __post_init__(self) -> None:
        if len(self.center) != len(self.semi_axes):
            raise PreconditionError("center and semi_axes dimensions differ")
        if any(a <= 0 for a in self.semi_axes):
            raise PreconditionError(f"semi-axes must be positive, got {self.semi_axes}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        delta = (points - np.asarray(self.center)) / np.asarray(self.semi_axes)
        return np.einsum("...i,...i->...", delta, delta) < 1.0

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center)
        a = np.asarray(self.semi_axes)
        return c - a, c + a

    def boundary_probes(self, n: int, *, axis_exclusion: float = 0.0) -> ProbeSet:
        if len(self.center) != 2:
            raise PreconditionError("ellipse probes are implemented for d=2 only")
        a, b = self.semi_axes
        c = np.asarray(self.center, dtype=np.float64)
        # golden-spaced parameter values, filtered on the resulting normal angle
        ts, pts, nms, tgs, curv = [], [], [], [], []
        j = 0
        while len(ts) < n:
            t = (0.5 + j * _GOLDEN_ANGLE) % (2.0 * math.pi)
            j += 1
            if j > 100 * n + 1000:
                raise PreconditionError(
                    f"cannot place {n} probes with exclusion margin {axis_exclusion}"
                )
            nu = np.array([b * math.cos(t), a * math.sin(t)])
            nu /= np.linalg.norm(nu)
            if axis_exclusion > 0.0:
                ang = math.atan2(nu[1], nu[0]) % (2.0 * math.pi)
                gap = np.abs(np.angle(np.exp(1j * (ang - _AXIS_NORMALS_2D))))
                if gap.min() < axis_exclusion:
                    continue
            ts.append(t)
            pts.append(c + np.array([a * math.cos(t), b * math.sin(t)]))
            nms.append(nu)
            tgs.append([[-nu[1], nu[0]]])
            w = a * a * math.sin(t) ** 2 + b * b * math.cos(t) ** 2
            curv.append([a * b / w**1.5])
        return ProbeSet(np.array(pts), np.array(nms), np.array(curv), np.array(tgs))

    def frame_at(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if len(self.center) != 2:
            raise PreconditionError("ellipse frames are implemented for d=2 only")
        a, b = self.semi_axes
        rel = np.asarray(x, dtype=np.float64) - np.asarray(self.center)
        t = math.atan2(rel[1] / b, rel[0] / a)
        nu = np.array([b * math.cos(t), a * math.sin(t)])
        nu /= np.linalg.norm(nu)
        w = a * a * math.sin(t) ** 2 + b * b * math.cos(t) ** 2
        return nu, np.array([[-nu[1], nu[0]]]), np.array([a * b / w**1.5])


@dataclass(frozen=True)
class BallIntersection(Shape):
    """Intersection of k balls (convex for overlapping balls)."""

    centers: tuple[tuple[float, ...], ...]
    radii: tuple[float, ...]
    kind = "ball_intersection"

    def __post_init__(self) -> None:
        if len(self.centers) != len(self.radii) or len(self.centers) < 2:
            raise PreconditionError("need k >= 2 centers with matching radii")

    def _balls(self) -> list[Ball]:
        return [Ball(c, r) for c, r in zip(self.centers, self.radii)]

    def contains(self, points: np.ndarray) -> np.ndarray:
        out = None
        for ball in self._balls():
            inside = ball.contains(points)
            out = inside if out is None else (out & inside)
        return out

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        los, his = zip(*(ball.bounds() for ball in self._balls()))
        return np.max(los, axis=0), np.min(his, axis=0)


@dataclass(frozen=True)
class Dumbbell(Shape):
    """Two equal balls joined by a straight neck of given half-width (2D)."""

    center_a: tuple[float, float]
    center_b: tuple[float, float]
    radius: float
    neck_half_width: float
    kind = "dumbbell"

    def __post_init__(self) -> None:
        if self.radius <= 0 or self.neck_half_width <= 0:
            raise PreconditionError("dumbbell radius and neck must be positive")
        if self.neck_half_width >= self.radius:
            raise PreconditionError("neck must be thinner than the balls")

    def contains(self, points: np.ndarray) -> np.ndarray:
        a = np.asarray(self.center_a, dtype=np.float64)
        b = np.asarray(self.center_b, dtype=np.float64)
        in_balls = Ball(tuple(a), self.radius).contains(points) | Ball(
            tuple(b), self.radius
        ).contains(points)
        axis = b - a
        length = np.linalg.norm(axis)
        axis = axis / length
        rel = points - a
        along = np.einsum("...i,i->...", rel, axis)
        perp = rel - along[..., None] * axis
        perp_dist = np.sqrt(np.einsum("...i,...i->...", perp, perp))
        in_neck = (along >= 0) & (along <= length) & (perp_dist < self.neck_half_width)
        return in_balls | in_neck

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.asarray(self.center_a)
        b = np.asarray(self.center_b)
        return np.minimum(a, b) - self.radius, np.maximum(a, b) + self.radius


@dataclass(frozen=True)
class Stripes(Shape):
    """Axis-aligned stripes of the given period; bands of width period/2.

    Wraps exactly on the torus, so the guard band does not apply; the extent
    along the stripe axis must be an integer number of periods.
    """

    period: float
    axis: int = 0
    kind = "stripes"
    guard_exempt = True

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise PreconditionError(f"period must be positive, got {self.period}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        coord = points[..., self.axis]
        return np.floor(coord / (self.period / 2.0)).astype(np.int64) % 2 == 0

    def validate(self, spec: GridSpec, guard: float) -> None:
        ratio = spec.extent[self.axis] / self.period
        if abs(ratio - round(ratio)) > 1e-9:
            raise ContainmentError(
                f"stripes of period {self.period} do not wrap on extent "
                f"{spec.extent[self.axis]} (need an integer period count)"
            )


@dataclass(frozen=True)
class HalfSpace(Shape):
    """Cells with coordinate < threshold along one axis.

    On the torus this is a band with two flat interfaces; both behave
    identically for even kernels. Guard-exempt by construction.
    """

    axis: int
    threshold: float
    kind = "half_space"
    guard_exempt = True

    def contains(self, points: np.ndarray) -> np.ndarray:
        return points[..., self.axis] < self.threshold


def make_shape(spec: GridSpec, shape: Shape, *, guard: float = 0.0) -> BinarySetField:
    """Rasterize an analytic shape: cell true iff its center is inside.

    Args:
        spec: target grid.
        shape: analytic descriptor.
        guard: width of the empty margin to enforce around bounded shapes
            (one kernel support radius, to keep periodic wrap inert).

    Raises:
        ContainmentError: shape plus guard band exceeds the domain.
    """
    shape.validate(spec, guard)
    mask = shape.contains(spec.center_mesh())
    return BinarySetField(spec, mask)


def boundary_distance(inner: BinarySetField, outer: BinarySetField) -> float:
    """Min Euclidean distance from cells of `inner` to the complement of `outer`.

    Returns math.inf when `inner` is empty (extinct sentinel) or `outer` is the
    full domain. Distances are exact lattice distances (cell-center to
    cell-center) from the two-pass Euclidean distance transform.

    Raises:
        PreconditionError: inner is not a subset of outer.
    """
    _require_same_spec(inner, outer)
    if not inner.is_subset_of(outer):
        raise PreconditionError("inner must be a subset of outer")
    if inner.is_empty:
        return math.inf
    if outer.mask.all():
        return math.inf
    spacing = outer.spec.spacing
    if outer.touches_border():
        # wrap-pad so every torus minimal image of a false cell is present
        pad = [(n // 2, n // 2) for n in outer.spec.dims]
        mask = np.pad(outer.mask, pad, mode="wrap")
        dist = ndimage.distance_transform_edt(mask, sampling=spacing)
        core = tuple(slice(p[0], p[0] + n) for p, n in zip(pad, outer.spec.dims))
        return float(dist[core][inner.mask].min())
    # guarded sets never touch the border: crop to the bounding box plus a
    # one-cell false ring, which contains the nearest false cell of every
    # true cell
    idx = np.nonzero(outer.mask)
    crop = tuple(
        slice(int(ix.min()) - 1, int(ix.max()) + 2) for ix in idx
    )
    dist = ndimage.distance_transform_edt(outer.mask[crop], sampling=spacing)
    return float(dist[inner.mask[crop]].min())


@dataclass(frozen=True)
class DisplacementResult:
    """Signed normal displacements per probe; NaN where no crossing was found."""

    z: np.ndarray
    no_crossing: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.z[~self.no_crossing]


def _bilinear_periodic(values: np.ndarray, spec: GridSpec, points: np.ndarray) -> np.ndarray:
    """Bilinear/trilinear interpolation at physical points with periodic wrap."""
    coords = [
        points[..., axis] / s - 0.5 for axis, s in enumerate(spec.spacing)
    ]
    return ndimage.map_coordinates(
        values, np.asarray(coords), order=1, mode="grid-wrap"
    )


def extract_normal_displacement(
    after: BinarySetField,
    probes: ProbeSet,
    *,
    search_window: float | None = None,
) -> DisplacementResult:
    """Signed distance along each probe normal to the boundary of `after`.

    The mask is interpolated bilinearly as {0,1} values and thresholded at
    1/2; z is the arc length from the probe point to the first crossing,
    negative when the probe point lies outside `after`. Accuracy is
    resolution-limited to about half a cell.

    Args:
        after: the evolved set.
        probes: analytic boundary points and outward normals of the prior set.
        search_window: half-length of the scan segment; defaults to 16 cells.

    Returns:
        DisplacementResult with per-probe z and a no-crossing flag for probes
        whose scan segment never crosses the boundary.
    """
    spec = after.spec
    if probes.points.shape[1] != spec.ndim:
        raise SpecMismatchError("probe dimension does not match grid dimension")
    step = spec.max_spacing / 4.0
    window = 16.0 * spec.max_spacing if search_window is None else float(search_window)
    m = max(2, int(math.ceil(window / step)))
    offsets = np.arange(-m, m + 1) * step
    pts = probes.points[None, :, :] + offsets[:, None, None] * probes.normals[None, :, :]
    vals = _bilinear_periodic(after.mask.astype(np.float64), spec, pts)
    return _first_crossing(vals - 0.5, offsets)


def _first_crossing(f: np.ndarray, offsets: np.ndarray) -> DisplacementResult:
    """Nearest sign crossing of f(offsets) per probe column.

    f has shape (len(offsets), n_probes); looks outward (offsets > 0) when the
    probe starts inside (f > 0 at offset 0) and inward otherwise.
    """
    m = len(offsets) // 2
    n = f.shape[1]
    z = np.full(n, np.nan)
    missing = np.ones(n, dtype=bool)
    inside0 = f[m, :] > 0.0
    for i in range(n):
        col = f[:, i]
        if inside0[i]:
            seg = col[m:]
            hit = np.nonzero(seg <= 0.0)[0]
            if hit.size == 0:
                continue
            j = hit[0]
            if j == 0:
                z[i] = offsets[m]
            else:
                a, b = seg[j - 1], seg[j]
                frac = a / (a - b)
                z[i] = offsets[m + j - 1] + frac * (offsets[1] - offsets[0])
        else:
            seg = col[: m + 1][::-1]  # walk inward from the probe point
            hit = np.nonzero(seg > 0.0)[0]
            if hit.size == 0:
                continue
            j = hit[0]
            if j == 0:
                z[i] = offsets[m]
            else:
                a, b = seg[j - 1], seg[j]  # a <= 0 < b
                frac = a / (a - b)
                z[i] = offsets[m - (j - 1)] - frac * (offsets[1] - offsets[0])
        missing[i] = False
    return DisplacementResult(z, missing)


# --- MBOF1 raster format ------------------------------------------------

_MBOF_MAGIC = "MBOF1"


def write_mbof(path, field: BinarySetField | ScalarField) -> None:
    """Dump a mask (u8) or scalar field (f64le) with an ASCII header line."""
    spec = field.spec
    if isinstance(field, BinarySetField):
        dtype = "u8"
        payload = field.mask.astype(np.uint8).tobytes(order="C")
    else:
        dtype = "f64le"
        payload = field.values.astype("<f8").tobytes(order="C")
    header = " ".join(
        [_MBOF_MAGIC, str(spec.ndim)]
        + [str(n) for n in spec.dims]
        + [repr(e) for e in spec.extent]
        + [dtype]
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii") + b"\n")
        fh.write(payload)


def read_mbof(path) -> BinarySetField | ScalarField:
    """Read an MBOF1 raster back; inverse of write_mbof, bit-exact."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        payload = fh.read()
    parts = header.split()
    if not parts or parts[0] != _MBOF_MAGIC:
        raise ConfigurationError(f"not an MBOF1 file: header {header!r}")
    try:
        d = int(parts[1])
        dims = tuple(int(x) for x in parts[2 : 2 + d])
        extent = tuple(float(x) for x in parts[2 + d : 2 + 2 * d])
        dtype = parts[2 + 2 * d]
    except (IndexError, ValueError) as exc:
        raise ConfigurationError(f"malformed MBOF1 header: {header!r}") from exc
    if len(parts) != 3 + 2 * d:
        raise ConfigurationError(f"malformed MBOF1 header: {header!r}")
    spec = GridSpec(dims, extent)
    count = spec.cell_count
    if dtype == "u8":
        if len(payload) != count:
            raise ConfigurationError(
                f"payload has {len(payload)} bytes, expected {count}"
            )
        mask = np.frombuffer(payload, dtype=np.uint8).reshape(dims).astype(bool)
        return BinarySetField(spec, mask)
    if dtype == "f64le":
        if len(payload) != 8 * count:
            raise ConfigurationError(
                f"payload has {len(payload)} bytes, expected {8 * count}"
            )
        values = np.frombuffer(payload, dtype="<f8").reshape(dims)
        return ScalarField(spec, values)
    raise ConfigurationError(f"unknown MBOF1 dtype {dtype!r}")
