"""Convolution kernels: analytic descriptors, grid sampling, and analysis maps.

Kernels are carried as analytic descriptors and sampled lazily at each time
scale h via K_h(x) = h^{-d/2} K(x/sqrt(h)), so rescaling never interpolates a
coarse raster. Sampled kernels are exactly even (symmetrized) and have
discrete mass exactly 1 (renormalized), which keeps flat interfaces exactly
at the 1/2 level on the grid.

The analysis maps send a kernel to its directional distributions
A(theta) = int_0^inf r^d K(r theta) dr and B(theta) = 2 int r^{d-2} K(r theta) dr,
its surface tension sigma_K(nu) = 1/2 int |nu.x| K(x) dx, its inverse mobility
1/mu_K(n) = 2 int_{x.n=0} K, and the anisotropic mean curvature
H_sigma(x) = sum_i kappa_i int X_i^2 K(X, 0) dX of a shape boundary point.
construct_kernel inverts the pair (A, B) into a compactly supported
nonnegative kernel f(theta) r^2 (g(theta)-r)^2 on each ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, NumericError, PreconditionError
from .grid import GridSpec

__all__ = [
    "KernelDescriptor",
    "GaussianKernel",
    "BoxKernel",
    "StripeBoxKernel",
    "BackwardThreeHatKernel",
    "SmoothPlateauKernel",
    "DiscPlateauKernel",
    "CustomRadialKernel",
    "ConstructedKernel",
    "DirectionalDistribution",
    "SampledKernel",
    "gaussian_kernel",
    "sample_kernel",
    "rescale_kernel",
    "construct_kernel",
    "directional_moments",
    "surface_tension_of",
    "mobility_of",
    "anisotropic_curvature",
    "special_kernels",
    "fit_A_from_sigma",
    "TensionFit",
    "arc_indicator_tension",
    "minimal_resolvable_h",
    "uniform_angles",
    "sphere_grid",
    "SphereGrid",
    "calibrated_smooth_plateau",
    "calibrated_disc_plateau",
]

_QUAD_ABS_TARGET = 1e-8  # per-ray quadrature accuracy contract


# --- smooth bump machinery (plateau kernels) ------------------------------


def _eta(s: np.ndarray | float) -> np.ndarray:
    """Standard bump exp(s^2/(s^2-1)) on (-1, 1), zero outside."""
    s = np.asarray(s, dtype=np.float64)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        val = np.exp(s * s / (s * s - 1.0))
    out[inside] = val[inside]
    return out


def _eta_step(s: np.ndarray | float) -> np.ndarray:
    """Smooth connector: 1 for s <= 0, eta(eta(s-1)) on [0, 1], 0 for s >= 1."""
    s = np.asarray(s, dtype=np.float64)
    out = np.where(s <= 0.0, 1.0, 0.0)
    mid = (s > 0.0) & (s < 1.0)
    out = np.where(mid, _eta(_eta(s - 1.0)), out)
    return out


@lru_cache(maxsize=1)
def _eta_step_mass() -> float:
    return quad(lambda s: float(_eta_step(s)), 0.0, 1.0, limit=200)[0]


@lru_cache(maxsize=1)
def _eta_mass() -> float:
    return quad(lambda s: float(_eta(s)), -1.0, 1.0, limit=200)[0]


# --- directional distributions --------------------------------------------


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Icosphere nodes with equal-coverage weights and barycentric lookup."""

    vertices: np.ndarray  # (n, 3) unit vectors, antipodally symmetric
    faces: np.ndarray  # (m, 3) vertex indices
    weights: np.ndarray  # (n,) spherical areas / 3 summed over incident faces

    def __post_init__(self) -> None:
        for name in ("vertices", "faces", "weights"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def face_centroids(self) -> np.ndarray:
        c = self.vertices[self.faces].mean(axis=1)
        return c / np.linalg.norm(c, axis=1, keepdims=True)

    def interpolate(self, values: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """Barycentric interpolation of per-vertex values at unit directions."""
        directions = np.atleast_2d(directions)
        lengths = np.linalg.norm(directions, axis=1)
        if (lengths <= 0.0).any():
            raise PreconditionError("directions must be nonzero vectors")
        directions = directions / lengths[:, None]
        centroids = self.face_centroids
        out = np.empty(directions.shape[0])
        for i, q in enumerate(directions):
            cand = np.argsort(centroids @ q)[-8:]
            best, best_min = None, -np.inf
            for fi in cand:
                tri = self.vertices[self.faces[fi]]
                try:
                    lam = np.linalg.solve(tri.T, q)
                except np.linalg.LinAlgError:
                    continue
                s = lam.sum()
                if s <= 0:
                    continue
                lam = lam / s
                if lam.min() > best_min:
                    best_min, best = lam.min(), (fi, lam)
            fi, lam = best
            lam = np.clip(lam, 0.0, None)
            lam = lam / lam.sum()
            out[i] = lam @ values[self.faces[fi]]
        return out


def _spherical_triangle_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """L'Huilier's formula for the area of a spherical triangle."""
    sa = math.acos(np.clip(np.dot(b, c), -1, 1))
    sb = math.acos(np.clip(np.dot(a, c), -1, 1))
    sc = math.acos(np.clip(np.dot(a, b), -1, 1))
    s = 0.5 * (sa + sb + sc)
    t = math.sqrt(
        max(
            0.0,
            math.tan(0.5 * s)
            * math.tan(0.5 * (s - sa))
            * math.tan(0.5 * (s - sb))
            * math.tan(0.5 * (s - sc)),
        )
    )
    return 4.0 * math.atan(t)


@lru_cache(maxsize=8)
def sphere_grid(level: int = 3) -> SphereGrid:
    """Icosahedron subdivided `level` times, projected to the unit sphere."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    vlist = [tuple(v) for v in verts]
    index = {v: i for i, v in enumerate(vlist)}

    def midpoint(i, j):
        m = verts_arr[i] + verts_arr[j]
        m = m / np.linalg.norm(m)
        key = tuple(np.round(m, 12))
        if key not in index:
            index[key] = len(vlist)
            vlist.append(tuple(m))
        return index[key]

    for _ in range(level):
        verts_arr = np.array(vlist)
        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new_faces, dtype=np.int64)
    vertices = np.array(vlist)
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    weights = np.zeros(len(vertices))
    for a, b, c in faces:
        area = _spherical_triangle_area(vertices[a], vertices[b], vertices[c])
        weights[[a, b, c]] += area / 3.0
    return SphereGrid(vertices, faces, weights)


@dataclass(frozen=True, eq=False)
class DirectionalDistribution:
    """Even function on the unit sphere, sampled on a fixed node set.

    d=2: `angles` are n uniform nodes in [0, pi) (evenness folds the other
    half) and `weights` are the half-circle node measures pi/n.
    d=3: `sphere` holds icosphere nodes covering the whole sphere with
    spherical-area weights; values are symmetrized over antipodes.
    """

    values: np.ndarray
    angles: np.ndarray | None = None
    sphere: SphereGrid | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if (self.angles is None) == (self.sphere is None):
            raise PreconditionError(
                "exactly one of angles (d=2) or sphere (d=3) must be given"
            )
        if self.angles is not None:
            angles = np.asarray(self.angles, dtype=np.float64)
            angles.setflags(write=False)
            object.__setattr__(self, "angles", angles)
            if angles.shape != values.shape:
                raise PreconditionError("angles and values must match in shape")

    @property
    def dim(self) -> int:
        return 2 if self.angles is not None else 3

    @property
    def nodes(self) -> np.ndarray:
        """Unit vectors of the sample nodes."""
        if self.angles is not None:
            return np.stack([np.cos(self.angles), np.sin(self.angles)], axis=1)
        return self.sphere.vertices

    @property
    def weights(self) -> np.ndarray:
        """Node quadrature weights (half circle for d=2, full sphere for d=3)."""
        if self.angles is not None:
            n = len(self.angles)
            return np.full(n, math.pi / n)
        return self.sphere.weights

    def at(self, where: np.ndarray | float) -> np.ndarray | float:
        """Interpolated value at angles (d=2) or unit directions (d=3)."""
        if self.angles is not None:
            theta = np.asarray(where, dtype=np.float64)
            n = len(self.angles)
            t = np.mod(theta, math.pi) / (math.pi / n)
            i0 = np.floor(t).astype(np.int64) % n
            frac = t - np.floor(t)
            i1 = (i0 + 1) % n
            out = (1.0 - frac) * self.values[i0] + frac * self.values[i1]
            return float(out) if np.isscalar(where) else out
        dirs = np.atleast_2d(np.asarray(where, dtype=np.float64))
        out = self.sphere.interpolate(self.values, dirs)
        return float(out[0]) if np.asarray(where).ndim == 1 else out


def uniform_angles(n: int) -> np.ndarray:
    """n uniform angle nodes in [0, pi)."""
    return np.arange(n) * (math.pi / n)


# --- kernel descriptors ----------------------------------------------------


class KernelDescriptor:
    """Analytic kernel at time scale h=1; sampled on grids by sample_kernel."""

    kind: str = "kernel"
    nonnegative: bool = True
    support_radius: float = math.inf
    moment_cutoff: float | None = None  # upper limit for radial moments

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """K at physical points, shape (..., d) -> (...)."""
        raise NotImplementedError

    def sample_values(self, points: np.ndarray) -> np.ndarray:
        """Values used for grid sampling; defaults to pointwise evaluation.

        Discontinuous kernels override this to apply midpoint-of-jump
        weights on cells that sit exactly on a jump surface.
        """
        return self.evaluate(points)

    def ray_breakpoints(self, direction: np.ndarray) -> list[float]:
        """Radii where K is non-smooth along the ray (quadrature split points)."""
        return []

    def params(self) -> dict:
        """Flat parameter mapping for serialization."""
        return {}


@dataclass(frozen=True)
class GaussianKernel(KernelDescriptor):
    """(4 pi)^{-d/2} exp(-|x|^2/4); the h=1 heat kernel.

    support_radius is the effective radius 10 (tail mass below 2e-11).
    """

    kind = "gaussian"
    support_radius = 10.0
    moment_cutoff = 40.0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        d = points.shape[-1]
        r2 = np.einsum("...i,...i->...", points, points)
        return (4.0 * math.pi) ** (-d / 2.0) * np.exp(-r2 / 4.0)


@dataclass(frozen=True)
class BoxKernel(KernelDescriptor):
    """2^{-d} on the cube [-1, 1]^d.

    Grid sampling weights cells on a face |x_i| = 1 by 1/2 per touching face
    (midpoint-of-jump convention); this makes period-2 stripes convolve to
    exactly 1/2 everywhere on matching grids.
    """

    kind = "box"
    support_radius = math.sqrt(3.0)  # circumscribed radius; 2D uses sqrt(2)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        d = points.shape[-1]
        inside = (np.abs(points) < 1.0).all(axis=-1)
        return np.where(inside, 2.0**-d, 0.0)

    def sample_values(self, points: np.ndarray) -> np.ndarray:
        d = points.shape[-1]
        a = np.abs(points)
        w = np.where(a < 1.0 - 1e-12, 1.0, np.where(a <= 1.0 + 1e-12, 0.5, 0.0))
        return 2.0**-d * np.prod(w, axis=-1)

    def ray_breakpoints(self, direction: np.ndarray) -> list[float]:
        amax = np.abs(direction).max()
        return [1.0 / amax] if amax > 0 else []


@dataclass(frozen=True)
class StripeBoxKernel(BoxKernel):
    """Box kernel under its stripe-degenerate configuration (alias kind)."""

    kind = "stripe_box"


_HAT_CENTERS = (1.0, 7.0, 9.0)
# weights solving the hat-moment system (M0, M1, M2) = (1/4, 1/(2pi), -1/2),
# which gives discrete mass 1, inverse mobility 1, surface tension -1 in d=2
_HAT_WEIGHTS = (
    (329.0 * math.pi - 384.0) / (576.0 * math.pi),
    (240.0 - 5.0 * math.pi) / (144.0 * math.pi),
    -(7.0 * math.pi + 192.0) / (192.0 * math.pi),
)


@dataclass(frozen=True)
class BackwardThreeHatKernel(KernelDescriptor):
    """Radial d=2 kernel summing three hat functions, with sigma_K = -1.

    K(x) = sum_i w_i (1 - |2|x| - c_i|)^+ for c = (1, 7, 9). The weights make
    the radial moments (int K~ dr, int r K~ dr, int r^2 K~ dr) equal
    (1/4, 1/(2 pi), -1/2): unit mass, 1/mu = 1, sigma_K = -1. The running
    moment int_0^r s K~(s) ds stays positive, so a single thresholding step
    is well posed: balls expand, planes stand still.
    """

    kind = "backward_three_hat"
    nonnegative = False
    support_radius = 5.0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        if points.shape[-1] != 2:
            raise PreconditionError("backward_three_hat is defined for d=2 only")
        r = np.sqrt(np.einsum("...i,...i->...", points, points))
        out = np.zeros_like(r)
        for w, c in zip(_HAT_WEIGHTS, _HAT_CENTERS):
            out += w * np.maximum(1.0 - np.abs(2.0 * r - c), 0.0)
        return out

    def ray_breakpoints(self, direction: np.ndarray) -> list[float]:
        return [0.5, 1.0, 3.0, 3.5, 4.0, 4.5, 5.0]


@dataclass(frozen=True)
class SmoothPlateauKernel(KernelDescriptor):
    """Radial smooth kernel, constant on the ball of radius 1 - taper_width.

    Profile 1 on [0, 1 - taper_width], then the smooth connector down to 0 at
    1 + taper_width. Convolving its normalization with a set E of measure
    half the plateau-ball measure yields the exact value 1/2 wherever E sits
    inside the flat region, so the 1/2-level set is fat.
    """

    taper_width: float = 0.1
    kind = "smooth_plateau"

    def __post_init__(self) -> None:
        if not 0.0 < self.taper_width < 1.0:
            raise PreconditionError("taper_width must be in (0, 1)")

    @property
    def support_radius(self) -> float:  # type: ignore[override]
        return 1.0 + self.taper_width

    @property
    def plateau_radius(self) -> float:
        return 1.0 - self.taper_width

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        r = np.sqrt(np.einsum("...i,...i->...", points, points))
        s = (r - self.plateau_radius) / (2.0 * self.taper_width)
        return _eta_step(s)

    def ray_breakpoints(self, direction: np.ndarray) -> list[float]:
        return [self.plateau_radius, self.support_radius]

    def params(self) -> dict:
        return {"taper_width": self.taper_width}


@dataclass(frozen=True)
class DiscPlateauKernel(KernelDescriptor):
    """Kernel strictly decreasing along rays whose hyperplane integral
    F(y) = int K(X, y) dX is constant on a centered strip.

    Inside |y| <= Y0 = 2 ||eta_step||_1 the profile is the product bump
    phi(y)^{1-d} eta_{d-1}(X / phi(y)) with phi(y) = 1 - eta(y / Y0)/4, whose
    X-integral is independent of y; outside, the bump decays along y with the
    smooth connector. Convolving with a slab of thickness 3 ||eta_step||_1
    (half the kernel's F-mass) gives exactly 1/2 on a thinner slab.
    """

    kind = "disc_plateau"

    @property
    def strip_half_width(self) -> float:
        return 2.0 * _eta_step_mass()

    @property
    def slab_half_thickness(self) -> float:
        """Half-thickness of the matched fat-set slab."""
        return 1.5 * _eta_step_mass()

    @property
    def support_radius(self) -> float:  # type: ignore[override]
        return math.hypot(1.0, self.strip_half_width + 1.0)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        y = points[..., -1]
        X = points[..., :-1]
        y0 = self.strip_half_width
        phi = 1.0 - _eta(y / y0) / 4.0
        d = points.shape[-1]
        bump = np.ones(points.shape[:-1])
        for i in range(d - 1):
            bump = bump * _eta(X[..., i] / phi)
        inside = np.abs(y) <= y0
        core = phi ** (1.0 - d) * bump
        tailbump = np.ones(points.shape[:-1])
        for i in range(d - 1):
            tailbump = tailbump * _eta(X[..., i])
        tail = _eta_step(np.abs(y) - y0) * tailbump
        return np.where(inside, core, tail)

    def ray_breakpoints(self, direction: np.ndarray) -> list[float]:
        # conservative split at the strip edge crossing and the support edge
        pts = [self.support_radius]
        ny = abs(direction[-1])
        if ny > 1e-12:
            pts.append(min(self.strip_half_width / ny, self.support_radius))
        return sorted(set(pts))


@dataclass(frozen=True)
class CustomRadialKernel(KernelDescriptor):
    """Radial kernel from a user profile K(x) = profile(|x|).

    Decay hypotheses are checked empirically on the sampled range only.
    """

    profile: object  # callable r -> value
    radius: float
    negative_allowed: bool = False
    kind = "custom_radial"

    @property
    def support_radius(self) -> float:  # type: ignore[override]
        return self.radius

    @property
    def nonnegative(self) -> bool:  # type: ignore[override]
        return not self.negative_allowed

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        r = np.sqrt(np.einsum("...i,...i->...", points, points))
        vals = np.asarray(self.profile(r), dtype=np.float64)
        return np.where(r <= self.radius, vals, 0.0)


def _interp_periodic_pi(angles: np.ndarray, values: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Linear interpolation of values on uniform [0, pi) nodes, period pi."""
    n = len(angles)
    t = np.mod(theta, math.pi) / (math.pi / n)
    i0 = np.floor(t).astype(np.int64) % n
    frac = t - np.floor(t)
    i1 = (i0 + 1) % n
    return (1.0 - frac) * values[i0] + frac * values[i1]


def _construction_constants(d: int) -> tuple[float, float]:
    """Moment denominators for orders m = d and m = d - 2."""
    c_a = d**3 + 12 * d**2 + 47 * d + 60  # order d against r^2 (a - r)^2
    c_b = d**3 + 6 * d**2 + 11 * d + 6  # order d - 2
    return float(c_a), float(c_b)


@dataclass(frozen=True, eq=False)
class ConstructedKernel(KernelDescriptor):
    """K(r theta) = scale * f(theta) r^2 (g(theta) - r)^2 on [0, g(theta)].

    f and g are chosen so the directional distributions of the unscaled
    kernel are exactly the prescribed (A, B); `scale` lets normalized()
    fold unit mass into the same closed form. Angular evaluation is linear
    interpolation for d=2 and barycentric on the icosphere for d=3.
    """

    A: DirectionalDistribution
    B: DirectionalDistribution
    scale: float = 1.0
    kind = "constructed"

    def __post_init__(self) -> None:
        if self.A.dim != self.B.dim:
            raise PreconditionError("A and B must live on the same sphere")
        if self.A.dim == 2 and not np.array_equal(self.A.angles, self.B.angles):
            raise PreconditionError("A and B must share the same angle grid")
        if (self.A.values <= 0).any() or (self.B.values <= 0).any():
            raise PreconditionError("A and B must be strictly positive")
        d = self.A.dim
        c_a, c_b = _construction_constants(d)
        g = np.sqrt(2.0 * (c_a / c_b) * self.A.values / self.B.values)
        f = c_b * self.B.values / (4.0 * g ** (d + 3))
        g.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "g_values", g)
        object.__setattr__(self, "f_values", f)

    @property
    def dim(self) -> int:
        return self.A.dim

    @property
    def support_radius(self) -> float:  # type: ignore[override]
        return float(self.g_values.max())

    def _fg_at(self, directions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.dim == 2:
            theta = np.arctan2(directions[..., 1], directions[..., 0])
            f = _interp_periodic_pi(self.A.angles, self.f_values, theta)
            g = _interp_periodic_pi(self.A.angles, self.g_values, theta)
            return f, g
        flat = directions.reshape(-1, 3)
        f = self.A.sphere.interpolate(self.f_values, flat)
        g = self.A.sphere.interpolate(self.g_values, flat)
        return f.reshape(directions.shape[:-1]), g.reshape(directions.shape[:-1])

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        r = np.sqrt(np.einsum("...i,...i->...", points, points))
        safe = np.where(r > 0, r, 1.0)
        dirs = points / safe[..., None]
        # the origin has no direction; K(0) = 0, any unit vector will do
        unit = np.zeros(points.shape[-1])
        unit[0] = 1.0
        dirs = np.where(r[..., None] > 0, dirs, unit)
        f, g = self._fg_at(dirs)
        out = self.scale * f * r**2 * (g - r) ** 2
        return np.where((r > 0) & (r <= g), out, 0.0)

    def ray_breakpoints(self, direction: np.ndarray) -> list[float]:
        _, g = self._fg_at(np.asarray(direction, dtype=np.float64)[None, :])
        return [float(g[0])]

    def mass(self) -> float:
        """Total integral, from the closed-form radial moment per ray."""
        d = self.dim
        m = d + 1
        denom = m**3 + 6 * m**2 + 11 * m + 6
        ray = self.scale * self.f_values * 2.0 * self.g_values ** (d + 4) / denom
        if d == 2:
            return float(2.0 * np.sum(self.A.weights * ray))
        return float(np.sum(self.A.weights * ray))

    def normalized(self) -> ConstructedKernel:
        """Same shape with scale folded in so the total mass is 1."""
        return ConstructedKernel(self.A, self.B, scale=self.scale / self.mass())

    def moments(self) -> tuple[DirectionalDistribution, DirectionalDistribution]:
        """Closed-form (A, B) of this kernel including the scale factor."""
        values_a = self.scale * self.A.values
        values_b = self.scale * self.B.values
        if self.dim == 2:
            return (
                DirectionalDistribution(values_a, angles=self.A.angles),
                DirectionalDistribution(values_b, angles=self.B.angles),
            )
        return (
            DirectionalDistribution(values_a, sphere=self.A.sphere),
            DirectionalDistribution(values_b, sphere=self.B.sphere),
        )


def construct_kernel(A: DirectionalDistribution, B: DirectionalDistribution) -> ConstructedKernel:
    """Kernel with prescribed tension and mobility generating distributions.

    Returns the descriptor of K(r theta) = f(theta) r^2 (g(theta) - r)^2 with
    g = sqrt(2 (c_A/c_B) A/B) and f = c_B B / (4 g^{d+3}), whose radial
    moments reproduce (A, B) exactly.

    Raises:
        PreconditionError: nonpositive A or B node, or mismatched grids.
    """
    return ConstructedKernel(A, B)


_SPECIAL_KERNELS = {
    "box": BoxKernel,
    "stripe_box": StripeBoxKernel,
    "backward_three_hat": BackwardThreeHatKernel,
    "smooth_plateau": SmoothPlateauKernel,
    "disc_plateau": DiscPlateauKernel,
}


def special_kernels(name: str) -> KernelDescriptor:
    """Library of exact analytic descriptors by name."""
    if name == "gaussian":
        return GaussianKernel()
    try:
        return _SPECIAL_KERNELS[name]()
    except KeyError:
        valid = ["gaussian"] + sorted(_SPECIAL_KERNELS)
        raise ConfigurationError(f"unknown kernel {name!r}; valid: {valid}") from None


# --- sampling ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampledKernel:
    """Kernel raster in FFT (wrap) order with metadata and cached transforms."""

    spec: GridSpec
    values: np.ndarray
    mass: float
    support_radius: float
    nonnegative: bool
    even: bool
    descriptor: KernelDescriptor
    h: float

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_spectrum", None)
        object.__setattr__(self, "_matrix", None)

    def spectrum(self) -> np.ndarray:
        """Cached real FFT of the kernel raster (plan reuse across calls)."""
        if getattr(self, "_spectrum") is None:
            object.__setattr__(self, "_spectrum", np.fft.rfftn(self.values))
        return getattr(self, "_spectrum")

    def direct_matrix(self) -> np.ndarray:
        """Cached circulant matrix for the direct spatial path (small grids)."""
        if getattr(self, "_matrix") is None:
            n = self.spec.cell_count
            if n > 4096:
                raise PreconditionError(
                    f"direct matrix limited to 4096 cells, grid has {n}"
                )
            idx = np.indices(self.spec.dims).reshape(len(self.spec.dims), -1)
            diff = (idx[:, :, None] - idx[:, None, :]) % np.array(self.spec.dims)[
                :, None, None
            ]
            mat = self.values[tuple(diff)] * self.spec.cell_volume
            object.__setattr__(self, "_matrix", mat)
        return getattr(self, "_matrix")


def _mirror(values: np.ndarray) -> np.ndarray:
    """x -> -x on a wrap-order raster: flip all axes then roll by one."""
    out = np.flip(values)
    for axis in range(values.ndim):
        out = np.roll(out, 1, axis=axis)
    return out


def minimal_resolvable_h(spec: GridSpec) -> float:
    """Smallest admissible h on this grid: sqrt(h) >= 4 * max spacing."""
    return (4.0 * spec.max_spacing) ** 2


def sample_kernel(
    descriptor: KernelDescriptor, spec: GridSpec, h: float = 1.0
) -> SampledKernel:
    """Sample K_h(x) = h^{-d/2} K(x/sqrt(h)) at lattice offsets.

    The raster is symmetrized to exact evenness and renormalized to discrete
    mass exactly 1.

    Raises:
        ConfigurationError: h below the resolvability floor, naming the
            minimal admissible h on this grid.
    """
    if h <= 0:
        raise ConfigurationError(f"h must be positive, got {h}")
    h_min = minimal_resolvable_h(spec)
    if math.sqrt(h) < 4.0 * spec.max_spacing - 1e-15:
        raise ConfigurationError(
            f"h={h} is below the resolvability floor; minimal admissible "
            f"h = (4*max spacing)^2 = {h_min}"
        )
    root = math.sqrt(h)
    offsets = spec.offset_mesh() / root
    d = spec.ndim
    values = descriptor.sample_values(offsets) * h ** (-d / 2.0)
    values = 0.5 * (values + _mirror(values))
    total = float(values.sum()) * spec.cell_volume
    if total <= 0:
        raise NumericError(f"sampled kernel {descriptor.kind} has mass {total}")
    values = values / total
    return SampledKernel(
        spec=spec,
        values=values,
        mass=float(values.sum()) * spec.cell_volume,
        support_radius=descriptor.support_radius * root,
        nonnegative=bool(values.min() >= 0.0),
        even=True,
        descriptor=descriptor,
        h=h,
    )


def gaussian_kernel(spec: GridSpec) -> SampledKernel:
    """The h=1 Gaussian sampled on the grid."""
    return sample_kernel(GaussianKernel(), spec, 1.0)


def rescale_kernel(
    kernel: SampledKernel | KernelDescriptor, h: float, *, spec: GridSpec | None = None
) -> SampledKernel:
    """Resample the analytic descriptor at time scale h (never interpolates)."""
    if isinstance(kernel, SampledKernel):
        spec = kernel.spec if spec is None else spec
        descriptor = kernel.descriptor
    else:
        if spec is None:
            raise PreconditionError("rescaling a descriptor requires a grid spec")
        descriptor = kernel
    return sample_kernel(descriptor, spec, h)


# --- calibrated samplers for the fat-level-set configurations ---------------


def calibrated_smooth_plateau(
    spec: GridSpec, h: float = 1.0, *, taper_width: float = 0.1
) -> tuple[SampledKernel, int]:
    """Smooth-plateau kernel with its taper reweighted so that
    (plateau value) * (target cell count) * cellvol = 1/2 exactly.

    Returns the sampled kernel and the matching set cell count; a set of
    exactly that many cells inside the flat region convolves to exactly 1/2
    on the fat plateau. The reweighting factor stays within one cell mass of
    1, so the analytic profile is preserved to rasterization order.
    """
    desc = SmoothPlateauKernel(taper_width=taper_width)
    root = math.sqrt(h)
    offsets = spec.offset_mesh() / root
    raw = desc.evaluate(offsets)
    r = np.sqrt(np.einsum("...i,...i->...", offsets, offsets))
    plateau = r <= desc.plateau_radius + 1e-12
    taper = (~plateau) & (raw > 0)
    vol = spec.cell_volume
    n_p = int(plateau.sum())
    taper_sum = float(raw[taper].sum())
    if taper_sum <= 0:
        raise NumericError("taper region resolved to zero cells; refine the grid")
    target = int(round((n_p + taper_sum) / 2.0))
    beta = (2.0 * target - n_p) / taper_sum
    if beta <= 0:
        raise NumericError("plateau calibration failed; refine the grid")
    values = np.where(plateau, 1.0, 0.0) + beta * np.where(taper, raw, 0.0)
    values = 0.5 * (values + _mirror(values))
    values = values / (2.0 * target * vol)  # plateau value 1/(2 * target * vol)
    kernel = SampledKernel(
        spec=spec,
        values=values,
        mass=float(values.sum()) * vol,
        support_radius=desc.support_radius * root,
        nonnegative=True,
        even=True,
        descriptor=desc,
        h=h,
    )
    return kernel, target


def calibrated_disc_plateau(
    spec: GridSpec, h: float = 1.0
) -> tuple[SampledKernel, int, float]:
    """Disc-plateau kernel with rows reweighted so each row sum inside the
    strip is identical and a slab of the returned row count convolves to
    exactly 1/2 along the flat strip.

    Returns (kernel, slab row count, fat half-width in physical units): rows
    of the slab are counted along the last axis; the 1/2 plateau covers rows
    within the returned half-width of the slab center.
    """
    desc = DiscPlateauKernel()
    root = math.sqrt(h)
    offsets = spec.offset_mesh() / root
    raw = desc.evaluate(offsets)
    y = offsets[..., -1]
    y_rows = y[(0,) * (spec.ndim - 1)]
    y0 = desc.strip_half_width
    axes = tuple(range(spec.ndim - 1))
    row_sums = raw.sum(axis=axes)
    flat = np.abs(y_rows) <= y0 + 1e-12
    if not flat.any() or row_sums[flat].min() <= 0:
        raise NumericError("strip region resolved to zero rows; refine the grid")
    f_bar = float(row_sums[flat].mean())
    # equalize rows inside the strip to the common value f_bar
    scale_rows = np.ones_like(y_rows)
    scale_rows[flat] = f_bar / row_sums[flat]
    n_flat = int(flat.sum())
    tail = (~flat) & (row_sums > 0)
    tail_sum = float(row_sums[tail].sum())
    if tail_sum <= 0:
        raise NumericError("tail region resolved to zero rows; refine the grid")
    target_rows = int(round(3.0 * _eta_step_mass() * root / spec.spacing[-1]))
    gamma = (2.0 * target_rows - n_flat) * f_bar / tail_sum
    if gamma <= 0 or target_rows * spec.spacing[-1] >= 2.0 * y0 * root:
        raise NumericError("slab calibration failed; refine the grid or extent")
    scale_rows[tail] = gamma
    shape = (1,) * (spec.ndim - 1) + (len(y_rows),)
    values = raw * scale_rows.reshape(shape)
    values = 0.5 * (values + _mirror(values))
    vol = spec.cell_volume
    values = values / (float(values.sum()) * vol)
    kernel = SampledKernel(
        spec=spec,
        values=values,
        mass=float(values.sum()) * vol,
        support_radius=desc.support_radius * root,
        nonnegative=True,
        even=True,
        descriptor=desc,
        h=h,
    )
    fat_half_width = (y0 * root - 0.5 * target_rows * spec.spacing[-1])
    return kernel, target_rows, fat_half_width


# --- radial quadrature and the analysis maps --------------------------------


def _ray_quad(
    descriptor: KernelDescriptor, direction: np.ndarray, power: int
) -> float:
    """int_0^inf r^power K(r * direction) dr with adaptive quadrature."""
    cutoff = descriptor.moment_cutoff
    if cutoff is None:
        cutoff = descriptor.support_radius
    if not math.isfinite(cutoff):
        raise PreconditionError(
            f"{descriptor.kind} has unbounded support and no moment cutoff"
        )
    breaks = [b for b in descriptor.ray_breakpoints(direction) if 0.0 < b < cutoff]
    pts = [0.0] + sorted(set(breaks)) + [cutoff]
    direction = np.asarray(direction, dtype=np.float64)

    def integrand(r: float) -> float:
        return r**power * float(descriptor.evaluate(direction * r))

    total, err = 0.0, 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, abserr = quad(integrand, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=200)
        total += val
        err += abserr
    if err > _QUAD_ABS_TARGET:
        raise NumericError(
            f"ray quadrature error {err:.2e} exceeds {_QUAD_ABS_TARGET:.0e} "
            f"along direction {direction}"
        )
    return total


def _resolve_descriptor(kernel: SampledKernel | KernelDescriptor) -> KernelDescriptor:
    return kernel.descriptor if isinstance(kernel, SampledKernel) else kernel


def directional_moments(
    kernel: SampledKernel | KernelDescriptor,
    *,
    n_theta: int = 256,
    sphere_level: int = 3,
    dim: int | None = None,
) -> tuple[DirectionalDistribution, DirectionalDistribution]:
    """Tension and mobility generating distributions (A, B) of the kernel.

    A(theta) = int_0^inf r^d K(r theta) dr and
    B(theta) = 2 int_0^inf r^{d-2} K(r theta) dr, via per-ray adaptive
    quadrature to 1e-8 absolute.

    Args:
        kernel: analytic descriptor or a sampled kernel carrying one.
        n_theta: angle nodes for d=2 output.
        sphere_level: icosphere subdivision for d=3 output.
        dim: evaluation dimension for dimension-generic descriptors
            (defaults to the sampled grid's, or 2).
    """
    desc = _resolve_descriptor(kernel)
    if dim is None:
        if isinstance(kernel, SampledKernel):
            dim = kernel.spec.ndim
        elif isinstance(desc, ConstructedKernel):
            dim = desc.dim
        elif isinstance(desc, BackwardThreeHatKernel):
            dim = 2
        else:
            dim = 2
    if dim == 2:
        angles = uniform_angles(n_theta)
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        a_vals = np.array([_ray_quad(desc, u, 2) for u in dirs])
        b_vals = np.array([2.0 * _ray_quad(desc, u, 0) for u in dirs])
        return (
            DirectionalDistribution(a_vals, angles=angles),
            DirectionalDistribution(b_vals, angles=angles),
        )
    grid = sphere_grid(sphere_level) if not isinstance(desc, ConstructedKernel) else desc.A.sphere
    nodes = grid.vertices
    a_vals = np.array([_ray_quad(desc, u, 3) for u in nodes])
    b_vals = np.array([2.0 * _ray_quad(desc, u, 1) for u in nodes])
    # evenness: average antipodal nodes exactly
    anti = np.argmin(nodes @ nodes.T, axis=1)
    a_vals = 0.5 * (a_vals + a_vals[anti])
    b_vals = 0.5 * (b_vals + b_vals[anti])
    return (
        DirectionalDistribution(a_vals, sphere=grid),
        DirectionalDistribution(b_vals, sphere=grid),
    )


def surface_tension_of(
    kernel: SampledKernel | KernelDescriptor | DirectionalDistribution,
    *,
    n_theta: int = 720,
    **moment_kwargs,
) -> DirectionalDistribution:
    """sigma_K(nu) = 1/2 int |nu.x| K(x) dx on the sphere.

    Accepts a kernel (reduces to its A) or a tension generating distribution
    directly; then sigma(nu) = 1/2 int_{sphere} |nu.theta| A(theta) dtheta.
    """
    if isinstance(kernel, DirectionalDistribution):
        A = kernel
    else:
        A, _ = directional_moments(kernel, **moment_kwargs)
    if A.dim == 2:
        out_angles = uniform_angles(n_theta)
        # the integrand has period pi, so the full-circle integral is twice
        # the half-range weighted sum and the 1/2 prefactor cancels
        gap = out_angles[:, None] - A.angles[None, :]
        sigma = (np.abs(np.cos(gap)) * A.values[None, :]) @ A.weights
        return DirectionalDistribution(sigma, angles=out_angles)
    nodes = A.nodes
    dots = np.abs(nodes @ nodes.T)
    sigma = 0.5 * dots @ (A.weights * A.values)
    return DirectionalDistribution(sigma, sphere=A.sphere)


def mobility_of(
    kernel: SampledKernel | KernelDescriptor,
    *,
    n_theta: int = 720,
    method: str = "hyperplane",
    sphere_level: int = 3,
    dim: int | None = None,
) -> DirectionalDistribution:
    """Inverse mobility 1/mu_K(n) = 2 int_{x.n = 0} K(x) dH^{d-1} on the sphere.

    method "hyperplane" integrates K over the orthogonal hyperplane directly;
    "from_B" uses 1/mu(n) = int_{theta perp n} B(theta) (d=2: 2 B(n_perp)).
    """
    desc = _resolve_descriptor(kernel)
    if dim is None:
        if isinstance(kernel, SampledKernel):
            dim = kernel.spec.ndim
        elif isinstance(desc, ConstructedKernel):
            dim = desc.dim
        else:
            dim = 2
    if dim == 2:
        out_angles = uniform_angles(n_theta)
        if method == "hyperplane":
            vals = []
            for phi in out_angles:
                perp = np.array([-math.sin(phi), math.cos(phi)])
                vals.append(4.0 * _ray_quad(desc, perp, 0))
            return DirectionalDistribution(np.array(vals), angles=out_angles)
        if method == "from_B":
            _, B = directional_moments(kernel, n_theta=n_theta, dim=2)
            vals = 2.0 * B.at(out_angles + math.pi / 2.0)
            return DirectionalDistribution(vals, angles=out_angles)
        raise PreconditionError(f"unknown mobility method {method!r}")
    grid = sphere_grid(sphere_level) if not isinstance(desc, ConstructedKernel) else desc.A.sphere
    if method == "from_B":
        _, B = directional_moments(kernel, sphere_level=sphere_level, dim=3)
        psi = (np.arange(256) + 0.5) * (2.0 * math.pi / 256)
        vals = []
        for n in grid.vertices:
            t1, t2 = _plane_basis(n)
            circle = np.outer(np.cos(psi), t1) + np.outer(np.sin(psi), t2)
            vals.append(float(np.mean(B.at(circle)) * 2.0 * math.pi))
        return DirectionalDistribution(np.array(vals), sphere=grid)
    if method == "hyperplane":
        psi = (np.arange(64) + 0.5) * (2.0 * math.pi / 64)
        vals = []
        for n in grid.vertices:
            t1, t2 = _plane_basis(n)
            rays = np.outer(np.cos(psi), t1) + np.outer(np.sin(psi), t2)
            radial = np.array([_ray_quad(desc, u, 1) for u in rays])
            vals.append(2.0 * float(np.mean(radial) * 2.0 * math.pi))
        return DirectionalDistribution(np.array(vals), sphere=grid)
    raise PreconditionError(f"unknown mobility method {method!r}")


def _plane_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the plane orthogonal to unit vector n."""
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(n, helper)
    t1 = t1 / np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def anisotropic_curvature(
    kernel: SampledKernel | KernelDescriptor, shape, x: np.ndarray
) -> float:
    """H_sigma(x) = sum_i kappa_i int X_i^2 K(X, 0) dX at boundary point x.

    The coordinate frame is rotated so the outward normal is the last axis
    and the tangents are the shape's principal directions; the second moments
    of K on the tangent hyperplane are computed by quadrature.
    """
    desc = _resolve_descriptor(kernel)
    x = np.asarray(x, dtype=np.float64)
    nu, tangents, curvatures = shape.frame_at(x)
    if len(nu) == 2:
        tau = tangents[0]
        moment = 2.0 * _ray_quad(desc, tau, 2)
        return float(curvatures[0] * moment)
    psi = (np.arange(64) + 0.5) * (2.0 * math.pi / 64)
    rays = np.outer(np.cos(psi), tangents[0]) + np.outer(np.sin(psi), tangents[1])
    radial = np.array([_ray_quad(desc, u, 3) for u in rays])
    m1 = float(np.mean(radial * np.cos(psi) ** 2) * 2.0 * math.pi)
    m2 = float(np.mean(radial * np.sin(psi) ** 2) * 2.0 * math.pi)
    return float(curvatures[0] * m1 + curvatures[1] * m2)


# --- tension profile dictionary and the inverse fit -------------------------


def arc_indicator_tension(x: np.ndarray | float, b: float) -> np.ndarray | float:
    """sigma of the arc-pair indicator A_{0,b} (d=2), in closed form.

    A_{0,b} is the indicator of the antipodal arc pair [-b, b] on the circle;
    sigma_{A_{0,b}}(x) = int_{-b}^{b} |cos(y - x)| dy, which evaluates to
    2 sin(b) |cos(x)| where cos^2 x > sin^2 b and 2 - 2 cos(b) |sin(x)|
    elsewhere.
    """
    x = np.asarray(x, dtype=np.float64)
    cos_x = np.cos(x)
    sin_x = np.sin(x)
    near_pole = cos_x**2 > math.sin(b) ** 2
    out = np.where(
        near_pole,
        2.0 * math.sin(b) * np.abs(cos_x),
        2.0 - 2.0 * math.cos(b) * np.abs(sin_x),
    )
    return float(out) if out.ndim == 0 else out


def _arc_indicator_values(angles: np.ndarray, a: float, b: float) -> np.ndarray:
    """A_{a,b} sampled on [0, pi) nodes: indicator of pi-distance <= b."""
    delta = np.mod(angles - a, math.pi)
    dist = np.minimum(delta, math.pi - delta)
    return (dist <= b + 1e-15).astype(np.float64)


@dataclass(frozen=True)
class TensionFit:
    """Result of the dictionary fit sigma ~ sum c_k sigma_{A_{a_k,b_k}}."""

    A: DirectionalDistribution
    coefficients: np.ndarray
    shifts: np.ndarray
    widths: np.ndarray
    residual: float
    representable: bool
    iterations: int


def _polish_support(
    atoms: np.ndarray, target: np.ndarray, coeff: np.ndarray, support: np.ndarray
) -> np.ndarray:
    """Restricted least squares on the active support with boundary clipping.

    Moves the feasible iterate toward the unconstrained restricted optimum,
    dropping coordinates that hit zero on the way (the classical nonnegative
    least-squares inner step). Deterministic; returns an updated feasible
    coefficient vector that does not increase the residual.
    """
    coeff = coeff.copy()
    sup = list(support)
    for _ in range(len(support) + 1):
        if not sup:
            break
        sol, *_ = np.linalg.lstsq(atoms[sup].T, target, rcond=None)
        cur = coeff[sup]
        if (sol >= -1e-14).all():
            coeff[sup] = np.clip(sol, 0.0, None)
            break
        drop = sol < cur
        with np.errstate(divide="ignore", invalid="ignore"):
            alphas = np.where(drop, cur / (cur - sol), np.inf)
        alpha = min(1.0, float(alphas.min()))
        cur = cur + alpha * (sol - cur)
        coeff[sup] = np.clip(cur, 0.0, None)
        sup = [k for k, c in zip(sup, coeff[sup]) if c > 1e-14]
    return coeff


def fit_A_from_sigma(
    sigma: DirectionalDistribution,
    n_basis: int,
    *,
    residual_threshold: float = 1e-3,
    max_sweeps: int = 20000,
) -> TensionFit:
    """Nonnegative dictionary fit of a surface tension by arc-indicator
    profiles (d=2).

    Solves min ||sigma - sum_k c_k sigma_{A_{0,b_k}}(. - a_k)||_2 over c >= 0
    on the lattice of n_basis shifts x n_basis widths by projected coordinate
    descent with a deterministic sweep (widest arcs first), stopping when the
    largest coefficient change in a sweep is below 1e-12. Plain cyclic sweeps
    stall sublinearly once the active support is nearly degenerate, so each
    sweep ends with a restricted least-squares polish of the current support
    (boundary-clipped, deterministic); support changes are finite, which makes
    the combined iteration terminate at the exact minimizer. The fitted A is
    the matching combination of arc indicators on sigma's angle grid.

    A residual above residual_threshold marks the profile as not
    representable by nonnegative A (the fit never returns a signed A).
    """
    if sigma.dim != 2:
        raise PreconditionError("the tension fit is implemented for d=2 only")
    angles = sigma.angles
    target = sigma.values
    shifts = np.arange(n_basis) * (math.pi / n_basis)
    widths = (np.arange(n_basis) + 1.0) * (math.pi / 2.0 / n_basis)
    atoms, pairs = [], []
    # deterministic sweep order: widest arcs first, then by shift
    for b in widths[::-1]:
        for a in shifts:
            atoms.append(arc_indicator_tension(angles - a, b))
            pairs.append((a, b))
    atoms = np.array(atoms)  # (m, n_angles)
    norms = np.einsum("ij,ij->i", atoms, atoms)
    coeff = np.zeros(len(atoms))
    resid = target.copy()
    sweeps = 0
    while True:
        sweeps += 1
        # zero coordinates whose gradient step is nonpositive are exact
        # no-ops this sweep; screen them out in one pass
        gain = atoms @ resid
        visit = np.flatnonzero((coeff > 0.0) | (gain > 0.0))
        max_change = 0.0
        for k in visit:
            step = float(atoms[k] @ resid) / norms[k]
            new = max(0.0, coeff[k] + step)
            change = new - coeff[k]
            if change != 0.0:
                resid = resid - change * atoms[k]
                coeff[k] = new
                max_change = max(max_change, abs(change))
        support = np.flatnonzero(coeff > 0.0)
        if 0 < len(support) <= max(64, 2 * n_basis):
            polished = _polish_support(atoms, target, coeff, support)
            new_resid = target - polished @ atoms
            if np.linalg.norm(new_resid) <= np.linalg.norm(resid):
                max_change = max(max_change, float(np.abs(polished - coeff).max()))
                coeff, resid = polished, new_resid
        if max_change < 1e-12:
            # confirm the screened zero coordinates stay no-ops at the
            # final residual before declaring convergence
            zero = coeff == 0.0
            if not ((atoms @ resid)[zero] > 1e-12 * norms[zero]).any():
                break
        if sweeps >= max_sweeps:
            raise NumericError(
                f"coordinate descent did not converge in {max_sweeps} sweeps"
            )
    residual = float(np.linalg.norm(resid))
    a_values = np.zeros_like(angles)
    for c, (a, b) in zip(coeff, pairs):
        if c > 0.0:
            a_values += c * _arc_indicator_values(angles, a, b)
    fitted = DirectionalDistribution(a_values, angles=angles)
    return TensionFit(
        A=fitted,
        coefficients=coeff,
        shifts=np.array([p[0] for p in pairs]),
        widths=np.array([p[1] for p in pairs]),
        residual=residual,
        representable=bool(residual <= residual_threshold),
        iterations=sweeps,
    )
