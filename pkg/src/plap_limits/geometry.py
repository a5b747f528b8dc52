"""Domains, discretized fields, norms and the energy functional.

Three analytic shapes are supported: an interval, an N-ball and an axis-aligned
rectangle. Balls are always carried by their radial reduction, a 1D mesh on
``[0, R]`` with the weight ``r**(N-1)``; every function on a ball is assumed
radial.

All quadrature is node based. For 1D and radial meshes the node weight is the
exact measure of the dual cell ``[x_{i-1/2}, x_{i+1/2}]`` (for the interval
this is the composite trapezoid rule), and the gradient lives on cells. The
rectangle uses the structured Courant triangulation: one gradient per
triangle, tensor trapezoid weights at nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError

SHAPES = ("interval", "ball", "rectangle")
DEFAULT_RESOLUTION = 1025
DEFAULT_RECTANGLE_RESOLUTION = 129


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class Mesh:
    """Discrete operators for a :class:`Domain`.

    ``grad_ops`` holds one sparse matrix per gradient component, mapping flat
    nodal values to element gradients. ``elem_weights`` and ``node_weights``
    are full measures, i.e. they already include the sphere area ``N*omega_N``
    on balls.
    """

    shape: tuple
    coords: tuple
    boundary: np.ndarray
    node_weights: np.ndarray
    grad_ops: tuple
    elem_weights: np.ndarray
    spacing: tuple

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def free(self) -> np.ndarray:
        return ~self.boundary

    def element_gradients(self, values: np.ndarray) -> np.ndarray:
        """Element gradients, shape ``(n_elem, dim)``."""
        flat = np.asarray(values, dtype=float).ravel()
        return np.column_stack([G @ flat for G in self.grad_ops])


def _as_tuple(x) -> tuple:
    return tuple(float(v) for v in np.atleast_1d(x))


@dataclass(frozen=True)
class Domain:
    """A desk-scale domain with a mesh.

    Use the :meth:`interval`, :meth:`ball` and :meth:`rectangle` constructors.
    ``bounds`` is ``(x_lo, x_hi)`` or ``(x_lo, x_hi, y_lo, y_hi)``; for a ball
    it is ``(0, R)`` in the radial variable.
    """

    shape: str
    bounds: tuple
    resolution: int = DEFAULT_RESOLUTION
    dimension: int = 1
    center: tuple = dc_field(default=())

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if int(self.resolution) != self.resolution or self.resolution < 3:
            raise ConfigError(f"resolution must be an integer >= 3, got {self.resolution}")
        b = self.bounds
        if self.shape == "rectangle":
            if len(b) != 4 or not (b[1] > b[0] and b[3] > b[2]):
                raise ConfigError(f"rectangle needs x_lo < x_hi and y_lo < y_hi, got {b}")
            if self.dimension != 2:
                raise ConfigError("rectangle dimension is 2")
        else:
            if len(b) != 2 or not b[1] > b[0]:
                raise ConfigError(f"{self.shape} needs lo < hi, got {b}")
        if self.shape == "ball":
            if b[0] != 0.0:
                raise ConfigError("ball radial bounds must start at 0")
            if self.dimension < 1:
                raise ConfigError("ball dimension N must be >= 1")
            if len(self.center) not in (0, self.dimension):
                raise ConfigError("ball center must have N coordinates")
        if self.shape == "interval" and self.dimension != 1:
            raise ConfigError("interval dimension is 1")

    @classmethod
    def interval(cls, x_lo: float = 0.0, x_hi: float = 1.0, resolution: int = DEFAULT_RESOLUTION) -> "Domain":
        return cls("interval", (float(x_lo), float(x_hi)), int(resolution), 1)

    @classmethod
    def ball(cls, R: float = 1.0, N: int = 2, center=None, resolution: int = DEFAULT_RESOLUTION) -> "Domain":
        if not R > 0:
            raise ConfigError(f"radius must be positive, got {R}")
        c = _as_tuple(center) if center is not None else (0.0,) * int(N)
        return cls("ball", (0.0, float(R)), int(resolution), int(N), c)

    @classmethod
    def rectangle(cls, x_lo=0.0, x_hi=1.0, y_lo=0.0, y_hi=1.0,
                  resolution: int = DEFAULT_RECTANGLE_RESOLUTION) -> "Domain":
        return cls("rectangle", (float(x_lo), float(x_hi), float(y_lo), float(y_hi)), int(resolution), 2)

    @property
    def radius(self) -> float:
        if self.shape != "ball":
            raise AttributeError("only balls have a radius")
        return self.bounds[1]

    @property
    def volume(self) -> float:
        b = self.bounds
        if self.shape == "interval":
            return b[1] - b[0]
        if self.shape == "rectangle":
            return (b[1] - b[0]) * (b[3] - b[2])
        return unit_ball_volume(self.dimension) * b[1] ** self.dimension

    @property
    def unit_ball_volume(self) -> float:
        return unit_ball_volume(self.dimension)

    @property
    def is_radial(self) -> bool:
        return self.shape == "ball"

    @cached_property
    def mesh(self) -> Mesh:
        if self.shape == "rectangle":
            return _rectangle_mesh(self)
        return _radial_mesh(self)

    def describe(self) -> str:
        if self.shape == "interval":
            return f"interval({self.bounds[0]:g}, {self.bounds[1]:g})"
        if self.shape == "ball":
            return f"ball(R={self.radius:g}, N={self.dimension})"
        return "rectangle({:g}, {:g}, {:g}, {:g})".format(*self.bounds)

    def to_config(self) -> dict:
        """Flat key/value description accepted by :func:`parse_domain`."""
        out = {"shape": self.shape, "resolution": str(self.resolution)}
        if self.shape == "ball":
            out["R"] = repr(self.radius)
            out["N"] = str(self.dimension)
            out["center"] = ",".join(repr(c) for c in self.center)
        else:
            out["bounds"] = ",".join(repr(v) for v in self.bounds)
        return out


def _radial_mesh(domain: Domain) -> Mesh:
    lo, hi = domain.bounds
    n = domain.resolution
    x = np.linspace(lo, hi, n)
    h = (hi - lo) / (n - 1)
    mid = 0.5 * (x[1:] + x[:-1])
    edges = np.concatenate([[lo], mid, [hi]])
    boundary = np.zeros(n, dtype=bool)
    if domain.shape == "ball":
        N = domain.dimension
        area = N * unit_ball_volume(N)
        face = area * mid ** (N - 1)
        node_w = area * (edges[1:] ** N - edges[:-1] ** N) / N
        boundary[-1] = True
    else:
        face = np.ones(n - 1)
        node_w = np.diff(edges)
        boundary[[0, -1]] = True
    G = sp.diags([-np.ones(n - 1) / h, np.ones(n - 1) / h], [0, 1], shape=(n - 1, n), format="csr")
    return Mesh((n,), (x,), boundary, node_w, (G,), face * h, (h,))


def _rectangle_mesh(domain: Domain) -> Mesh:
    x_lo, x_hi, y_lo, y_hi = domain.bounds
    n = domain.resolution
    x = np.linspace(x_lo, x_hi, n)
    y = np.linspace(y_lo, y_hi, n)
    hx = (x_hi - x_lo) / (n - 1)
    hy = (y_hi - y_lo) / (n - 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    idx = np.arange(n * n).reshape(n, n)
    a = idx[:-1, :-1].ravel()   # (i, j)
    bx = idx[1:, :-1].ravel()   # (i+1, j)
    by = idx[:-1, 1:].ravel()   # (i, j+1)
    c = idx[1:, 1:].ravel()     # (i+1, j+1)
    ncell = a.size
    ones = np.ones(ncell)
    rows = np.arange(2 * ncell)
    # lower triangle (a, bx, by), then upper triangle (c, by, bx)
    Gx = sp.csr_matrix(
        (np.concatenate([-ones, ones, -ones, ones]) / hx,
         (np.concatenate([rows[:ncell], rows[:ncell], rows[ncell:], rows[ncell:]]),
          np.concatenate([a, bx, by, c]))),
        shape=(2 * ncell, n * n))
    Gy = sp.csr_matrix(
        (np.concatenate([-ones, ones, -ones, ones]) / hy,
         (np.concatenate([rows[:ncell], rows[:ncell], rows[ncell:], rows[ncell:]]),
          np.concatenate([a, by, bx, c]))),
        shape=(2 * ncell, n * n))
    wx = np.full(n, hx)
    wx[[0, -1]] = hx / 2
    wy = np.full(n, hy)
    wy[[0, -1]] = hy / 2
    node_w = np.outer(wx, wy).ravel()
    boundary = np.zeros((n, n), dtype=bool)
    boundary[[0, -1], :] = True
    boundary[:, [0, -1]] = True
    elem_w = np.full(2 * ncell, hx * hy / 2)
    return Mesh((n, n), (X, Y), boundary.ravel(), node_w, (Gx, Gy), elem_w, (hx, hy))


@dataclass(frozen=True, eq=False)
class Field:
    """A scalar function sampled at the mesh nodes of ``domain``.

    ``values`` is stored read-only; boundary nodes are always present.
    """

    domain: Domain
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.domain.mesh.shape:
            raise ValueError(f"field shape {v.shape} does not match mesh {self.domain.mesh.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"field {self.label!r} has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, domain: Domain, value: float, label: str = "") -> "Field":
        return cls(domain, np.full(domain.mesh.shape, float(value)), label)

    @classmethod
    def from_function(cls, domain: Domain, func, label: str = "") -> "Field":
        """Sample ``func`` at the nodes (radial coordinate on balls)."""
        return cls(domain, np.broadcast_to(func(*domain.mesh.coords), domain.mesh.shape), label)

    def with_values(self, values, label: str | None = None) -> "Field":
        return Field(self.domain, values, self.label if label is None else label)

    def __mul__(self, c: float) -> "Field":
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return self.with_values(self.values - other.values)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def is_dirichlet_zero(self) -> bool:
        return bool(np.all(self.flat[self.domain.mesh.boundary] == 0.0))

    def evaluate(self, point) -> float:
        """Linear interpolation at a point of the ambient space."""
        d = self.domain
        pt = np.atleast_1d(np.asarray(point, dtype=float))
        if d.shape == "interval":
            return float(np.interp(pt[0], d.mesh.coords[0], self.values))
        if d.shape == "ball":
            r = float(np.linalg.norm(pt - np.asarray(d.center))) if pt.size > 1 else abs(pt[0])
            if r > d.radius:
                raise ValueError("point outside the ball")
            return float(np.interp(r, d.mesh.coords[0], self.values))
        X, Y = d.mesh.coords
        interp = RegularGridInterpolator((X[:, 0], Y[0, :]), self.values)
        return float(interp(pt[None, :])[0])


def distance_function(domain: Domain) -> Field:
    """Exact distance to the boundary sampled at the nodes."""
    m = domain.mesh
    if domain.shape == "interval":
        x = m.coords[0]
        d = np.minimum(x - domain.bounds[0], domain.bounds[1] - x)
    elif domain.shape == "ball":
        d = domain.radius - m.coords[0]
    else:
        X, Y = m.coords
        x_lo, x_hi, y_lo, y_hi = domain.bounds
        d = np.minimum.reduce([X - x_lo, x_hi - X, Y - y_lo, y_hi - Y])
    d = np.maximum(d, 0.0)
    flat = d.ravel()
    flat[m.boundary] = 0.0
    return Field(domain, flat.reshape(m.shape), "distance")


def integrate(f: Field | np.ndarray, domain: Domain | None = None) -> float:
    """Node quadrature of a field (or raw nodal array) over the domain."""
    if isinstance(f, Field):
        domain, vals = f.domain, f.flat
    else:
        vals = np.asarray(f, dtype=float).ravel()
    return float(np.dot(domain.mesh.node_weights, vals))


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def lp_norm(f: Field, t: float) -> float:
    """``(int |f|^t)^(1/t)``, evaluated with a max-scaling to survive large t."""
    if not t >= 1:
        raise ValueError(f"L^t norm needs t >= 1, got {t}")
    a = np.abs(f.flat)
    scale = a.max()
    if scale == 0.0:
        return 0.0
    return float(scale * integrate((a / scale) ** t, f.domain) ** (1.0 / t))


def gradient_magnitude(f: Field) -> np.ndarray:
    """Nodal gradient magnitude.

    Central differences inside, one-sided at the edges of the mesh; on balls
    the center value is 0 by radial symmetry.
    """
    d = f.domain
    m = d.mesh
    if d.shape == "rectangle":
        gx, gy = np.gradient(f.values, *m.spacing, edge_order=1)
        return np.hypot(gx, gy)
    g = np.abs(np.gradient(f.values, m.spacing[0], edge_order=1))
    if d.shape == "ball":
        g[0] = 0.0
    return g


def grad_sup(f: Field) -> float:
    return float(np.max(gradient_magnitude(f)))


def element_gradient_norms(f: Field) -> np.ndarray:
    G = f.domain.mesh.element_gradients(f.values)
    return np.sqrt(np.sum(G * G, axis=1))


@dataclass(frozen=True)
class EnergySpec:
    """Parameters of ``I(v) = |grad v|_p^p / p - (lam/q) int |v|^q - int h v``."""

    p: float
    q: float
    lam: float
    forcing: Field

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("energy needs p > 1")
        if not self.q >= 1 or not self.p > self.q:
            raise ValueError("energy needs 1 <= q < p")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")


def energy_Ip(spec: EnergySpec, v: Field) -> float:
    """Discrete energy; the same quadrature and gradients as the solver."""
    if not v.is_dirichlet_zero():
        raise ValueError("energy is defined on Dirichlet-zero fields")
    m = v.domain.mesh
    s = element_gradient_norms(v)
    dirichlet = float(np.dot(m.elem_weights, s ** spec.p)) / spec.p
    mass = spec.lam / spec.q * integrate(np.abs(v.flat) ** spec.q, v.domain)
    work = integrate(spec.forcing.flat * v.flat, v.domain)
    val = dirichlet - mass - work
    if not math.isfinite(val):
        raise ValueError("energy evaluated to a non-finite value")
    return val


def parse_domain(text_or_mapping) -> Domain:
    """Build a Domain from ``key=value`` text or a mapping of strings.

    Recognized keys: ``shape``, ``resolution``, ``bounds`` (comma list),
    ``x_lo``/``x_hi``/``y_lo``/``y_hi``, ``R`` (or ``radius``), ``N``,
    ``center`` (comma list).
    """
    if isinstance(text_or_mapping, str):
        kv = {}
        for raw in text_or_mapping.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected key=value, got {raw!r}")
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
    else:
        kv = {str(k): str(v) for k, v in text_or_mapping.items()}
    known = {"shape", "resolution", "bounds", "x_lo", "x_hi", "y_lo", "y_hi", "R", "radius", "N", "center"}
    unknown = set(kv) - known
    if unknown:
        raise ConfigError(f"unknown domain keys: {sorted(unknown)}")

    def num(key, default=None):
        if key not in kv:
            if default is None:
                raise ConfigError(f"missing domain key {key!r}")
            return default
        try:
            return float(kv[key])
        except ValueError:
            raise ConfigError(f"domain key {key!r} is not a number: {kv[key]!r}") from None

    def nums(key):
        try:
            return [float(t) for t in kv[key].split(",") if t.strip()]
        except ValueError:
            raise ConfigError(f"domain key {key!r} is not a number list: {kv[key]!r}") from None

    shape = kv.get("shape", "ball")
    default_res = DEFAULT_RECTANGLE_RESOLUTION if shape == "rectangle" else DEFAULT_RESOLUTION
    res = num("resolution", default_res)
    if res != int(res):
        raise ConfigError("resolution must be an integer")
    res = int(res)
    if shape == "ball":
        R = num("R") if "R" in kv else num("radius", 1.0)
        N = num("N", 2.0)
        if N != int(N):
            raise ConfigError("N must be an integer")
        center = nums("center") if kv.get("center") else None
        return Domain.ball(R, int(N), center, res)
    if shape == "interval":
        if "bounds" in kv:
            b = nums("bounds")
        else:
            b = [num("x_lo", 0.0), num("x_hi", 1.0)]
        if len(b) != 2:
            raise ConfigError("interval bounds need two numbers")
        return Domain.interval(b[0], b[1], res)
    if shape == "rectangle":
        if "bounds" in kv:
            b = nums("bounds")
        else:
            b = [num("x_lo", 0.0), num("x_hi", 1.0), num("y_lo", 0.0), num("y_hi", 1.0)]
        if len(b) != 4:
            raise ConfigError("rectangle bounds need four numbers")
        return Domain.rectangle(*b, resolution=res)
    raise ConfigError(f"unknown shape {shape!r}")
