"""Planar windows: disks, annuli, boxes and finite unions of disks.

Points are carried around as complex numbers ``x + iy``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Disk", "Annulus", "Box", "DiskUnion", "region_from_dict", "as_complex", "as_xy"]


def as_complex(points):
    """Accept complex arrays, real scalars or ``(n, 2)`` real arrays; return complex 1-D."""
    a = np.asarray(points)
    if np.iscomplexobj(a):
        return a.astype(complex).ravel()
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return a.reshape(1) + 0j
    if a.size == 0:
        return np.zeros(0, complex)
    if a.ndim == 1 and a.shape[0] == 2:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError("points must be complex or of shape (n, 2)")
    return a[:, 0] + 1j * a[:, 1]


def as_xy(z):
    z = np.asarray(z, dtype=complex).ravel()
    return np.column_stack([z.real, z.imag])


class _Region:
    def bbox(self):
        raise NotImplementedError

    def contains(self, z):
        raise NotImplementedError

    def sample_uniform(self, rng, size):
        """Uniform points by rejection from the bounding box."""
        x0, x1, y0, y1 = self.bbox()
        out = np.empty(0, complex)
        while out.size < size:
            m = max(16, int(1.3 * (size - out.size) * (x1 - x0) * (y1 - y0) / self.area) + 8)
            z = x0 + (x1 - x0) * rng.random(m) + 1j * (y0 + (y1 - y0) * rng.random(m))
            out = np.concatenate([out, z[self.contains(z)]])
        return out[:size]

    def midpoint_grid(self, grid_n, supersample=8):
        """Tensor midpoint rule on the bounding box restricted to the region.

        Cells straddling the boundary get the fraction of ``supersample**2``
        sub-cell midpoints that fall inside as their weight, and the node is
        moved to the centroid of those sub-points.
        """
        x0, x1, y0, y1 = self.bbox()
        hx = (x1 - x0) / grid_n
        hy = (y1 - y0) / grid_n
        cx = x0 + hx * (np.arange(grid_n) + 0.5)
        cy = y0 + hy * (np.arange(grid_n) + 0.5)
        Z = (cx[None, :] + 1j * cy[:, None]).ravel()
        s = int(supersample)
        off = (np.arange(s) + 0.5) / s - 0.5
        sub = (hx * off[None, :] + 1j * hy * off[:, None]).ravel()
        pts = Z[:, None] + sub[None, :]
        inside = self.contains(pts.ravel()).reshape(pts.shape)
        frac = inside.mean(axis=1)
        keep = frac > 0
        cnt = inside[keep].sum(axis=1)
        nodes = (pts[keep] * inside[keep]).sum(axis=1) / cnt
        weights = frac[keep] * hx * hy
        return nodes, weights

    def quadrature(self, grid_n, supersample=8):
        """Integration nodes and weights with spacing about ``bbox / grid_n``."""
        return self.midpoint_grid(grid_n, supersample)


@dataclass(frozen=True)
class Disk(_Region):
    radius: float
    center: complex = 0j

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")
        object.__setattr__(self, "center", complex(self.center))

    @property
    def area(self):
        return math.pi * self.radius ** 2

    def bbox(self):
        c, r = self.center, self.radius
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        d = z - self.center
        return d.real * d.real + d.imag * d.imag <= self.radius * self.radius

    def sample_uniform(self, rng, size):
        r = self.radius * np.sqrt(rng.random(size))
        th = 2 * np.pi * rng.random(size)
        return self.center + r * np.exp(1j * th)

    def quadrature(self, grid_n, supersample=8):
        """Polar product rule: Gauss-Legendre in radius, trapezoid in angle.

        Ring ``i`` gets about ``2 pi r_i / h`` angles with ``h = 2R / grid_n``,
        so the node density matches a ``grid_n`` midpoint grid while smooth
        integrands converge spectrally.
        """
        R = self.radius
        n_r = max(2, int(math.ceil(grid_n / 2)))
        x, w = np.polynomial.legendre.leggauss(n_r)
        r = 0.5 * R * (x + 1)
        wr = 0.5 * R * w * r
        h = 2 * R / grid_n
        nodes, weights = [], []
        for ri, wi in zip(r, wr):
            m = max(8, int(math.ceil(2 * math.pi * ri / h)))
            th = 2 * math.pi * (np.arange(m) + 0.5) / m
            nodes.append(self.center + ri * np.exp(1j * th))
            weights.append(np.full(m, wi * 2 * math.pi / m))
        return np.concatenate(nodes), np.concatenate(weights)

    def dilate(self, s):
        return Disk(self.radius + s, self.center)

    def scaled(self, f):
        return Disk(self.radius * f, self.center * f)

    def to_dict(self):
        return {"type": "disk", "radius": self.radius,
                "center": [self.center.real, self.center.imag]}


@dataclass(frozen=True)
class Annulus(_Region):
    r_in: float
    r_out: float
    center: complex = 0j

    def __post_init__(self):
        if not 0 <= self.r_in < self.r_out:
            raise ValueError("annulus needs 0 <= r_in < r_out")
        object.__setattr__(self, "center", complex(self.center))

    @property
    def area(self):
        return math.pi * (self.r_out ** 2 - self.r_in ** 2)

    def bbox(self):
        c, r = self.center, self.r_out
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)

    def contains(self, z):
        d = np.asarray(z, dtype=complex) - self.center
        q = d.real * d.real + d.imag * d.imag
        return (q > self.r_in ** 2) & (q <= self.r_out ** 2)

    def to_dict(self):
        return {"type": "annulus", "r_in": self.r_in, "r_out": self.r_out,
                "center": [self.center.real, self.center.imag]}


@dataclass(frozen=True)
class Box(_Region):
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("empty box")

    @property
    def area(self):
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def bbox(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return ((z.real >= self.xmin) & (z.real <= self.xmax)
                & (z.imag >= self.ymin) & (z.imag <= self.ymax))

    def sample_uniform(self, rng, size):
        x = self.xmin + (self.xmax - self.xmin) * rng.random(size)
        y = self.ymin + (self.ymax - self.ymin) * rng.random(size)
        return x + 1j * y

    def to_dict(self):
        return {"type": "box", "xmin": self.xmin, "xmax": self.xmax,
                "ymin": self.ymin, "ymax": self.ymax}


@dataclass(frozen=True)
class DiskUnion(_Region):
    disks: tuple

    def __post_init__(self):
        if not self.disks:
            raise ValueError("empty union")
        object.__setattr__(self, "disks", tuple(self.disks))

    @property
    def area(self):
        if len(self.disks) == 2:
            a, b = self.disks
            return a.area + b.area - lens_area(a.radius, b.radius, abs(a.center - b.center))
        nodes, w = self.midpoint_grid(400, supersample=4)
        return float(w.sum())

    def bbox(self):
        bs = np.array([d.bbox() for d in self.disks])
        return (bs[:, 0].min(), bs[:, 1].max(), bs[:, 2].min(), bs[:, 3].max())

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, bool)
        for d in self.disks:
            out |= d.contains(z)
        return out

    def to_dict(self):
        return {"type": "union", "disks": [d.to_dict() for d in self.disks]}


def lens_area(r1, r2, d):
    """Area of the intersection of two disks with radii r1, r2 at distance d."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    a2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    k = 0.5 * math.sqrt((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2))
    return a1 + a2 - k


def region_from_dict(d):
    t = d["type"]
    c = complex(*d.get("center", (0.0, 0.0)))
    if t == "disk":
        return Disk(float(d["radius"]), c)
    if t == "annulus":
        return Annulus(float(d["r_in"]), float(d["r_out"]), c)
    if t == "box":
        return Box(float(d["xmin"]), float(d["xmax"]), float(d["ymin"]), float(d["ymax"]))
    if t == "union":
        return DiskUnion(tuple(region_from_dict(x) for x in d["disks"]))
    raise ValueError("unknown region type %r" % t)
