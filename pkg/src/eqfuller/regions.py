"""Invariant regions of R^n and the essential period window."""
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Region:
    """An open box, ball or spherical shell (all centred at the origin for balls/shells)."""
    kind: str
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None
    inner: float = 0.0
    outer: float = np.inf

    @classmethod
    def box(cls, lo, hi):
        lo, hi = tuple(float(v) for v in lo), tuple(float(v) for v in hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ConfigError("box needs lo < hi componentwise")
        return cls("box", lo, hi)

    @classmethod
    def ball(cls, radius):
        return cls("ball", inner=0.0, outer=float(radius))

    @classmethod
    def shell(cls, inner, outer):
        if not 0 <= inner < outer:
            raise ConfigError("shell needs 0 <= inner < outer")
        return cls("shell", inner=float(inner), outer=float(outer))

    @classmethod
    def from_json(cls, spec):
        kind = spec.get("kind", "ball")
        if kind == "box":
            return cls.box(spec["lo"], spec["hi"])
        if kind == "ball":
            return cls.ball(spec["radius"])
        if kind == "shell":
            return cls.shell(spec["inner"], spec["outer"])
        raise ConfigError(f"unknown region kind {kind!r}")

    def to_json(self):
        if self.kind == "box":
            return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}
        if self.kind == "ball":
            return {"kind": "ball", "radius": self.outer}
        return {"kind": "shell", "inner": self.inner, "outer": self.outer}

    def boundary_distance(self, x) -> np.ndarray:
        """Signed distance to the boundary, positive inside; works row-wise."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "box":
            lo, hi = np.asarray(self.lo), np.asarray(self.hi)
            return np.min(np.minimum(x - lo, hi - x), axis=1)
        r = np.linalg.norm(x, axis=1)
        if self.kind == "ball":
            return self.outer - r
        return np.minimum(r - self.inner, self.outer - r)

    def contains(self, x) -> bool:
        return bool(np.all(self.boundary_distance(x) > 0))

    def bounding_box(self, dim):
        if self.kind == "box":
            return np.asarray(self.lo), np.asarray(self.hi)
        return -self.outer * np.ones(dim), self.outer * np.ones(dim)

    def bounding_radius(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))
        return self.outer

    def is_invariant(self, action) -> bool:
        if self.kind != "box":
            return True
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        for v in product(*zip(lo, hi)):
            for M in action.matrices:
                w = M @ np.asarray(v)
                if np.any(w < lo - 1e-12) or np.any(w > hi + 1e-12):
                    return False
        return True

    def grid(self, dim, per_axis=5) -> np.ndarray:
        """Cell-midpoint grid of the bounding box, restricted to the region."""
        lo, hi = self.bounding_box(dim)
        axes = [lo[i] + (np.arange(per_axis) + 0.5) * (hi[i] - lo[i]) / per_axis
                for i in range(dim)]
        pts = np.array(list(product(*axes)))
        return pts[self.boundary_distance(pts) > 0]

    def sample(self, dim, count, rng) -> np.ndarray:
        lo, hi = self.bounding_box(dim)
        out = []
        while len(out) < count:
            x = rng.uniform(lo, hi)
            if self.contains(x):
                out.append(x)
        return np.array(out)


@dataclass(frozen=True)
class EssentialWindow:
    region: Region
    a: float
    b: float

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ConfigError("window needs 0 < a < b")

    def __iter__(self):
        yield self.a
        yield self.b

    def __getitem__(self, i):
        return (self.a, self.b)[i]

    def contains_period(self, T) -> bool:
        return self.a < T < self.b

    def validate(self, action):
        if not self.region.is_invariant(action):
            raise ConfigError("region is not invariant under the group action")
