"""Procedural outdoor worlds built from analytic primitives."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DIFFICULTIES = ("easy", "medium", "hard")
DEFAULT_BOUNDS = (-10.0, 40.0, -20.0, 20.0)
GOAL_DISTANCES = (10.0, 20.0, 30.0)

# heightfield lattice
HF_SPACING = 8.0
HF_MARGIN = 24.0


@dataclass(frozen=True)
class Box:
    center: tuple[float, float, float]
    extents: tuple[float, float, float]  # full side lengths

    @property
    def top(self) -> float:
        return self.center[2] + 0.5 * self.extents[2]


@dataclass(frozen=True)
class Cylinder:
    """Vertical cylinder; ``center`` is the centre of its base disc."""

    center: tuple[float, float, float]
    radius: float
    height: float

    @property
    def top(self) -> float:
        return self.center[2] + self.height


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float

    @property
    def top(self) -> float:
        return self.center[2] + self.radius


@dataclass(frozen=True)
class GrassPatch:
    """Convex counter-clockwise polygon extruded from ``base`` to ``base + height``."""

    polygon: tuple[tuple[float, float], ...]
    height: float = 0.8
    soft_edge: float = 0.3
    base: float = 0.0

    def __post_init__(self):
        if self.height <= 0 or self.soft_edge <= 0:
            raise ValueError("grass height and soft_edge must be positive")
        if len(self.polygon) < 3:
            raise ValueError("grass polygon needs at least three vertices")
        p = np.asarray(self.polygon, dtype=float)
        q = np.roll(p, -1, axis=0)
        if np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]) <= 0:
            raise ValueError("grass polygon must be counter-clockwise")

    def planes(self) -> np.ndarray:
        """Outward half-planes ``(nx, ny, d)``; inside means ``n . p <= d``."""
        p = np.asarray(self.polygon, dtype=float)
        e = np.roll(p, -1, axis=0) - p
        n = np.stack([e[:, 1], -e[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return np.column_stack([n, np.einsum("ij,ij->i", n, p)])

    def signed_distance(self, xy) -> np.ndarray:
        """Positive outside; exact outside a convex polygon up to vertex regions."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        pl = self.planes()
        return np.max(xy @ pl[:, :2].T - pl[:, 2], axis=1)


def value_noise_lattice(seed: int, x0: float, y0: float, nx: int, ny: int, amplitude: float) -> np.ndarray:
    """Two octaves (16 m and 8 m wavelength) sampled on the 8 m lattice.

    Peak magnitude is bounded by ``amplitude``.
    """
    rng = np.random.default_rng([int(seed), 7919])
    coarse = rng.uniform(-1.0, 1.0, size=(ny // 2 + 2, nx // 2 + 2))
    fine = rng.uniform(-1.0, 1.0, size=(ny, nx))
    j, i = np.mgrid[0:ny, 0:nx]
    fi, fj = i / 2.0, j / 2.0
    i0, j0 = np.floor(fi).astype(int), np.floor(fj).astype(int)
    ax, ay = fi - i0, fj - j0
    c = ((coarse[j0, i0] * (1 - ax) + coarse[j0, i0 + 1] * ax) * (1 - ay)
         + (coarse[j0 + 1, i0] * (1 - ax) + coarse[j0 + 1, i0 + 1] * ax) * ay)
    return amplitude * (2.0 * c + fine) / 3.0


@dataclass(frozen=True)
class World:
    difficulty: str
    seed: int
    bounds: tuple[float, float, float, float] = DEFAULT_BOUNDS
    boxes: tuple[Box, ...] = ()
    cylinders: tuple[Cylinder, ...] = ()
    spheres: tuple[Sphere, ...] = ()
    grass: tuple[GrassPatch, ...] = ()
    terrain_amplitude: float = 0.0
    terrain_seed: int = 0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.terrain_amplitude < 0 or self.terrain_amplitude > 1.5:
            raise ValueError("terrain amplitude must lie in [0, 1.5]")
        xmin, xmax, ymin, ymax = self.bounds
        for ob in self.boxes + self.cylinders + self.spheres:
            x, y = ob.center[0], ob.center[1]
            if not (xmin <= x <= xmax and ymin <= y <= ymax):
                raise ValueError(f"obstacle {ob} outside world bounds")

    @property
    def flat(self) -> bool:
        return self.terrain_amplitude == 0.0

    @cached_property
    def heightfield(self) -> tuple[np.ndarray, float, float, float]:
        """``(lattice, x0, y0, spacing)``; an empty lattice means flat ground."""
        if self.flat:
            return np.zeros((0, 0)), 0.0, 0.0, 1.0
        xmin, xmax, ymin, ymax = self.bounds
        x0 = math.floor((xmin - HF_MARGIN) / HF_SPACING) * HF_SPACING
        y0 = math.floor((ymin - HF_MARGIN) / HF_SPACING) * HF_SPACING
        nx = int(math.ceil((xmax + HF_MARGIN - x0) / HF_SPACING)) + 1
        ny = int(math.ceil((ymax + HF_MARGIN - y0) / HF_SPACING)) + 1
        lat = value_noise_lattice(self.terrain_seed, x0, y0, nx, ny, self.terrain_amplitude)
        return lat, x0, y0, HF_SPACING

    def terrain_z(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.flat:
            return np.zeros(np.broadcast(x, y).shape)
        h, x0, y0, s = self.heightfield
        ny, nx = h.shape
        fx = np.clip((x - x0) / s, 0.0, nx - 1.0)
        fy = np.clip((y - y0) / s, 0.0, ny - 1.0)
        i = np.minimum(fx.astype(np.int64), nx - 2)
        j = np.minimum(fy.astype(np.int64), ny - 2)
        ax, ay = fx - i, fy - j
        return ((h[j, i] * (1 - ax) + h[j, i + 1] * ax) * (1 - ay)
                + (h[j + 1, i] * (1 - ax) + h[j + 1, i + 1] * ax) * ay)

    @cached_property
    def ray_arrays(self) -> dict:
        """Primitive tables in the layout expected by ``kernels.cast_rays``."""
        boxes = np.array([[b.center[0] - b.extents[0] / 2, b.center[0] + b.extents[0] / 2,
                           b.center[1] - b.extents[1] / 2, b.center[1] + b.extents[1] / 2,
                           b.center[2] - b.extents[2] / 2, b.center[2] + b.extents[2] / 2]
                          for b in self.boxes], dtype=float).reshape(-1, 6)
        cyls = np.array([[c.center[0], c.center[1], c.radius, c.center[2], c.center[2] + c.height]
                         for c in self.cylinders], dtype=float).reshape(-1, 5)
        spheres = np.array([[*s.center, s.radius] for s in self.spheres], dtype=float).reshape(-1, 4)
        planes, index, zr = [], [], []
        for g in self.grass:
            pl = g.planes()
            index.append((len(planes), len(pl)))
            planes.extend(pl.tolist())
            zr.append((g.base - 1.0, g.base + g.height))
        hf, x0, y0, s = self.heightfield
        # planar bounding circles (x, y, r) of every primitive in id order
        circles = [(b.center[0], b.center[1], 0.5 * math.hypot(b.extents[0], b.extents[1])) for b in self.boxes]
        circles += [(c.center[0], c.center[1], c.radius) for c in self.cylinders]
        circles += [(q.center[0], q.center[1], q.radius) for q in self.spheres]
        for g in self.grass:
            p = np.asarray(g.polygon, dtype=float)
            m = p.mean(axis=0)
            circles.append((m[0], m[1], float(np.max(np.hypot(*(p - m).T)))))
        return dict(boxes=boxes, cyls=cyls, spheres=spheres, circles=np.array(circles, dtype=float).reshape(-1, 3),
                    planes=np.array(planes, dtype=float).reshape(-1, 3),
                    prism_index=np.array(index, dtype=np.int64).reshape(-1, 2),
                    prism_z=np.array(zr, dtype=float).reshape(-1, 2),
                    hf=np.ascontiguousarray(hf, dtype=float), hf_x0=x0, hf_y0=y0, hf_res=s)

    @property
    def grass_id_start(self) -> int:
        """First primitive id used by grass prisms in ray casting results."""
        return 1 + len(self.boxes) + len(self.cylinders) + len(self.spheres)

    def clearance(self, xy) -> np.ndarray:
        """Planar distance from points to the nearest solid (non-grass) footprint.

        Negative inside a footprint; ``inf`` when the world has no solids.
        """
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        x, y = xy[:, 0:1], xy[:, 1:2]
        out = np.full(len(xy), np.inf)
        if self.boxes:
            b = np.array([[o.center[0], o.center[1], o.extents[0] / 2, o.extents[1] / 2] for o in self.boxes])
            qx = np.abs(x - b[:, 0]) - b[:, 2]
            qy = np.abs(y - b[:, 1]) - b[:, 3]
            d = np.hypot(np.maximum(qx, 0), np.maximum(qy, 0)) + np.minimum(np.maximum(qx, qy), 0)
            out = np.minimum(out, d.min(axis=1))
        if self.cylinders:
            c = np.array([[o.center[0], o.center[1], o.radius] for o in self.cylinders])
            out = np.minimum(out, (np.hypot(x - c[:, 0], y - c[:, 1]) - c[:, 2]).min(axis=1))
        if self.spheres:
            s = np.array([[o.center[0], o.center[1], o.center[2], o.radius] for o in self.spheres])
            ground = self.terrain_z(s[:, 0], s[:, 1])
            below = np.maximum(ground - s[:, 2], 0.0)
            foot = np.sqrt(np.maximum(s[:, 3] ** 2 - below ** 2, 0.0))
            out = np.minimum(out, (np.hypot(x - s[:, 0], y - s[:, 1]) - foot).min(axis=1))
        return out

    def in_grass(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        out = np.zeros(len(xy), dtype=bool)
        for g in self.grass:
            out |= g.signed_distance(xy) <= 0.0
        return out

    def to_dict(self) -> dict:
        return {
            "format": "navbench-world/1",
            "name": self.name,
            "difficulty": self.difficulty,
            "seed": self.seed,
            "bounds": list(self.bounds),
            "terrain": {"amplitude": self.terrain_amplitude, "seed": self.terrain_seed,
                        "spacing": HF_SPACING, "margin": HF_MARGIN},
            "boxes": [{"center": list(b.center), "extents": list(b.extents)} for b in self.boxes],
            "cylinders": [{"center": list(c.center), "radius": c.radius, "height": c.height}
                          for c in self.cylinders],
            "spheres": [{"center": list(s.center), "radius": s.radius} for s in self.spheres],
            "grass": [{"polygon": [list(p) for p in g.polygon], "height": g.height,
                       "soft_edge": g.soft_edge, "base": g.base} for g in self.grass],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "World":
        if d.get("format") != "navbench-world/1":
            raise ValueError("not a navbench world document")
        t = d["terrain"]
        return cls(
            difficulty=d["difficulty"], seed=int(d["seed"]), bounds=tuple(d["bounds"]),
            boxes=tuple(Box(tuple(b["center"]), tuple(b["extents"])) for b in d["boxes"]),
            cylinders=tuple(Cylinder(tuple(c["center"]), c["radius"], c["height"]) for c in d["cylinders"]),
            spheres=tuple(Sphere(tuple(s["center"]), s["radius"]) for s in d["spheres"]),
            grass=tuple(GrassPatch(tuple(tuple(p) for p in g["polygon"]), g["height"], g["soft_edge"], g["base"])
                        for g in d["grass"]),
            terrain_amplitude=float(t["amplitude"]), terrain_seed=int(t["seed"]), name=d.get("name", ""),
        )


def save_world(world: World, path) -> None:
    with open(path, "w") as fh:
        json.dump(world.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_world(path) -> World:
    with open(path) as fh:
        return World.from_dict(json.load(fh))


# ------------------------------------------------------------ generation ---

# kept free of obstacles around the start and every benchmark goal
KEEP_CLEAR = 2.0


def _keepouts(start=(0.0, 0.0)) -> np.ndarray:
    return np.array([start] + [(d, 0.0) for d in GOAL_DISTANCES])


def _free_spot(xy, size, keepouts, placed, min_gap) -> bool:
    if np.any(np.hypot(keepouts[:, 0] - xy[0], keepouts[:, 1] - xy[1]) < KEEP_CLEAR + size):
        return False
    for (px, py, ps) in placed:
        if math.hypot(px - xy[0], py - xy[1]) < size + ps + min_gap:
            return False
    return True


def _scatter(rng, n, region, size_fn, keepouts, placed, min_gap=0.3, clusters=0, cluster_sigma=1.5):
    """Rejection-sample ``n`` footprints (x, y, size); ``clusters`` of them grouped."""
    out = []
    centers = []
    for _ in range(clusters):
        centers.append((rng.uniform(region[0], region[1]), rng.uniform(region[2], region[3])))
    tries = 0
    while len(out) < n and tries < 200 * n:
        tries += 1
        size = size_fn()
        if centers and len(out) < n // 2:
            c = centers[len(out) % len(centers)]
            xy = (c[0] + rng.normal(0, cluster_sigma), c[1] + rng.normal(0, cluster_sigma))
        else:
            xy = (rng.uniform(region[0], region[1]), rng.uniform(region[2], region[3]))
        if not (region[0] <= xy[0] <= region[1] and region[2] <= xy[1] <= region[3]):
            continue
        if _free_spot(xy, size, keepouts, placed + out, min_gap):
            out.append((float(xy[0]), float(xy[1]), float(size)))
    return out


# obstacles are placed where the benchmark routes run; the forest tiers are denser around the route line
OBSTACLE_REGION = (1.5, 36.0, -12.0, 12.0)
FOREST_REGION = (1.5, 36.0, -8.0, 8.0)


def _grass_patch(rng, cx, cy, world_z, height=0.8, soft_edge=0.3) -> GrassPatch:
    w, h = rng.uniform(2.0, 5.0), rng.uniform(1.5, 4.0)
    a = rng.uniform(0, math.pi)
    c, s = math.cos(a), math.sin(a)
    corners = [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]
    poly = tuple((round(cx + c * px - s * py, 4), round(cy + s * px + c * py, 4)) for px, py in corners)
    zs = world_z(np.array([p[0] for p in poly] + [cx]), np.array([p[1] for p in poly] + [cy]))
    return GrassPatch(poly, height, soft_edge, round(float(np.max(zs)), 4))


def generate_world(difficulty: str, seed: int, n_obstacles: int | None = None) -> World:
    """Deterministic world for ``(difficulty, seed)``; the start and goal areas are kept clear."""
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"difficulty must be one of {DIFFICULTIES}")
    rng = np.random.default_rng([int(seed), DIFFICULTIES.index(difficulty)])
    keep = _keepouts()
    r = OBSTACLE_REGION
    if difficulty == "easy":
        n = 30 if n_obstacles is None else n_obstacles
        # footprints are the boxes' circumscribed circles
        spots = _scatter(rng, n, r, lambda: math.sqrt(2.0) * rng.uniform(0.4, 0.75), keep, [], clusters=3)
        boxes = []
        for x, y, rad in spots:
            side, hgt = math.sqrt(2.0) * rad, rng.uniform(0.6, 1.2)
            boxes.append(Box((round(x, 4), round(y, 4), round(hgt / 2, 4)),
                             (round(side, 4), round(side, 4), round(hgt, 4))))
        return World("easy", int(seed), boxes=tuple(boxes), name=f"easy-{seed}")

    amp = 0.0
    tseed = 0
    if difficulty == "hard":
        amp, tseed = 1.0, int(rng.integers(0, 2**31))
    proto = World(difficulty, int(seed), terrain_amplitude=amp, terrain_seed=tseed)
    z_at = proto.terrain_z

    placed = []
    grass = []
    if difficulty == "hard":
        n_grass = int(rng.integers(3, 6))
        for g in range(n_grass):
            # the first patch is redrawn until it sits near the routes, so one always lies within 30 m of the start
            for _ in range(100 if g == 0 else 1):
                if g == 0:
                    gx, gy = rng.uniform(4.0, 25.0), rng.uniform(-5.0, 5.0)
                else:
                    gx, gy = rng.uniform(r[0], r[1]), rng.uniform(r[2], r[3])
                if _free_spot((gx, gy), 1.5, keep, placed, 0.0):
                    grass.append(_grass_patch(rng, gx, gy, z_at))
                    placed.append((gx, gy, 2.5))
                    break

    n = (40 if difficulty == "medium" else 32) if n_obstacles is None else n_obstacles
    spots = _scatter(rng, n, FOREST_REGION, lambda: rng.uniform(0.2, 0.8), keep, placed)
    cylinders, spheres = [], []
    for x, y, size in spots:
        ground = float(z_at(x, y))
        if rng.random() < 0.6:
            radius = round(min(size, 0.45), 4)
            cylinders.append(Cylinder((round(x, 4), round(y, 4), round(ground - 0.5, 4)), radius,
                                      round(rng.uniform(3.0, 6.0) + 0.5, 4)))
        else:
            radius = max(size, 0.45)
            cz = ground + radius * rng.uniform(0.1, 0.5)
            spheres.append(Sphere((round(x, 4), round(y, 4), round(cz, 4)), round(radius, 4)))
    return World(difficulty, int(seed), cylinders=tuple(cylinders), spheres=tuple(spheres), grass=tuple(grass),
                 terrain_amplitude=amp, terrain_seed=tseed, name=f"{difficulty}-{seed}")


def grass_corridor_world(seed: int = 0, gap_width: float = 3.2, grass_offset: float = 0.5) -> World:
    """Tree wall across the route at x = 8 m with a single gap flanked by tall grass.

    The grass sits beside the gap (not in it), so ground truth says the gap is
    passable; a sensor that bleeds the grass silhouette sideways narrows it.
    """
    rng = np.random.default_rng([int(seed), 97])
    gap_y = float(rng.uniform(-2.0, 2.0))
    trees = []
    y = -14.0
    while y <= 14.0:
        if abs(y - gap_y) > gap_width / 2 + 0.35:
            trees.append(Cylinder((8.0, round(y, 4), -0.5), 0.35, 5.0))
        y += 0.6
    lo, hi = gap_y - gap_width / 2, gap_y + gap_width / 2
    g1 = GrassPatch(((6.5, hi + grass_offset), (9.5, hi + grass_offset), (9.5, hi + grass_offset + 2.5),
                     (6.5, hi + grass_offset + 2.5)), 0.8, 0.3, 0.0)
    g2 = GrassPatch(((6.5, lo - grass_offset - 2.5), (9.5, lo - grass_offset - 2.5), (9.5, lo - grass_offset),
                     (6.5, lo - grass_offset)), 0.8, 0.3, 0.0)
    return World("hard", int(seed), cylinders=tuple(trees), grass=(g1, g2), name=f"grass-corridor-{seed}")
