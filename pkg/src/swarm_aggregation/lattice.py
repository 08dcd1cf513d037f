"""Discrete adaptation on the triangular lattice.

Nodes use axial coordinates (q, r).  Lattice direction m points at bearing
60*m degrees; a robot with orientation k watches the sector between
directions k and k+1 (exclusive at k, inclusive at k+1) and orbits the
neighbor in direction k+2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .geometry import HEX_DIRECTIONS, MetricsSample, compute_metrics

# Robots sit on unit spacing, so adjacent robots touch with radius 1/2.
LATTICE_ROBOT_RADIUS = 0.5
_BUFFER = 8192


@dataclass(frozen=True, order=True)
class AxialCoord:
    q: int
    r: int

    def __post_init__(self):
        if int(self.q) != self.q or int(self.r) != self.r:
            raise ValueError("axial coordinates must be integers")

    def __add__(self, other: "AxialCoord") -> "AxialCoord":
        return AxialCoord(self.q + other.q, self.r + other.r)

    def __sub__(self, other: "AxialCoord") -> "AxialCoord":
        return AxialCoord(self.q - other.q, self.r - other.r)

    def neighbor(self, direction: int) -> "AxialCoord":
        dq, dr = HEX_DIRECTIONS[direction % 6]
        return AxialCoord(self.q + dq, self.r + dr)

    def neighbors(self) -> list["AxialCoord"]:
        return [self.neighbor(m) for m in range(6)]


@dataclass(frozen=True)
class LatticeRobot:
    node: AxialCoord
    k: int = 0
    d: int = 0

    def __post_init__(self):
        if not 0 <= self.k <= 5:
            raise ValueError(f"orientation k must be in 0..5, got {self.k}")
        if self.d < 0:
            raise ValueError("blocked counter must be non-negative")


@dataclass(frozen=True)
class DiscreteNoise:
    """Sensor error probability and the deadlock perturbation threshold d*.

    ``perturbation_threshold`` of None disables perturbation.
    """

    error_probability: float = 0.0
    perturbation_threshold: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.error_probability <= 1.0:
            raise ValueError("error_probability must lie in [0, 1]")
        t = self.perturbation_threshold
        if t is not None and (int(t) != t or t <= 0):
            raise ValueError("perturbation_threshold must be a positive integer or None")

    @property
    def d_star(self) -> int:
        return 0 if self.perturbation_threshold is None else int(self.perturbation_threshold)


def axial_to_cartesian(node: AxialCoord) -> tuple[float, float]:
    return node.q + node.r / 2.0, node.r * math.sqrt(3.0) / 2.0


def cone_contains(origin: AxialCoord, k: int, target: AxialCoord) -> bool:
    """Is ``target`` inside sector k of ``origin`` (bearing in (60k, 60k+60] degrees)?"""
    if target == origin:
        raise ValueError("target coincides with the cone origin")
    return bool(_kernels.in_sector(k % 6, target.q - origin.q, target.r - origin.r))


def center_of_rotation(robot: LatticeRobot) -> AxialCoord:
    return robot.node.neighbor(robot.k + 2)


@dataclass
class LatticeWorld:
    q: np.ndarray
    r: np.ndarray
    k: np.ndarray
    d: np.ndarray
    noise: DiscreteNoise = field(default_factory=DiscreteNoise)
    seed: int = 0
    rng: Optional[np.random.Generator] = None
    activation_count: int = 0
    round_count: int = 0
    covered: Optional[np.ndarray] = None
    last_outcome: int = -1
    _choices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64), repr=False)
    _uniforms: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _cursor: int = field(default=0, repr=False)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.int64).copy()
        self.r = np.asarray(self.r, dtype=np.int64).copy()
        self.k = np.asarray(self.k, dtype=np.int64).copy() % 6
        self.d = np.asarray(self.d, dtype=np.int64).copy()
        if not (len(self.q) == len(self.r) == len(self.k) == len(self.d)):
            raise ValueError("robot arrays differ in length")
        if len(set(zip(self.q.tolist(), self.r.tolist()))) != len(self.q):
            raise ValueError("two robots share a node")
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)
        if self.covered is None:
            self.covered = np.zeros(len(self.q), dtype=bool)

    @classmethod
    def from_robots(cls, robots, noise: Optional[DiscreteNoise] = None, seed: int = 0) -> "LatticeWorld":
        robots = list(robots)
        return cls(q=[b.node.q for b in robots], r=[b.node.r for b in robots],
                   k=[b.k for b in robots], d=[b.d for b in robots],
                   noise=noise or DiscreteNoise(), seed=seed)

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def robots(self) -> list[LatticeRobot]:
        return [LatticeRobot(AxialCoord(int(a), int(b)), int(c), int(e))
                for a, b, c, e in zip(self.q, self.r, self.k, self.d)]

    @property
    def occupancy(self) -> dict[AxialCoord, int]:
        return {AxialCoord(int(a), int(b)): i for i, (a, b) in enumerate(zip(self.q, self.r))}

    def positions(self) -> np.ndarray:
        return np.stack([self.q + self.r / 2.0, self.r * (math.sqrt(3.0) / 2.0)], axis=1)

    def metrics(self, rng: Optional[np.random.Generator] = None) -> MetricsSample:
        return compute_metrics(self.positions(), LATTICE_ROBOT_RADIUS, float(self.round_count), rng=rng)

    def _refill(self):
        self._choices = self.rng.integers(0, self.n, size=_BUFFER)
        self._uniforms = self.rng.random(_BUFFER)
        self._cursor = 0


def random_lattice_world(n: int, rng: np.random.Generator, noise: Optional[DiscreteNoise] = None,
                         density: float = 0.1, seed: int = 0) -> LatticeWorld:
    """Distinct uniform nodes in a rhombus holding about n/density nodes."""
    if n < 1:
        raise ValueError("need at least one robot")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    side = math.ceil(math.sqrt(n / density))
    cells = rng.choice(side * side, size=n, replace=False)
    world = LatticeWorld(q=cells % side, r=cells // side, k=rng.integers(0, 6, size=n),
                         d=np.zeros(n, dtype=np.int64), noise=noise or DiscreteNoise(), seed=seed)
    world.rng = rng
    return world


def sense_discrete(world: LatticeWorld, i: int) -> int:
    if not 0 <= i < world.n:
        raise IndexError(f"robot index {i} out of range")
    bit = _kernels.lattice_sees(world.q, world.r, world.k, i)
    if world.rng.random() < world.noise.error_probability:
        bit = not bit
    return int(bit)


def activate(world: LatticeWorld, i: int) -> LatticeWorld:
    """Apply one activation of robot ``i`` in place.

    ``world.last_outcome`` records what happened: 0 orbit step, 1 rotation
    because a robot was seen, 2 blocked, 3 perturbation rotation.
    """
    if not 0 <= i < world.n:
        raise IndexError(f"robot index {i} out of range")
    flip = world.rng.random() < world.noise.error_probability
    world.last_outcome = int(_kernels.lattice_activate(world.q, world.r, world.k, world.d, i,
                                                       flip, world.noise.d_star))
    world.activation_count += 1
    if not world.covered[i]:
        world.covered[i] = True
        if world.covered.all():
            world.covered[:] = False
            world.round_count += 1
    return world


def run_one_round(world: LatticeWorld) -> LatticeWorld:
    """Activate uniformly chosen robots until every robot has gone at least once."""
    while True:
        if world._cursor >= len(world._choices):
            world._refill()
        start = world._cursor
        nxt, done = _kernels.lattice_run(world.q, world.r, world.k, world.d, world.covered,
                                         world._choices, world._uniforms, start,
                                         world.noise.error_probability, world.noise.d_star)
        world.activation_count += nxt - start
        world._cursor = nxt
        if done:
            world.round_count += 1
            return world


def run_rounds(world: LatticeWorld, max_rounds: int,
               until: Optional[Callable[[MetricsSample], bool]] = None,
               sample_every: int = 1) -> tuple[list[MetricsSample], LatticeWorld]:
    """Run up to ``max_rounds`` rounds, sampling metrics at the start and every ``sample_every`` rounds.

    The last round is always sampled.  If ``until`` returns True for a sample
    the run stops there.
    """
    if max_rounds <= 0:
        raise ValueError("max_rounds must be positive")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    metrics_rng = np.random.default_rng([world.seed, 1])
    series = [world.metrics(metrics_rng)]
    for done in range(1, max_rounds + 1):
        if until and until(series[-1]):
            break
        run_one_round(world)
        if done % sample_every == 0 or done == max_rounds:
            series.append(world.metrics(metrics_rng))
    return series, world
