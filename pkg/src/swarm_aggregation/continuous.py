"""Continuous-plane swarm of disc robots driven by a binary-sensor controller."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .geometry import MetricsSample, compute_metrics

log = logging.getLogger(__name__)

CONTACT_TOL = 1e-6


@dataclass(frozen=True)
class Controller:
    """Wheel commands (left, right) for sensor bit 0, then for sensor bit 1."""

    v_l0: float
    v_r0: float
    v_l1: float
    v_r1: float

    def __post_init__(self):
        for name in ("v_l0", "v_r0", "v_l1", "v_r1"):
            value = getattr(self, name)
            if not -1.0 <= value <= 1.0:
                raise ValueError(f"controller component {name}={value} outside [-1, 1]")

    @property
    def is_clockwise_searching(self) -> bool:
        return self.v_r0 < self.v_l0 < 0

    def as_array(self) -> np.ndarray:
        return np.array([self.v_l0, self.v_r0, self.v_l1, self.v_r1], dtype=float)

    @classmethod
    def random_clockwise_searching(cls, rng: np.random.Generator) -> "Controller":
        hi = -rng.uniform(0.05, 0.95)
        lo = rng.uniform(-1.0, hi - 0.01)
        v_l1, v_r1 = rng.uniform(-1.0, 1.0, size=2)
        return cls(float(hi), float(lo), float(v_l1), float(v_r1))


X_STAR = Controller(-0.7, -1.0, 1.0, -1.0)


@dataclass(frozen=True)
class PhysicsParams:
    """Robot geometry and integration constants (lengths in cm, time in s).

    ``beta`` is the full apex angle of the sensor cone; 0 is a line of sight.
    ``damping`` converts a noise force in newtons into a velocity.
    """

    robot_radius: float = 3.7
    axle_length: float = 5.1
    max_wheel_speed: float = 12.8
    dt: float = 0.005
    beta: float = 0.0
    damping: float = 1.0

    def __post_init__(self):
        if self.robot_radius <= 0 or self.axle_length <= 0 or self.max_wheel_speed <= 0:
            raise ValueError("robot_radius, axle_length and max_wheel_speed must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.beta < math.pi:
            raise ValueError(f"beta must lie in [0, pi), got {self.beta}")
        if self.damping <= 0:
            raise ValueError("damping must be positive")

    @property
    def half_beta(self) -> float:
        return 0.5 * self.beta


@dataclass(frozen=True)
class NoiseModel:
    motion_noise_max: float = 0.0
    error_probability: float = 0.0

    def __post_init__(self):
        if self.motion_noise_max < 0:
            raise ValueError("motion_noise_max must be >= 0")
        if not 0.0 <= self.error_probability <= 1.0:
            raise ValueError("error_probability must lie in [0, 1]")


def body_twist(controller: Controller, bit: int, params: PhysicsParams) -> tuple[float, float]:
    """Linear speed (cm/s, along the sensor axis) and angular speed (rad/s)."""
    if bit not in (0, 1):
        raise ValueError("sensor bit must be 0 or 1")
    if bit:
        vl, vr = controller.v_l1, controller.v_r1
    else:
        vl, vr = controller.v_l0, controller.v_r0
    v = params.max_wheel_speed * (vl + vr) / 2.0
    w = params.max_wheel_speed * (vr - vl) / params.axle_length
    return v, w


def orbit_radius(controller: Controller, params: PhysicsParams) -> float:
    v, w = body_twist(controller, 0, params)
    return math.inf if w == 0 else abs(v / w)


def _check_calibration() -> None:
    p = PhysicsParams()
    _, w0 = body_twist(X_STAR, 0, p)
    v1, w1 = body_twist(X_STAR, 1, p)
    assert abs(orbit_radius(X_STAR, p) - 14.45) < 5e-3, "orbit radius calibration"
    assert abs(w0 + 0.75) < 5e-3, "searching angular speed calibration"
    assert v1 == 0.0 and abs(w1 + 5.02) < 5e-3, "spin angular speed calibration"


_check_calibration()


@dataclass
class World:
    positions: np.ndarray
    headings: np.ndarray
    params: PhysicsParams = field(default_factory=PhysicsParams)
    noise: NoiseModel = field(default_factory=NoiseModel)
    controller: Controller = X_STAR
    seed: int = 0
    pinned: Optional[np.ndarray] = None
    rng: Optional[np.random.Generator] = None
    steps: int = 0
    contact_overflows: int = 0
    last_sensed: Optional[np.ndarray] = None
    last_progress: Optional[np.ndarray] = None
    impulses: Optional[np.ndarray] = None

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float).reshape(-1, 2)
        self.headings = np.mod(np.array(self.headings, dtype=float).reshape(-1), 2 * math.pi)
        n = len(self.positions)
        if len(self.headings) != n:
            raise ValueError("positions and headings differ in length")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("robot positions must be finite")
        if self.pinned is None:
            self.pinned = np.zeros(n, dtype=bool)
        else:
            self.pinned = np.asarray(self.pinned, dtype=bool).copy()
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)
        if self.last_sensed is None:
            self.last_sensed = np.zeros(n, dtype=bool)
        if self.last_progress is None:
            self.last_progress = np.ones(n)
        if self.impulses is None:
            self.impulses = np.zeros((n, n))

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def time(self) -> float:
        return self.steps * self.params.dt

    def centers_of_rotation(self) -> np.ndarray:
        """Center each robot orbits while its sensor reads 0."""
        v, w = body_twist(self.controller, 0, self.params)
        if w == 0:
            raise ValueError("controller drives straight when nothing is seen")
        left = np.stack([-np.sin(self.headings), np.cos(self.headings)], axis=1)
        return self.positions + (v / w) * left

    def min_pair_distance(self) -> float:
        if self.n < 2:
            return math.inf
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(dist, np.inf)
        return float(dist.min())

    def copy(self) -> "World":
        rng = np.random.Generator(type(self.rng.bit_generator)())
        rng.bit_generator.state = self.rng.bit_generator.state
        return replace(self, positions=self.positions.copy(), headings=self.headings.copy(),
                       pinned=self.pinned.copy(), rng=rng,
                       last_sensed=self.last_sensed.copy(), last_progress=self.last_progress.copy(),
                       impulses=self.impulses.copy())

    def metrics(self, rng: Optional[np.random.Generator] = None) -> MetricsSample:
        return compute_metrics(self.positions, self.params.robot_radius, self.time, rng=rng)


def sense(world: World, i: int) -> int:
    """Sensor bit of robot ``i``, including the random error flip."""
    if not 0 <= i < world.n:
        raise IndexError(f"robot index {i} out of range")
    bit = _kernels.sees(world.positions, world.headings, i, world.params.robot_radius,
                        world.params.half_beta)
    if world.rng.random() < world.noise.error_probability:
        bit = not bit
    return int(bit)


def resolve_contacts(current, proposed, r: float, pinned=None) -> tuple[np.ndarray, bool]:
    """Push overlapping discs apart along their center lines.

    Each overlapping pair is separated symmetrically (a pinned robot does not
    move and its partner takes the full correction), iterating until the
    largest overlap is below 1e-9 or 64 sweeps have run.  Returns the
    positions and a convergence flag; without convergence the current
    positions are returned unchanged.
    """
    current = np.ascontiguousarray(current, dtype=float).reshape(-1, 2)
    proposed = np.ascontiguousarray(proposed, dtype=float).reshape(-1, 2)
    if pinned is None:
        pinned = np.zeros(len(current), dtype=bool)
    out, ok = _kernels.project_contacts(current, proposed, float(r), np.asarray(pinned, dtype=bool))
    return out, bool(ok)


def advance(world: World, n_steps: int) -> World:
    """Integrate ``n_steps`` time steps in place."""
    if n_steps <= 0:
        return world
    p = world.params
    rand = world.rng.random((n_steps, world.n, 3))
    overflow = _kernels.advance_continuous(
        world.positions, world.headings, world.pinned, world.controller.as_array(),
        p.robot_radius, p.axle_length, p.max_wheel_speed, p.dt, p.half_beta,
        world.noise.error_probability, world.noise.motion_noise_max, p.damping,
        rand, world.last_sensed, world.last_progress, world.impulses)
    world.steps += n_steps
    if overflow:
        world.contact_overflows += overflow
        log.warning("contact_overflow: %d step(s) clamped before t=%.3f s", overflow, world.time)
    return world


def step(world: World) -> World:
    return advance(world, 1)


def run(world: World, duration: float, sample_every: float = 1.0,
        until: Optional[Callable[[MetricsSample], bool]] = None) -> tuple[list[MetricsSample], World]:
    """Step ``world`` for ``duration`` seconds, sampling metrics periodically.

    Samples are taken at the start and after every ``sample_every`` seconds.
    If ``until`` returns True for a sample the run stops there.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    dt = world.params.dt
    per_sample = max(1, int(round(sample_every / dt)))
    total = int(round(duration / dt))
    metrics_rng = np.random.default_rng([world.seed, 1])
    series = [world.metrics(metrics_rng)]
    done = 0
    while done < total and not (until and until(series[-1])):
        chunk = min(per_sample, total - done)
        advance(world, chunk)
        done += chunk
        series.append(world.metrics(metrics_rng))
    return series, world
