"""Initial configurations for the continuous simulator."""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from . import _kernels
from .continuous import X_STAR, Controller, NoiseModel, PhysicsParams, World, body_twist


def _world(positions, headings, r, params, controller, noise, seed) -> World:
    if params is None:
        params = PhysicsParams(robot_radius=r)
    elif params.robot_radius != r:
        raise ValueError("robot radius disagrees with params.robot_radius")
    return World(np.asarray(positions, dtype=float), np.asarray(headings, dtype=float),
                 params=params, controller=controller or X_STAR,
                 noise=noise or NoiseModel(), seed=seed)


def _pairs(count: int, r: float):
    pos, head = [], []
    for i in range(count):
        pos += [(3 * r * i, r), (3 * r * i, -r)]
        head += [math.pi / 2, 3 * math.pi / 2]
    return pos, head


def gen_deadlock_even(n: int, r: float = 3.7, *, params: Optional[PhysicsParams] = None,
                      controller: Optional[Controller] = None,
                      noise: Optional[NoiseModel] = None, seed: int = 0) -> World:
    """Mutually blocking pairs stacked along the x axis, sensors facing +-y."""
    if n % 2 or n <= 3:
        raise ValueError(f"even deadlock needs an even n > 3, got {n}")
    pos, head = _pairs(n // 2, r)
    return _world(pos, head, r, params, controller, noise, seed)


def gen_deadlock_odd(n: int, r: float = 3.7, *, params: Optional[PhysicsParams] = None,
                     controller: Optional[Controller] = None,
                     noise: Optional[NoiseModel] = None, seed: int = 0) -> World:
    """Pairs for the first n - 3 robots followed by a mutually blocking triplet."""
    if n % 2 == 0 or n <= 3:
        raise ValueError(f"odd deadlock needs an odd n > 3, got {n}")
    pos, head = _pairs((n - 3) // 2, r)
    x = 3 * r * (n / 2 - 1)
    pos += [(x, r), (x, -r), (x + math.sqrt(3) * r, 0.0)]
    head += [math.radians(120), math.radians(240), 0.0]
    return _world(pos, head, r, params, controller, noise, seed)


def _blocked_and_blind(world: World) -> tuple[bool, bool]:
    p = world.params
    blind = not any(_kernels.sees(world.positions, world.headings, i, p.robot_radius, p.half_beta)
                    for i in range(world.n))
    v, _ = body_twist(world.controller, 0, p)
    vel = v * np.stack([np.cos(world.headings), np.sin(world.headings)], axis=1)
    each = all(_kernels.pushes_into_contact(world.positions, i, vel[i, 0], vel[i, 1], p.robot_radius)
               for i in range(world.n))
    # every robot pushes into a neighbor, and the pushes cancel out collectively
    u = np.empty_like(vel)
    active = np.zeros(world.n, dtype=bool)
    _kernels.contact_velocities(world.positions, vel, world.pinned, p.robot_radius, p.dt,
                                np.zeros((world.n, world.n)), u, active)
    blocked = each and bool(np.all(np.hypot(u[:, 0], u[:, 1]) <= 1e-9 * abs(v)))
    return blind, blocked


def gen_ring_deadlock(n: int, r: float = 3.7, *, params: Optional[PhysicsParams] = None,
                      controller: Optional[Controller] = None,
                      noise: Optional[NoiseModel] = None, seed: int = 0) -> World:
    """A closed ring of touching robots with sensors facing radially outward."""
    if n < 6:
        raise ValueError("ring deadlock needs n >= 6")
    radius = r / math.sin(math.pi / n)
    angles = 2 * math.pi * np.arange(n) / n
    pos = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    world = _world(pos, angles, r, params, controller, noise, seed)
    blind, blocked = _blocked_and_blind(world)
    if not blind:
        raise ValueError(f"ring of {n}: some robot sees another")
    if not blocked:
        raise ValueError(f"ring of {n}: some robot can still move")
    return world


def gen_symmetric_cycle(n: int, circumradius: float, r: float = 3.7, *,
                        heading_offset: float = math.pi / 2,
                        params: Optional[PhysicsParams] = None,
                        controller: Optional[Controller] = None,
                        noise: Optional[NoiseModel] = None, seed: int = 0) -> World:
    """Robots on a regular n-gon, each turned ``heading_offset`` from its radial direction."""
    if n < 2:
        raise ValueError("symmetric cycle needs n >= 2")
    if n > 1 and 2 * circumradius * math.sin(math.pi / n) < 2 * r:
        raise ValueError("circumradius too small: neighbouring robots overlap")
    angles = 2 * math.pi * np.arange(n) / n
    pos = circumradius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return _world(pos, angles + heading_offset, r, params, controller, noise, seed)


def gen_random(n: int, arena_side: float, rng: np.random.Generator, r: float = 3.7, *,
               params: Optional[PhysicsParams] = None, controller: Optional[Controller] = None,
               noise: Optional[NoiseModel] = None, seed: int = 0) -> World:
    """Uniform non-overlapping placement in a square arena by rejection sampling.

    The returned world draws its future randomness from ``rng``.
    """
    placed: list[np.ndarray] = []
    attempts = 0
    limit = 10_000 * n
    while len(placed) < n:
        if attempts >= limit:
            raise ValueError("arena too dense")
        attempts += 1
        cand = rng.uniform(0.0, arena_side, size=2)
        if all(np.hypot(*(cand - q)) >= 2 * r for q in placed):
            placed.append(cand)
    headings = rng.uniform(0.0, 2 * math.pi, size=n)
    world = _world(np.array(placed), headings, r, params, controller, noise, seed)
    world.rng = rng
    return world
