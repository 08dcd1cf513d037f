"""Cone-of-sight speedup: closed forms for one revolution and a geometric oracle.

Frame convention for the closed forms: the moving robot's center of rotation
sits at the origin, the robot itself at (0, -R) with its cone axis along +x,
at the instant it first sees the static robot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .continuous import (X_STAR, NoiseModel, PhysicsParams, World,
                         advance, body_twist, orbit_radius)
from .geometry import TOUCH_FRACTION

_SIN_GUARD = 1e-12
SQRT3 = math.sqrt(3.0)


def _half_alpha_sin(alpha: float) -> float:
    s = math.sin(alpha / 2.0)
    if abs(s) < _SIN_GUARD:
        raise ValueError("alpha too close to 0: sin(alpha/2) is singular")
    return s


def p_j_position(alpha: float, gamma: float, R: float, r_j: float) -> np.ndarray:
    """Static robot's position given its visibility arc and axis-to-tangent angle."""
    if not 0.0 < alpha < math.pi:
        raise ValueError("alpha must lie in (0, pi)")
    if not 0.0 <= gamma < math.pi / 2:
        raise ValueError("gamma must lie in [0, pi/2)")
    s = _half_alpha_sin(alpha)
    k = r_j / s
    return np.array([k * math.cos(alpha / 2 + gamma), -(R + k * math.sin(alpha / 2 + gamma))])


def c_prime(alpha: float, gamma: float, R: float) -> np.ndarray:
    """Center of rotation after spinning through alpha + 2*gamma in place."""
    a = alpha + 2.0 * gamma
    return np.array([R * math.sin(a), R * (math.cos(a) - 1.0)])


def d_prime(d: float, alpha: float, gamma: float, R: float, r_j: float) -> float:
    """Distance from the static robot to the shifted center of rotation."""
    s = _half_alpha_sin(alpha)
    radicand = d * d - 4.0 * R * r_j * math.sin(alpha / 2 + gamma) / s
    if radicand < 0:
        raise ValueError("robots aggregate within this revolution")
    return math.sqrt(radicand)


def gamma_linear_lb(beta: float) -> float:
    return (1.0 - 1.0 / SQRT3) * beta / 2.0


def gamma_exact_lb(beta: float, r_i: float = 1.0) -> float:
    """Smallest axis-to-tangent angle at first sight with a front-mounted apex.

    ``r_i`` cancels out of the bound; it is accepted so callers can pass the
    geometry they checked it against.
    """
    if not 0.0 < beta < math.pi:
        raise ValueError("beta must lie in (0, pi)")
    if r_i <= 0:
        raise ValueError("r_i must be positive")
    return beta / 2.0 - math.asin(math.sin(beta / 2.0) / SQRT3)


def rotation_bound_exact(d0: float, R: float, r_i: float, r_j: float, beta: float) -> float:
    """The bound before the ceiling is taken."""
    if R <= 0 or r_i <= 0 or r_j <= 0:
        raise ValueError("R, r_i and r_j must be positive")
    if r_i != r_j:
        raise ValueError("the bound assumes equal robot radii")
    if r_i >= R:
        raise ValueError("robot radius must be smaller than the orbit radius")
    if not 0.0 < beta < math.pi:
        raise ValueError("beta must lie in (0, pi)")
    gap = d0 - R - r_i - r_j
    slack = 1e-12 * max(abs(d0), 1.0)
    if gap < -slack:
        raise ValueError("d0 must be at least R + r_i + r_j")
    if gap <= slack:
        gap = 0.0
    return gap * (R + 2 * r_i) / (2 * SQRT3 * R * r_i * math.sin(gamma_linear_lb(beta)))


def rotation_bound(d0: float, R: float, r_i: float, r_j: float, beta: float) -> int:
    return int(math.ceil(rotation_bound_exact(d0, R, r_i, r_j, beta)))


# ---------------------------------------------------------------------------
# geometric oracle
# ---------------------------------------------------------------------------

def _cone_sees(apex, axis, target, r_j, half_beta) -> bool:
    dx, dy = target[0] - apex[0], target[1] - apex[1]
    dist = math.hypot(dx, dy)
    if dist <= r_j:
        return True
    off = abs(math.atan2(axis[0] * dy - axis[1] * dx, axis[0] * dx + axis[1] * dy))
    return off <= half_beta + math.asin(r_j / dist)


def _pose_at(phi: float, R: float):
    # clockwise orbit about the origin: heading is the position angle + 90 deg
    pos = (R * math.cos(phi), R * math.sin(phi))
    axis = (-math.sin(phi), math.cos(phi))
    return pos, axis


def solve_alpha_gamma(d: float, R: float, r_i: float, r_j: float, beta: float,
                      apex_offset: float = 0.0, tol: float = 1e-10) -> tuple[float, float]:
    """Visibility arc and axis-to-tangent angle at the moment of first sight.

    The mover orbits clockwise around the origin with the static robot at
    (d, 0).  The first-sight orbit angle is bracketed on a fine grid and then
    bisected.  ``apex_offset`` moves the cone apex forward along the axis.
    """
    if d <= R + r_j:
        raise ValueError("static robot must lie outside the contact orbit (d > R + r_j)")
    if not 0.0 <= beta < math.pi:
        raise ValueError("beta must lie in [0, pi)")
    target = (d, 0.0)
    half = beta / 2.0

    def seen(phi):
        pos, axis = _pose_at(phi, R)
        apex = (pos[0] + apex_offset * axis[0], pos[1] + apex_offset * axis[1])
        return _cone_sees(apex, axis, target, r_j, half)

    n_grid = 1 << 15
    phis = -np.arange(n_grid + 1) * (2 * math.pi / n_grid)
    ax, ay = -np.sin(phis), np.cos(phis)
    dx = d - (R * np.cos(phis) + apex_offset * ax)
    dy = -(R * np.sin(phis) + apex_offset * ay)
    dist = np.hypot(dx, dy)
    off = np.abs(np.arctan2(ax * dy - ay * dx, ax * dx + ay * dy))
    with np.errstate(invalid="ignore"):
        flags = (dist <= r_j) | (off <= half + np.arcsin(np.minimum(1.0, r_j / dist)))
    rising = np.flatnonzero(~flags[:-1] & flags[1:])
    if rising.size == 0:
        raise ValueError("static robot is never visible from the orbit")
    lo, hi = phis[rising[0]], phis[rising[0] + 1]
    # lo unseen, hi seen; phi decreases along the orbit
    while lo - hi > tol:
        mid = 0.5 * (lo + hi)
        if seen(mid):
            hi = mid
        else:
            lo = mid
    pos, axis = _pose_at(hi, R)
    dx, dy = target[0] - pos[0], target[1] - pos[1]
    dist = math.hypot(dx, dy)
    bearing = math.atan2(axis[0] * dy - axis[1] * dx, axis[0] * dx + axis[1] * dy)
    alpha = 2.0 * math.asin(min(1.0, r_j / dist))
    gamma = abs(bearing) - alpha / 2.0
    if -1e-8 < gamma < 0.0:  # bisection residue at beta = 0
        gamma = 0.0
    return alpha, gamma


# ---------------------------------------------------------------------------
# simulation check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCheck:
    beta: float
    d0: float
    measured_m: int
    bound_m: int
    passed: bool
    distances: tuple[float, ...] = ()


def two_robot_world(d0: float, params: PhysicsParams) -> World:
    """Mover on its orbit with center at the origin, static robot at (d0, 0)."""
    R = orbit_radius(X_STAR, params)
    return World(positions=[[R, 0.0], [d0, 0.0]], headings=[math.pi / 2, 0.0],
                 params=params, noise=NoiseModel(), controller=X_STAR,
                 pinned=np.array([False, True]))


def _with_beta(params: Optional[PhysicsParams], beta: float) -> PhysicsParams:
    base = params or PhysicsParams()
    return PhysicsParams(robot_radius=base.robot_radius, axle_length=base.axle_length,
                         max_wheel_speed=base.max_wheel_speed, dt=base.dt, beta=beta,
                         damping=base.damping)


def _sight_losses(world: World, touch: float, max_steps: int):
    """Yield the static robot's distance to the mover's center at each loss of sight.

    Stops when the robots touch or the step budget runs out; the generator's
    return value says whether they touched.
    """
    was_seeing = False
    for _ in range(max_steps):
        if world.min_pair_distance() <= touch:
            return True
        advance(world, 1)
        seeing = bool(world.last_sensed[0])
        if was_seeing and not seeing:
            c = world.centers_of_rotation()[0]
            yield float(np.hypot(*(world.positions[1] - c)))
        was_seeing = seeing
    return world.min_pair_distance() <= touch


def _revolution_steps(params: PhysicsParams) -> float:
    _, w0 = body_twist(X_STAR, 0, params)
    _, w1 = body_twist(X_STAR, 1, params)
    return (2 * math.pi / abs(w0) + 2 * math.pi / abs(w1)) / params.dt


def simulate_one_revolution(d: float, beta: float, params: Optional[PhysicsParams] = None) -> float:
    """Simulated distance from the static robot to the mover's center after one revolution."""
    params = _with_beta(params, beta)
    touch = (2.0 + TOUCH_FRACTION) * params.robot_radius
    events = _sight_losses(two_robot_world(d, params), touch, int(2 * _revolution_steps(params)))
    for dist in events:
        return dist
    raise ValueError("robots touched before the first revolution ended")


def verify_bound_by_simulation(d0: float, beta: float,
                               params: Optional[PhysicsParams] = None) -> BoundCheck:
    """Count sight episodes of a mover around a static robot until they touch.

    Every loss of sight ends one revolution of the distance recurrence; the
    distance from the static robot to the mover's center is recorded there.
    The run is capped at 2*bound + 2 revolutions.
    """
    params = _with_beta(params, beta)
    r = params.robot_radius
    touch = (2.0 + TOUCH_FRACTION) * r
    R = orbit_radius(X_STAR, params)
    bound = rotation_bound(d0, R, r, r, beta)
    world = two_robot_world(d0, params)
    max_steps = int((2 * bound + 2) * _revolution_steps(params))

    distances = []
    events = _sight_losses(world, touch, max_steps)
    while True:
        try:
            distances.append(next(events))
        except StopIteration as stop:
            touched = bool(stop.value)
            break
    measured = len(distances)
    passed = touched and measured <= bound
    return BoundCheck(beta, d0, measured, bound, passed, tuple(distances))
