"""Compiled inner loops for both simulators.

Random numbers are always drawn by the caller from a numpy Generator and
passed in, so a world's random stream does not depend on numba internals.
"""
import math

import numpy as np
from numba import njit

OVERLAP_TOL = 1e-9
# residual overlap still accepted once the sweep budget is spent
CONTACT_TOL = 1e-6
MAX_PROJECTION_ITERS = 64
MAX_VELOCITY_ITERS = 2000
# centers closer than 2r + TOUCH_GAP count as touching for the contact solve
TOUCH_GAP = 1e-6
REACH_FACTOR = 6.0

# axial unit steps, counter-clockwise from angle 0
DIR_Q = np.array([1, 0, -1, -1, 0, 1], dtype=np.int64)
DIR_R = np.array([0, 1, 1, 0, -1, -1], dtype=np.int64)


# ---------------------------------------------------------------------------
# continuous plane
# ---------------------------------------------------------------------------

@njit(cache=True)
def sees(pos, heading, i, radius, half_beta):
    """True if any other disc meets the closed cone of robot ``i``."""
    hx = math.cos(heading[i])
    hy = math.sin(heading[i])
    px = pos[i, 0]
    py = pos[i, 1]
    for j in range(pos.shape[0]):
        if j == i:
            continue
        dx = pos[j, 0] - px
        dy = pos[j, 1] - py
        dist = math.hypot(dx, dy)
        if dist <= radius:
            return True
        off_axis = abs(math.atan2(hx * dy - hy * dx, hx * dx + hy * dy))
        if off_axis <= half_beta + math.asin(radius / dist):
            return True
    return False


@njit(cache=True)
def arc_displacement(hx, hy, v, w, t):
    """Displacement after driving with body twist (v, w) for time t."""
    if abs(w) < 1e-12:
        return v * t * hx, v * t * hy
    phi = w * t
    rho = v / w
    # offset of the robot from its instantaneous center of rotation
    ax = rho * hy
    ay = -rho * hx
    s = math.sin(phi)
    cm1 = -2.0 * math.sin(0.5 * phi) ** 2
    return cm1 * ax - s * ay, s * ax + cm1 * ay


@njit(cache=True)
def pushes_into_contact(pos, i, ux, uy, radius):
    """Does velocity (ux, uy) drive robot ``i`` into a disc it touches?"""
    px = pos[i, 0]
    py = pos[i, 1]
    speed = math.hypot(ux, uy)
    for j in range(pos.shape[0]):
        if j == i:
            continue
        dx = pos[j, 0] - px
        dy = pos[j, 1] - py
        dist = math.hypot(dx, dy)
        if dist <= 2.0 * radius + TOUCH_GAP and ux * dx + uy * dy > 1e-12 * speed * dist:
            return True
    return False


@njit(cache=True)
def contact_velocities(pos, target, pinned, radius, dt, lam_prev, u, active):
    """Frictionless overdamped contact solve for one step.

    Every robot wants velocity ``target[i]``.  Pairs that are touching or
    could touch within ``dt`` get a non-penetration constraint on their
    relative normal velocity; equal-mass impulses along the center line
    enforce it.  The velocities solve a strictly convex problem, so projected
    Gauss-Seidel reaches the same answer in any pair order.  ``lam_prev`` (n x n) warm starts the impulses and receives
    the new ones.  Writes the solved velocities to ``u`` and flags robots
    with a non-zero impulse in ``active``.  Returns the number of sweeps.
    """
    n = pos.shape[0]
    m_max = n * (n - 1) // 2
    ci = np.empty(m_max, dtype=np.int64)
    cj = np.empty(m_max, dtype=np.int64)
    cnx = np.empty(m_max)
    cny = np.empty(m_max)
    bias = np.empty(m_max)
    scale = 0.0
    for i in range(n):
        s = math.hypot(target[i, 0], target[i, 1])
        if s > scale:
            scale = s
    # pushed robots can outrun their own target speed, so look a little further
    reach = 2.0 * radius + REACH_FACTOR * scale * dt + TOUCH_GAP
    m = 0
    for i in range(n):
        for j in range(i + 1, n):
            if pinned[i] and pinned[j]:
                continue
            dx = pos[j, 0] - pos[i, 0]
            dy = pos[j, 1] - pos[i, 1]
            dist = math.hypot(dx, dy)
            if dist >= reach or dist <= 0.0:
                continue
            ci[m] = i
            cj[m] = j
            cnx[m] = dx / dist
            cny[m] = dy / dist
            bias[m] = max(dist - 2.0 * radius, 0.0) / dt
            m += 1
    for i in range(n):
        active[i] = False
        if pinned[i]:
            u[i, 0] = 0.0
            u[i, 1] = 0.0
        else:
            u[i, 0] = target[i, 0]
            u[i, 1] = target[i, 1]
    if m == 0:
        lam_prev[:, :] = 0.0
        return 0
    lam = np.empty(m)
    step = np.empty(m)
    for c in range(m):
        i = ci[c]
        j = cj[c]
        w = 0.0
        if not pinned[i]:
            w += 1.0
        if not pinned[j]:
            w += 1.0
        step[c] = 1.0 / w
        lam[c] = lam_prev[i, j]
    lam_prev[:, :] = 0.0
    for c in range(m):
        _apply_impulse(u, pinned, ci[c], cj[c], cnx[c], cny[c], lam[c])
    tol = 1e-11 * max(scale, 1e-300)
    sweeps = 0
    while sweeps < MAX_VELOCITY_ITERS:
        sweeps += 1
        change = 0.0
        # symmetric Gauss-Seidel: forward then backward over the pairs
        for t in range(2 * m):
            c = t if t < m else 2 * m - 1 - t
            i = ci[c]
            j = cj[c]
            rel = (u[j, 0] - u[i, 0]) * cnx[c] + (u[j, 1] - u[i, 1]) * cny[c] + bias[c]
            new = max(0.0, lam[c] - rel * step[c])
            d = new - lam[c]
            if d != 0.0:
                _apply_impulse(u, pinned, i, j, cnx[c], cny[c], d)
                lam[c] = new
                if abs(d) > change:
                    change = abs(d)
        if change <= tol:
            break
    for c in range(m):
        if lam[c] > 0.0:
            i = ci[c]
            j = cj[c]
            lam_prev[i, j] = lam[c]
            active[i] = active[i] or not pinned[i]
            active[j] = active[j] or not pinned[j]
    return sweeps


@njit(cache=True)
def _apply_impulse(du, pinned, i, j, nx, ny, amount):
    # push i against the normal and j along it
    if not pinned[i]:
        du[i, 0] -= amount * nx
        du[i, 1] -= amount * ny
    if not pinned[j]:
        du[j, 0] += amount * nx
        du[j, 1] += amount * ny


@njit(cache=True)
def project_contacts(current, proposed, radius, pinned):
    """Symmetric iterative projection of ``proposed`` onto non-overlap.

    Returns (positions, converged).  Pinned robots never move; their partner
    absorbs the whole overlap.  Sweeps stop once the worst overlap is below
    OVERLAP_TOL; after the sweep budget a residual below CONTACT_TOL is still
    accepted.  Otherwise ``current`` is returned with converged False.
    """
    n = proposed.shape[0]
    out = proposed.copy()
    corr = np.zeros_like(out)
    contact = 2.0 * radius
    for _ in range(MAX_PROJECTION_ITERS + 1):
        worst = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                dx = out[j, 0] - out[i, 0]
                dy = out[j, 1] - out[i, 1]
                dist = math.hypot(dx, dy)
                if contact - dist > worst:
                    worst = contact - dist
        if worst < OVERLAP_TOL:
            return out, True
        if _ == MAX_PROJECTION_ITERS:
            if worst < CONTACT_TOL:
                return out, True
            break
        corr[:, :] = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                dx = out[j, 0] - out[i, 0]
                dy = out[j, 1] - out[i, 1]
                dist = math.hypot(dx, dy)
                overlap = contact - dist
                if overlap <= 0.0:
                    continue
                if pinned[i] and pinned[j]:
                    continue
                if dist > 1e-12:
                    ux = dx / dist
                    uy = dy / dist
                else:
                    cx = current[j, 0] - current[i, 0]
                    cy = current[j, 1] - current[i, 1]
                    cd = math.hypot(cx, cy)
                    if cd > 1e-12:
                        ux = cx / cd
                        uy = cy / cd
                    else:
                        ux = 1.0
                        uy = 0.0
                if pinned[i]:
                    si = 0.0
                    sj = overlap
                elif pinned[j]:
                    si = overlap
                    sj = 0.0
                else:
                    si = 0.5 * overlap
                    sj = 0.5 * overlap
                corr[i, 0] -= si * ux
                corr[i, 1] -= si * uy
                corr[j, 0] += sj * ux
                corr[j, 1] += sj * uy
        out += corr
    return current.copy(), False


@njit(cache=True)
def advance_continuous(pos, heading, pinned, ctrl, radius, axle, vmax, dt,
                       half_beta, p_err, m_star, mu, rand, sensed, progress, impulses):
    """Advance the world ``rand.shape[0]`` steps in place.

    ``rand[s, i]`` holds three uniforms for robot ``i`` at step ``s``:
    sensor flip, noise direction, noise magnitude.  ``sensed`` receives the
    (post-flip) sensor bits of the last step and ``progress`` the fraction
    of each robot's commanded motion achieved.  ``impulses`` carries contact
    impulses between steps.  Returns the number of steps whose contact
    projection failed to converge; in those steps the robots caught in an
    unresolved overlap keep their previous pose.
    """
    n = pos.shape[0]
    drive_v = np.empty((n, 2))
    drive_w = np.empty(n)
    noise = np.zeros((n, 2))
    target = np.empty((n, 2))
    u = np.empty((n, 2))
    active = np.zeros(n, dtype=np.bool_)
    proposed = np.empty_like(pos)
    new_heading = np.empty_like(heading)
    overflows = 0
    two_pi = 2.0 * math.pi
    for s in range(rand.shape[0]):
        for i in range(n):
            if pinned[i]:
                sensed[i] = False
                continue
            bit = sees(pos, heading, i, radius, half_beta)
            if rand[s, i, 0] < p_err:
                bit = not bit
            sensed[i] = bit
        for i in range(n):
            drive_v[i, 0] = 0.0
            drive_v[i, 1] = 0.0
            drive_w[i] = 0.0
            noise[i, 0] = 0.0
            noise[i, 1] = 0.0
            if pinned[i]:
                target[i, 0] = 0.0
                target[i, 1] = 0.0
                continue
            if sensed[i]:
                vl = ctrl[2]
                vr = ctrl[3]
            else:
                vl = ctrl[0]
                vr = ctrl[1]
            v = vmax * (vl + vr) / 2.0
            drive_w[i] = vmax * (vr - vl) / axle
            drive_v[i, 0] = v * math.cos(heading[i])
            drive_v[i, 1] = v * math.sin(heading[i])
            if m_star > 0.0:
                ang = two_pi * rand[s, i, 1]
                speed = m_star * rand[s, i, 2] / mu
                noise[i, 0] = speed * math.cos(ang)
                noise[i, 1] = speed * math.sin(ang)
            target[i, 0] = drive_v[i, 0] + noise[i, 0]
            target[i, 1] = drive_v[i, 1] + noise[i, 1]
        contact_velocities(pos, target, pinned, radius, dt, impulses, u, active)
        for i in range(n):
            proposed[i, 0] = pos[i, 0]
            proposed[i, 1] = pos[i, 1]
            new_heading[i] = heading[i]
            progress[i] = 0.0
            if pinned[i]:
                continue
            w = drive_w[i]
            if not active[i]:
                # unobstructed: exact arc plus the noise drift
                v = drive_v[i, 0] * math.cos(heading[i]) + drive_v[i, 1] * math.sin(heading[i])
                dx, dy = arc_displacement(math.cos(heading[i]), math.sin(heading[i]), v, w, dt)
                proposed[i, 0] += dx + noise[i, 0] * dt
                proposed[i, 1] += dy + noise[i, 1] * dt
                progress[i] = 1.0
            else:
                ux = u[i, 0]
                uy = u[i, 1]
                want = math.hypot(target[i, 0], target[i, 1])
                if math.hypot(ux, uy) <= 1e-9 * want:
                    ux = 0.0
                    uy = 0.0
                proposed[i, 0] += ux * dt
                proposed[i, 1] += uy * dt
                sq = drive_v[i, 0] ** 2 + drive_v[i, 1] ** 2
                if sq > 0.0:
                    f = (ux * drive_v[i, 0] + uy * drive_v[i, 1]) / sq
                    progress[i] = min(1.0, max(0.0, f))
                else:
                    progress[i] = 1.0
            new_heading[i] = (heading[i] + w * dt * progress[i]) % two_pi
        resolved, ok = project_contacts(pos, proposed, radius, pinned)
        if not ok:
            overflows += 1
            resolved = proposed
            _revert_overlapping(pos, heading, resolved, new_heading, radius)
        pos[:, :] = resolved
        heading[:] = new_heading
    return overflows


@njit(cache=True)
def _revert_overlapping(pos, heading, proposed, new_heading, radius):
    # send robots caught in an unresolved overlap back to their last pose;
    # terminates because the last poses are overlap-free
    n = pos.shape[0]
    limit = 2.0 * radius - CONTACT_TOL
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in range(i + 1, n):
                dx = proposed[j, 0] - proposed[i, 0]
                dy = proposed[j, 1] - proposed[i, 1]
                if math.hypot(dx, dy) >= limit:
                    continue
                for k in (i, j):
                    if proposed[k, 0] != pos[k, 0] or proposed[k, 1] != pos[k, 1]:
                        proposed[k, 0] = pos[k, 0]
                        proposed[k, 1] = pos[k, 1]
                        new_heading[k] = heading[k]
                        changed = True


# ---------------------------------------------------------------------------
# triangular lattice
# ---------------------------------------------------------------------------

@njit(cache=True)
def in_sector(k, dq, dr):
    """Is axial offset (dq, dr) inside sector k, i.e. bearing in (60k, 60k+60]?"""
    aq = DIR_Q[k]
    ar = DIR_R[k]
    bq = DIR_Q[(k + 1) % 6]
    br = DIR_R[(k + 1) % 6]
    return aq * dr - ar * dq > 0 and dq * br - dr * bq >= 0


@njit(cache=True)
def lattice_sees(q, r, k, i):
    for j in range(q.shape[0]):
        if j != i and in_sector(k[i], q[j] - q[i], r[j] - r[i]):
            return True
    return False


@njit(cache=True)
def lattice_activate(q, r, k, d, i, flip, d_star):
    """Apply the movement rules to robot ``i``; returns an outcome code.

    0 orbit step, 1 rotate in place (robot seen), 2 blocked, 3 perturbed.
    """
    bit = lattice_sees(q, r, k, i)
    if flip:
        bit = not bit
    if bit:
        k[i] = (k[i] + 5) % 6
        d[i] = 0
        return 1
    back = (k[i] + 3) % 6
    uq = q[i] + DIR_Q[back]
    ur = r[i] + DIR_R[back]
    for j in range(q.shape[0]):
        if q[j] == uq and r[j] == ur:
            if d_star > 0:
                d[i] += 1
                if d[i] >= d_star:
                    d[i] = 0
                    k[i] = (k[i] + 5) % 6
                    return 3
            return 2
    q[i] = uq
    r[i] = ur
    k[i] = (k[i] + 5) % 6
    d[i] = 0
    return 0


@njit(cache=True)
def lattice_run(q, r, k, d, covered, choices, uniforms, start, p_err, d_star):
    """Activate robots from the pre-drawn stream until a round completes.

    Returns (next stream index, round_completed).  ``covered`` tracks which
    robots have been activated since the last round boundary.
    """
    n = q.shape[0]
    remaining = 0
    for j in range(n):
        if not covered[j]:
            remaining += 1
    idx = start
    while idx < choices.shape[0]:
        i = choices[idx]
        lattice_activate(q, r, k, d, i, uniforms[idx] < p_err, d_star)
        idx += 1
        if not covered[i]:
            covered[i] = True
            remaining -= 1
            if remaining == 0:
                covered[:] = False
                return idx, True
    return idx, False
