"""Jitted hot paths: stratified spatial queries and the path stepper.

Everything here takes plain ndarrays so numba can compile it once and the
wrapper objects in ``field``/``sampler`` stay thin.  All loops are written
to be deterministic for a fixed field layout: traps are visited in a fixed
order and covering traps are summed in ascending trap index, so results do
not depend on thread count or scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# walk_chunk status codes
RUNNING = 0
HIT = 1


@njit(cache=True, nogil=True)
def _gather_covering(
    x,
    centers,
    radii_sq,
    layer_cell_size,
    layer_origin,
    layer_dims,
    layer_cell_offset,
    cell_start,
    cell_items,
    hits,
    base,
):
    """Collect indices of traps whose ball contains x into hits.

    Returns the number of hits.  Each layer holds traps with radius below
    its cell size, so only the 3^d cells around x can contain covering
    centers.
    """
    d = centers.shape[1]
    nl = layer_cell_size.shape[0]
    nhit = 0
    for k in range(nl):
        cs = layer_cell_size[k]
        oob = False
        for j in range(d):
            cj = int(np.floor((x[j] - layer_origin[k, j]) / cs))
            # points further than one cell outside the grid see no traps here
            if cj < -1 or cj > layer_dims[k, j]:
                oob = True
                break
            base[j] = cj
        if oob:
            continue
        ncomb = 1
        for j in range(d):
            ncomb *= 3
        for comb in range(ncomb):
            rem = comb
            flat = 0
            valid = True
            for j in range(d):
                off = rem % 3 - 1
                rem //= 3
                cj = base[j] + off
                if cj < 0 or cj >= layer_dims[k, j]:
                    valid = False
                    break
                flat = flat * layer_dims[k, j] + cj
            if not valid:
                continue
            cell = layer_cell_offset[k] + flat
            a = cell_start[cell]
            b = cell_start[cell + 1]
            for p in range(a, b):
                idx = cell_items[p]
                dist_sq = 0.0
                for j in range(d):
                    dj = x[j] - centers[idx, j]
                    dist_sq += dj * dj
                if dist_sq <= radii_sq[idx]:
                    hits[nhit] = idx
                    nhit += 1
    return nhit


@njit(cache=True, nogil=True)
def potential_at(
    x,
    centers,
    radii_sq,
    strengths,
    layer_cell_size,
    layer_origin,
    layer_dims,
    layer_cell_offset,
    cell_start,
    cell_items,
    hits,
    base,
):
    """Sum of trap strengths covering x, accumulated in ascending trap index."""
    nhit = _gather_covering(
        x, centers, radii_sq,
        layer_cell_size, layer_origin, layer_dims, layer_cell_offset,
        cell_start, cell_items, hits, base,
    )
    # insertion sort: hit counts are small, the order fixes the summation
    for i in range(1, nhit):
        key = hits[i]
        j = i - 1
        while j >= 0 and hits[j] > key:
            hits[j + 1] = hits[j]
            j -= 1
        hits[j + 1] = key
    total = 0.0
    for i in range(nhit):
        total += strengths[hits[i]]
    return total


@njit(cache=True, nogil=True)
def potential_batch(
    xs,
    out,
    centers,
    radii_sq,
    strengths,
    layer_cell_size,
    layer_origin,
    layer_dims,
    layer_cell_offset,
    cell_start,
    cell_items,
):
    hits = np.empty(centers.shape[0] + 1, np.int64)
    base = np.empty(xs.shape[1], np.int64)
    for i in range(xs.shape[0]):
        out[i] = potential_at(
            xs[i], centers, radii_sq, strengths,
            layer_cell_size, layer_origin, layer_dims, layer_cell_offset,
            cell_start, cell_items, hits, base,
        )


@njit(cache=True, nogil=True)
def _box_dist_sq(x, lo1, hi1, half, d):
    """Squared distance from x to the block [lo1,hi1] x [-half,half]^(d-1)."""
    dist_sq = 0.0
    d0 = lo1 - x[0]
    if x[0] - hi1 > d0:
        d0 = x[0] - hi1
    if d0 > 0.0:
        dist_sq += d0 * d0
    for j in range(1, d):
        dj = abs(x[j]) - half
        if dj > 0.0:
            dist_sq += dj * dj
    return dist_sq


@njit(cache=True, nogil=True)
def walk_chunk(
    pos,
    state,
    flags,
    slab_bounds,
    slab_occ,
    normals,
    unifs,
    centers,
    radii_sq,
    strengths,
    layer_cell_size,
    layer_origin,
    layer_dims,
    layer_cell_offset,
    cell_start,
    cell_items,
    L,
    drift,
    lam,
    dt,
    tube_half,
    cbar_lo,
    cbar_hi,
    cbar_half,
    ctilde_pad,
    ball_target,
):
    """Advance one trajectory by up to len(normals) Euler steps.

    state: [t, log_fk, trans_max, x1_final]
    flags: [status, in_A, in_B]

    The killing weight accumulates (V + lam) at the spatial midpoint of each
    step.  Hyperplane hits are detected at step endpoints (with linear
    interpolation of the crossing time) and, between endpoints, by the
    Brownian-bridge crossing probability exp(-2(L-a)(L-b)/dt); bridge hits
    are placed at the middle of the step.  Ball targets use endpoint
    membership only.  Returns the number of steps consumed.
    """
    d = pos.shape[0]
    nsteps = normals.shape[0]
    sqdt = np.sqrt(dt)
    pad_sq = ctilde_pad * ctilde_pad
    new = np.empty(d)
    mid = np.empty(d)
    hits_buf = np.empty(centers.shape[0] + 1, np.int64)
    base_buf = np.empty(d, np.int64)
    nslab = slab_bounds.shape[0]

    for i in range(nsteps):
        for j in range(d):
            new[j] = pos[j] + sqdt * normals[i, j]
        new[0] += drift * dt

        hit = False
        theta = 1.0
        if ball_target:
            dist_sq = (new[0] - L) * (new[0] - L)
            for j in range(1, d):
                dist_sq += new[j] * new[j]
            if dist_sq <= 1.0:
                hit = True
        else:
            if new[0] >= L:
                hit = True
                theta = (L - pos[0]) / (new[0] - pos[0])
            else:
                p = np.exp(-2.0 * (L - pos[0]) * (L - new[0]) / dt)
                if unifs[i] < p:
                    hit = True
                    theta = 0.5

        if hit:
            for j in range(d):
                mid[j] = pos[j] + 0.5 * theta * (new[j] - pos[j])
                new[j] = pos[j] + theta * (new[j] - pos[j])
            if not ball_target:
                new[0] = L  # the bridge/interpolated hit sits on the plane
                mid[0] = 0.5 * (pos[0] + L)
            h = theta * dt
        else:
            for j in range(d):
                mid[j] = 0.5 * (pos[j] + new[j])
            h = dt

        if centers.shape[0] > 0:
            v = potential_at(
                mid, centers, radii_sq, strengths,
                layer_cell_size, layer_origin, layer_dims, layer_cell_offset,
                cell_start, cell_items, hits_buf, base_buf,
            )
        else:
            v = 0.0
        state[1] -= (v + lam) * h
        for s in range(nslab):
            if slab_bounds[s, 0] <= mid[0] < slab_bounds[s, 1]:
                slab_occ[s] += h

        # transversal extreme and tube membership at the new point
        tmax = state[2]
        for j in range(1, d):
            aj = abs(new[j])
            if aj > tmax:
                tmax = aj
            if flags[1] == 1 and aj > tube_half:
                flags[1] = 0
        state[2] = tmax
        # block avoidance checked at midpoint and endpoint
        if flags[2] == 1:
            if _box_dist_sq(mid, cbar_lo, cbar_hi, cbar_half, d) <= pad_sq:
                flags[2] = 0
            elif _box_dist_sq(new, cbar_lo, cbar_hi, cbar_half, d) <= pad_sq:
                flags[2] = 0

        if hit:
            state[0] += h
            state[3] = new[0]
            flags[0] = HIT
            for j in range(d):
                pos[j] = new[j]
            return i + 1

        state[0] += dt
        state[3] = new[0]
        for j in range(d):
            pos[j] = new[j]
    return nsteps
