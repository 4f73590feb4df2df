"""Fused per-step steering kernel.

Tokens of one state are grouped by identical within-token path; reward and
penalty are computed once per group and scattered back to the vocabulary.
Everything static about a state is packed into one int64 ``plan`` so the
compiled call stays cheap:

    [V, G, W, R, full_range | lookup (V) | sizes (G) | pairs (G*W) | entered (G*W) | range_ids (R)]

``lookup[i]`` is -1 for masked ids, ``G`` for unmasked ids that are never
steered (eos) and the group index otherwise.

Compiled with numba when it is installed, otherwise a numpy equivalent is
used.  Both perform the same IEEE operations in the same order as
:func:`steerex.steering.apply_steering`.
"""

from __future__ import annotations

import math

import numpy as np

try:  # optional accelerator
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

USE_REWARD = 1
USE_PENALTY = 2
USE_RANGE = 4
HEADER = 5


def build_plan(vocab_size: int, lookup, sizes, pairs, entered, range_ids) -> np.ndarray:
    groups, width = pairs.shape
    full_range = int(range_ids.size == vocab_size)
    header = np.array([vocab_size, groups, width, range_ids.size, full_range], dtype=np.int64)
    return np.concatenate([header, lookup, sizes, pairs.ravel(), entered.ravel(), range_ids]).astype(np.int64)


def unpack_plan(plan: np.ndarray):
    v, g, w, r, full = (int(x) for x in plan[:HEADER])
    o = HEADER
    lookup = plan[o : o + v]
    o += v
    sizes = plan[o : o + g]
    o += g
    pairs = plan[o : o + g * w].reshape(g, w)
    o += g * w
    entered = plan[o : o + g * w].reshape(g, w)
    o += g * w
    return lookup, sizes, pairs, entered, plan[o : o + r], bool(full)


def steer_numpy(z, plan, pair_counts, state_counts, beta, gamma, flags):
    lookup, sizes, pairs, entered, range_ids, full_range = unpack_plan(plan)
    mask = np.where(lookup < 0, -math.inf, 0.0)
    base = z + mask
    if not flags & USE_REWARD or sizes.size == 0:
        return base
    scores = pair_counts[pairs].min(axis=1)
    total = int((scores * sizes).sum())
    if total == 0:
        return base
    reward = math.log1p(float(total)) / (1.0 + scores)
    if flags & USE_PENALTY:
        adjust = reward / (beta * (1.0 + state_counts[entered].max(axis=1)))
    else:
        adjust = reward / 1.0
    if flags & USE_RANGE:
        sub = z if full_range else z[range_ids]
        spread = float(sub.max() - sub.min())
    else:
        spread = 1.0
    steer = np.zeros(adjust.size + 1)
    steer[:-1] = (gamma * spread) * adjust
    # x + 0.0 == x for every value base can hold (z + mask never yields -0.0)
    # masked ids (-1) and eos (G) both read the trailing zero slot
    base += steer[lookup]
    return base


def _steer_loops(z, plan, pair_counts, state_counts, beta, gamma, flags):
    n = plan[0]
    groups = plan[1]
    width = plan[2]
    n_range = plan[3]
    full_range = plan[4] != 0
    o_lookup = 5
    o_sizes = o_lookup + n
    o_pairs = o_sizes + groups
    o_entered = o_pairs + groups * width
    o_range = o_entered + groups * width

    steer = np.zeros(groups + 1)
    scores = np.empty(groups, dtype=np.int64)
    total = 0
    active = (flags & 1) != 0 and groups > 0
    if active:
        for g in range(groups):
            row = o_pairs + g * width
            e = pair_counts[plan[row]]
            for k in range(1, width):
                c = pair_counts[plan[row + k]]
                if c < e:
                    e = c
            scores[g] = e
            total += e * plan[o_sizes + g]
        active = total != 0
    if active:
        numerator = math.log1p(float(total))
        spread = 1.0
        if flags & 4:
            lo = math.inf
            hi = -math.inf
            if full_range:
                for i in range(n):
                    v = z[i]
                    if v < lo:
                        lo = v
                    if v > hi:
                        hi = v
            else:
                for j in range(n_range):
                    v = z[plan[o_range + j]]
                    if v < lo:
                        lo = v
                    if v > hi:
                        hi = v
            spread = hi - lo
        coef = gamma * spread
        for g in range(groups):
            reward = numerator / (1.0 + scores[g])
            if flags & 2:
                row = o_entered + g * width
                m = 0
                for k in range(width):
                    c = state_counts[plan[row + k]]
                    if c > m:
                        m = c
                pen = beta * (1.0 + m)
            else:
                pen = 1.0
            steer[g] = coef * (reward / pen)
    out = np.empty(n)
    for i in range(n):
        g = plan[o_lookup + i]
        if g < 0:
            out[i] = z[i] + -math.inf
        elif active:
            out[i] = (z[i] + 0.0) + steer[g]
        else:
            out[i] = z[i] + 0.0
    return out


if njit is not None:
    steer = njit(cache=True, nogil=True)(_steer_loops)
    ACCELERATED = True
else:  # pragma: no cover
    steer = steer_numpy
    ACCELERATED = False

_warm = False


def warm_up() -> None:
    """Load or compile the kernel for writable and read-only logits.

    Called before a run starts so JIT work never lands inside step timings.
    """
    global _warm
    if _warm or not ACCELERATED:
        return
    plan = build_plan(2, np.array([0, 1]), np.array([1]), np.zeros((1, 1), dtype=np.int64),
                      np.zeros((1, 1), dtype=np.int64), np.array([0]))
    counts = np.ones(2, dtype=np.int64)
    for writeable in (True, False):
        z = np.zeros(2)
        z.setflags(write=writeable)
        steer(z, plan, counts, counts, 1.0, 1.0, 7)
    _warm = True
