"""Compiled inner loops: counter-based per-site random draws, the
event-driven trajectory loop, and the Gauss-Seidel score sweep.

Every draw is a pure function of (master seed, site, stream, arrival index),
so per-site streams need no stored generator state beyond a cursor.
"""
import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_FOUR = np.uint64(4)
_INV53 = 1.0 / 9007199254740992.0

# stream ids within a site
CLOCK, TYPE, ORDER = 0, 1, 2

MIXER_ID = "splitmix64-counter-v1"


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def site_key(seed, site):
    return mix64(seed + GOLDEN * (np.uint64(site) + _ONE))


@njit(cache=True)
def draw_u64(key, stream, k):
    c = np.uint64(k) * _FOUR + np.uint64(stream) + _ONE
    return mix64(mix64(key + c * GOLDEN))


@njit(cache=True)
def uniform(key, stream, k):
    return np.float64(draw_u64(key, stream, k) >> _S11) * _INV53


@njit(cache=True)
def gap(key, k):
    """Inter-arrival time preceding arrival ``k`` (rate-1 exponential)."""
    return -np.log1p(-uniform(key, CLOCK, k))


@njit(cache=True)
def categorical(u, cum):
    j = 0
    last = cum.shape[0] - 1
    while j < last and u >= cum[j]:
        j += 1
    return j


@njit(cache=True)
def arrival_type(key, site, k, cum, infinite):
    """Gas of arrival ``k``; in the infinite variant non-1 arrivals get the
    identifier ``2 + site * 2**32 + k``, unique within a run."""
    u = uniform(key, TYPE, k)
    if infinite:
        if u < cum[0]:
            return 1
        return 2 + (site << 32) + k
    return categorical(u, cum) + 1


@njit(cache=True)
def left_first(key, k):
    return uniform(key, ORDER, k) < 0.5


@njit(cache=True)
def _sift_down(ht, hs, pos, size):
    while True:
        c = 2 * pos + 1
        if c >= size:
            return
        if c + 1 < size and ht[c + 1] < ht[c]:
            c += 1
        if ht[c] < ht[pos]:
            ht[c], ht[pos] = ht[pos], ht[c]
            hs[c], hs[pos] = hs[pos], hs[c]
            pos = c
        else:
            return


@njit(cache=True)
def _grow(a, n):
    b = np.empty(max(16, 2 * n), a.dtype)
    b[:n] = a[:n]
    return b


@njit(cache=True)
def run_loop(sites, torus, seed, cum, infinite, max_time, max_events,
             stop_on_absorption, log_every):
    """Advance ``sites`` in place until a stop condition holds.

    Returns (time, events, absorbed gas or 0, status, digest, log arrays).
    status: 0 absorbed, 1 max_time, 2 max_events.
    """
    N = sites.shape[0]
    keys = np.empty(N, np.uint64)
    cursor = np.zeros(N, np.int64)
    ht = np.empty(N, np.float64)
    hs = np.empty(N, np.int64)
    for i in range(N):
        keys[i] = site_key(seed, i)
        ht[i] = gap(keys[i], 0)
        hs[i] = i
    for p in range(N // 2 - 1, -1, -1):
        _sift_down(ht, hs, p, N)

    ones = 0
    occupied = 0
    ngas = cum.shape[0]
    counts = np.zeros(ngas + 1, np.int64)
    for i in range(N):
        s = sites[i]
        if s != 0:
            occupied += 1
        if s == 1:
            ones += 1
        if not infinite:
            counts[s] += 1

    absorbed = 0
    if occupied == N:
        first = sites[0]
        same = True
        for i in range(N):
            if sites[i] != first:
                same = False
                break
        if same:
            absorbed = first

    cap = 1024 if log_every > 0 else 0
    lt = np.empty(cap, np.float64)
    ls = np.empty(cap, np.int64)
    lg = np.empty(cap, np.int64)
    lk = np.empty(cap, np.int64)
    lv = np.empty(cap, np.int64)
    nlog = 0

    digest = mix64(seed ^ np.uint64(0x5EED5EED5EED5EED))
    t = 0.0
    events = 0
    status = 0
    while True:
        if absorbed != 0 and stop_on_absorption:
            status = 0
            break
        if events >= max_events:
            status = 2
            break
        tn = ht[0]
        if tn > max_time:
            t = max_time
            status = 1
            break
        t = tn
        i = hs[0]
        key = keys[i]
        k = cursor[i]
        gas = arrival_type(key, i, k, cum, infinite)
        lf = left_first(key, k)

        kind = 0
        victim = -1
        if sites[i] == 0:
            if torus:
                lft = (i - 1) % N if N > 1 else -1
                rgt = (i + 1) % N if N > 1 else -1
            else:
                lft = i - 1
                rgt = i + 1 if i + 1 < N else -1
            a = lft if lf else rgt
            b = rgt if lf else lft
            if a >= 0 and sites[a] != 0 and sites[a] != gas:
                victim = a
            elif b >= 0 and sites[b] != 0 and sites[b] != gas:
                victim = b
            if victim >= 0:
                kind = 2
                old = sites[victim]
                sites[victim] = 0
                occupied -= 1
                if old == 1:
                    ones -= 1
                if not infinite:
                    counts[old] -= 1
                    counts[0] += 1
            else:
                kind = 1
                sites[i] = gas
                occupied += 1
                if gas == 1:
                    ones += 1
                if infinite:
                    if ones == N:
                        absorbed = 1
                    elif N == 1:
                        absorbed = gas
                else:
                    counts[0] -= 1
                    counts[gas] += 1
                    if counts[gas] == N:
                        absorbed = gas

        digest = mix64(digest ^ (np.uint64(i) * GOLDEN + np.uint64(k)))
        digest = mix64(digest ^ np.uint64((gas << 3) + (kind << 1) + (1 if lf else 0)))
        digest = mix64(digest ^ np.uint64(victim + 1))

        if log_every > 0 and events % log_every == 0:
            if nlog == lt.shape[0]:
                lt = _grow(lt, nlog)
                ls = _grow(ls, nlog)
                lg = _grow(lg, nlog)
                lk = _grow(lk, nlog)
                lv = _grow(lv, nlog)
            lt[nlog] = t
            ls[nlog] = i
            lg[nlog] = gas
            lk[nlog] = kind
            lv[nlog] = victim
            nlog += 1

        events += 1
        cursor[i] = k + 1
        ht[0] = t + gap(key, k + 1)
        _sift_down(ht, hs, 0, N)

    return t, events, absorbed, status, digest, lt[:nlog], ls[:nlog], lg[:nlog], lk[:nlog], lv[:nlog]


@njit(cache=True)
def gs_sweep(scores, ref, damping, row_site_ptr, site_block_ptr,
             const, col_ptr, cols, vals, own_coef, termwise):
    """One in-place sweep solving each non-reference block's worst-case
    drift for its own score.

    Layout: block b owns sites ``site_block_ptr[b]:site_block_ptr[b+1]``;
    site s owns rows ``row_site_ptr[s]:row_site_ptr[s+1]``; row r has
    constant ``const[r]``, own-score coefficient ``own_coef[r]`` and
    off-block coefficients ``vals[col_ptr[r]:col_ptr[r+1]]``.  In joint
    mode every block has a single site whose rows are whole scenarios.
    Returns the largest absolute score change.
    """
    nb = site_block_ptr.shape[0] - 1
    nrows = const.shape[0]
    rest = np.empty(nrows, np.float64)
    worst = 0.0
    for blk in range(nb):
        if blk == ref:
            continue
        s0 = site_block_ptr[blk]
        s1 = site_block_ptr[blk + 1]
        r0 = row_site_ptr[s0]
        r1 = row_site_ptr[s1]
        for r in range(r0, r1):
            acc = const[r]
            for j in range(col_ptr[r], col_ptr[r + 1]):
                acc += vals[j] * scores[cols[j]]
            rest[r] = acc
        old = scores[blk]
        if not termwise:
            # min over scenarios of decreasing affine maps: root is the min root
            x = np.inf
            for r in range(r0, r1):
                root = -rest[r] / own_coef[r]
                if root < x:
                    x = root
        else:
            # concave decreasing piecewise-linear: Newton from any start is finite
            x = old
            for _ in range(200):
                f = 0.0
                slope = 0.0
                for s in range(s0, s1):
                    best = np.inf
                    bslope = 0.0
                    for r in range(row_site_ptr[s], row_site_ptr[s + 1]):
                        v = rest[r] + own_coef[r] * x
                        if v < best or (v == best and own_coef[r] < bslope):
                            best = v
                            bslope = own_coef[r]
                    f += best
                    slope += bslope
                if slope >= 0.0:
                    x = np.nan
                    break
                xn = x - f / slope
                if abs(xn - x) <= 1e-15 * (1.0 + abs(x)):
                    x = xn
                    break
                x = xn
        new = old + damping * (x - old)
        d = abs(new - old)
        if d > worst or np.isnan(d):
            worst = d if not np.isnan(d) else np.inf
        scores[blk] = new
    return worst
