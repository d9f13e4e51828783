"""Compiled slot loop used for long runs.

State layout (int64 array ``st``): prefix1, prefix2, decoded1, decoded2.
Counter layout (int64 array ``cnt`` of shape (2, 5)): X, Y, Z, B, delivered.
Decoded flags are boolean arrays indexed by packet number; every packet ever
sent has index <= slot + 1, so arrays of length horizon + 3 suffice.

Component kinds: 0 = threshold code with (N, M), 0 meaning unbounded
(greedy is N = M = 0); 1 = fixed priority to U1; 2 = fixed priority to U2.
"""

import numpy as np
from numba import njit

OK = 0
DRIFT = 1
CAP = 2
VIOLATION = 3

_RECEIVES1 = np.array([True, True, False, False])
_RECEIVES2 = np.array([True, False, True, False])


@njit(cache=True)
def _receive(dec, st, cnt, u, k1, k2, counting, cap):
    if k2 == 0:
        new = 0 if dec[k1] else k1
    else:
        h1 = dec[k1]
        h2 = dec[k2]
        if h1 and h2:
            new = 0
        elif h1:
            new = k2
        elif h2:
            new = k1
        else:
            return VIOLATION
    if counting:
        cnt[u, 0] += 1
    if new == 0:
        if counting:
            cnt[u, 1] += 1
        return OK
    dec[new] = True
    st[2 + u] += 1
    if new == st[u] + 1:
        start = st[u]
        p = start + 1
        while dec[p + 1]:
            p += 1
        st[u] = p
        if counting:
            cnt[u, 3] += 1
            cnt[u, 4] += p - start
    else:
        if counting:
            cnt[u, 2] += 1
        if st[2 + u] - st[u] > cap:
            return CAP
    return OK


@njit(cache=True)
def run_slots(outcomes, comp, kinds, thr_n, thr_m, dec1, dec2, st, cnt,
              t0, count_from, drift_limit, cap, record, rec_index, rec_adv):
    """Advance the system over ``len(outcomes)`` slots starting at 0-based slot ``t0``.

    Returns (status, j) where j is the number of slots fully processed.
    """
    for j in range(outcomes.shape[0]):
        t = t0 + j
        r1 = st[0] + 1
        r2 = st[1] + 1
        adv = False
        idx = 0
        if r1 > r2:
            adv = dec2[r1]
            idx = r1 - 1 - (st[3] - (1 if adv else 0))
        elif r2 > r1:
            adv = dec1[r2]
            idx = -(r2 - 1 - (st[2] - (1 if adv else 0)))
        if record and t >= count_from:
            rec_index[j] = idx
            rec_adv[j] = adv
        if drift_limit > 0 and abs(idx) > drift_limit:
            return DRIFT, j

        c = comp[j]
        kind = kinds[c]
        k1 = 0
        k2 = 0
        if kind == 1:
            if r1 > r2 and dec2[r1]:
                k1 = r1
                k2 = r2
            else:
                k1 = r1
        elif kind == 2:
            if r2 > r1 and dec1[r2]:
                k1 = r2
                k2 = r1
            else:
                k1 = r2
        else:
            rmax = max(r1, r2)
            rmin = min(r1, r2)
            if r1 == r2:
                k1 = r1
            elif adv:
                k1 = rmax
                k2 = rmin
            elif (thr_n[c] > 0 and idx >= thr_n[c]) or (thr_m[c] > 0 and idx <= -thr_m[c]):
                k1 = rmin
            else:
                k1 = rmax

        o = outcomes[j]
        counting = t >= count_from
        if _RECEIVES1[o]:
            status = _receive(dec1, st, cnt, 0, k1, k2, counting, cap)
            if status != OK:
                return status, j
        if _RECEIVES2[o]:
            status = _receive(dec2, st, cnt, 1, k1, k2, counting, cap)
            if status != OK:
                return status, j
    return OK, outcomes.shape[0]
