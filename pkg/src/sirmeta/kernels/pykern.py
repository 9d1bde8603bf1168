"""Pure-NumPy implementations of the hot kernels.

Reference semantics for the compiled twins in `_ckern`; selected at import
time when the extension is unavailable or explicitly disabled.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

# terms with magnitude below exp(-45) ~ 3e-20 cannot move a float64 sum
DAMP_CUTOFF = 45.0


def transform_sums(Lre, Lim, wts, ray, omegas):
    """Damped phase-mixture sums of the contour representation.

    For each frequency w in `omegas` returns

        sum_n ray[n] * (1 - sum_i wts[i] * exp(1j * w * L[n, i]))

    where L = Lre + 1j*Lim has Lim >= 0 (decay along the integration ray).
    """
    nom = len(omegas)
    out = np.empty(nom, dtype=np.complex128)
    L = Lre + 1j * Lim
    for io in range(nom):
        om = omegas[io]
        damped = om * Lim > DAMP_CUTOFF
        E = np.exp((1j * om) * L)
        if damped.any():
            E = np.where(damped, 0.0, E)
        out[io] = np.sum(ray * (1.0 - E @ wts))
    return out


def slot_chunk(
    v,
    buf,
    active,
    indptr,
    indices,
    data,
    arrivals,
    su,
    success_out,
    count,
    attempts,
    successes,
    active_slots,
):
    """Advance the queue-coupled network by a chunk of slots, in place.

    Per slot t: (i) every transmitter with a nonempty buffer attempts a
    departure; success is a Bernoulli draw with probability exp(-v), where v
    accumulates ln(1 + theta * gain-ratio) over the currently active set;
    (ii) Bernoulli arrivals join the buffers; (iii) transmitters whose
    buffers crossed zero toggle their interference columns in or out of v.

    `count[t]` selects the slots whose attempts/successes are tallied into
    the per-link counters; the success mask is recorded for every slot (the
    delay bookkeeping needs the full delivery history).
    """
    csc = sp.csc_matrix(
        (data, indices, indptr), shape=(len(v), len(v)), copy=False
    )
    nslots = arrivals.shape[0]
    active_b = active.view(bool)
    for t in range(nslots):
        ia = np.flatnonzero(active_b)
        if len(ia):
            p = np.exp(-v[ia])
            s = su[t, ia] < p
            success_out[t, ia] = s
            if count[t]:
                attempts[ia] += 1
                active_slots[ia] += 1
                successes[ia[s]] += 1
            buf[ia[s]] -= 1
        buf += arrivals[t]
        new_active = buf > 0
        on = np.flatnonzero(new_active & ~active_b)
        off = np.flatnonzero(active_b & ~new_active)
        if len(on):
            v += np.asarray(csc[:, on].sum(axis=1)).ravel()
        if len(off):
            v -= np.asarray(csc[:, off].sum(axis=1)).ravel()
        active_b[:] = new_active
