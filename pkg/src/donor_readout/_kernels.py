"""Compiled inner loops: fixed-step propagation and the jump-process trial."""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def propagate(step, p0, n_steps, record_every):
    n_rec = n_steps // record_every + 1
    out = np.empty((n_rec, p0.shape[0]))
    p = p0.copy()
    out[0] = p
    k = 1
    for i in range(1, n_steps + 1):
        p = step @ p
        if i % record_every == 0:
            out[k] = p
            k += 1
    return out


@njit(cache=True, nogil=True)
def jump_trial(rng, exit_rates, n_dest, cum_dest, dest, emit_prob, start, window):
    """One event-driven trajectory over ``window``.

    ``exit_rates[i]`` is the total outflow of state i; ``cum_dest[i, :n_dest[i]]``
    the cumulative branching over ``dest[i, :n_dest[i]]``; ``emit_prob[i, j]`` the chance
    that the i -> dest[i, j] jump yields a collected photon.
    Returns (collected photons, final state).
    """
    state = start
    t = 0.0
    count = 0
    while True:
        r = exit_rates[state]
        if r <= 0.0:
            break
        t += rng.exponential(1.0 / r)
        if t >= window:
            break
        j = 0
        if n_dest[state] > 1:
            u = rng.random()
            while j < n_dest[state] - 1 and u >= cum_dest[state, j]:
                j += 1
        pe = emit_prob[state, j]
        if pe > 0.0:
            if pe >= 1.0 or rng.random() < pe:
                count += 1
        state = dest[state, j]
    return count, state
