"""Statevector inner loops.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy version.
The numba path is used when numba imports and ``LIGHTCONE_DISABLE_NUMBA`` is
unset (or ``0``); otherwise the numpy path is bound to the public names.
Amplitudes are little-endian: qubit ``q`` is bit ``q`` of the basis index.
Two-qubit matrices use the local index ``b_a + 2*b_b`` for qubits ``(a, b)``.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("LIGHTCONE_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


# ---------------------------------------------------------------- numpy path


def _np_apply_1q(state, n, q, u):
    psi = state.reshape(1 << (n - 1 - q), 2, 1 << q)
    psi[:] = np.einsum("ab,ibj->iaj", u, psi)


def _np_apply_2q(state, n, qa, qb, u):
    psi = state.reshape((2,) * n)
    ax_a, ax_b = n - 1 - qa, n - 1 - qb
    u4 = u.reshape(2, 2, 2, 2)  # [out_b, out_a, in_b, in_a]
    out = np.tensordot(u4, psi, axes=([2, 3], [ax_b, ax_a]))
    out = np.moveaxis(out, [0, 1], [ax_b, ax_a])
    psi[...] = out


def _np_run_gates(state, n, mats, qa, qb, arity):
    for g in range(mats.shape[0]):
        if arity[g] == 1:
            _np_apply_1q(state, n, qa[g], mats[g, :2, :2])
        else:
            _np_apply_2q(state, n, qa[g], qb[g], mats[g])


def _np_pauli_expectation(state, xmask, zmask, ny):
    idx = np.arange(state.shape[0])
    parity = np.zeros(state.shape[0], dtype=np.int64)
    z = idx & zmask
    while np.any(z):
        parity ^= z & 1
        z = z >> 1
    signs = 1.0 - 2.0 * parity
    val = np.sum(np.conj(state[idx ^ xmask]) * signs * state)
    return (val * (1j**ny)).real


def _np_z_parity_probs(probs, mask):
    idx = np.arange(probs.shape[0])
    parity = np.zeros(probs.shape[0], dtype=np.int64)
    z = idx & mask
    while np.any(z):
        parity ^= z & 1
        z = z >> 1
    return float(np.sum(probs[parity == 0]))


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _nb_apply_1q(state, n, q, u):
        stride = 1 << q
        dim = state.shape[0]
        u00, u01, u10, u11 = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
        for i in range(dim):
            if i & stride:
                continue
            j = i | stride
            a0 = state[i]
            a1 = state[j]
            state[i] = u00 * a0 + u01 * a1
            state[j] = u10 * a0 + u11 * a1

    @numba.njit(cache=True)
    def _nb_apply_2q(state, n, qa, qb, u):
        sa = 1 << qa
        sb = 1 << qb
        dim = state.shape[0]
        amp = np.empty(4, dtype=np.complex128)
        for i in range(dim):
            if (i & sa) or (i & sb):
                continue
            i1 = i | sa
            i2 = i | sb
            i3 = i | sa | sb
            amp[0] = state[i]
            amp[1] = state[i1]
            amp[2] = state[i2]
            amp[3] = state[i3]
            for r in range(4):
                acc = u[r, 0] * amp[0] + u[r, 1] * amp[1] + u[r, 2] * amp[2] + u[r, 3] * amp[3]
                if r == 0:
                    state[i] = acc
                elif r == 1:
                    state[i1] = acc
                elif r == 2:
                    state[i2] = acc
                else:
                    state[i3] = acc

    @numba.njit(cache=True)
    def _nb_run_gates(state, n, mats, qa, qb, arity):
        for g in range(mats.shape[0]):
            if arity[g] == 1:
                _nb_apply_1q(state, n, qa[g], mats[g, :2, :2])
            else:
                _nb_apply_2q(state, n, qa[g], qb[g], mats[g])

    @numba.njit(cache=True)
    def _popparity(v):
        p = 0
        while v:
            p ^= v & 1
            v >>= 1
        return p

    @numba.njit(cache=True)
    def _nb_pauli_expectation(state, xmask, zmask, ny):
        acc = 0.0 + 0.0j
        for i in range(state.shape[0]):
            s = 1.0 - 2.0 * _popparity(i & zmask)
            acc += np.conj(state[i ^ xmask]) * s * state[i]
        ph = 1.0 + 0.0j
        for _ in range(ny % 4):
            ph *= 1j
        return (acc * ph).real

    @numba.njit(cache=True)
    def _nb_z_parity_probs(probs, mask):
        acc = 0.0
        for i in range(probs.shape[0]):
            if _popparity(i & mask) == 0:
                acc += probs[i]
        return acc


if USE_NUMBA:
    apply_1q = _nb_apply_1q
    apply_2q = _nb_apply_2q
    run_gates = _nb_run_gates
    pauli_expectation = _nb_pauli_expectation
    z_parity_probs = _nb_z_parity_probs
else:
    apply_1q = _np_apply_1q
    apply_2q = _np_apply_2q
    run_gates = _np_run_gates
    pauli_expectation = _np_pauli_expectation
    z_parity_probs = _np_z_parity_probs


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
