"""Hot inner loops, compiled with numba when available.

Every kernel exists twice: a ``*_numba`` version built with ``@njit`` and a
vectorized ``*_numpy`` version.  The public names (``conjugate_batch`` etc.)
point at the numba versions unless numba is missing or the environment
variable ``RCL_DISABLE_NUMBA`` is set to a truthy value before import.

All kernels are pure: inputs are never mutated and outputs are freshly
allocated, so results do not depend on the selected backend beyond
floating-point summation order.
"""
import os

import numpy as np

try:
    import numba
    from numba import njit, prange
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def decorator(func):
            return func
        return decorator

    prange = range


def _env_disabled():
    return os.environ.get("RCL_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = numba is not None and not _env_disabled()

if numba is not None and "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is too old for numba; avoid the probe warning
    numba.config.THREADING_LAYER = "workqueue"


def set_threads(n):
    """Set the numba worker count; a no-op on the numpy path."""
    if numba is not None and n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


if os.environ.get("RCL_THREADS"):
    set_threads(os.environ["RCL_THREADS"])


# ---------------------------------------------------------------------------
# numba kernels

_BLOCK = 256


@njit(cache=True, inline="always")
def _conj_into(u, x, s, out, tmp):
    # out = s * u @ x @ u^H for small dense matrices; tmp is scratch space
    n = x.shape[0]
    for i in range(n):
        for j in range(n):
            acc = 0j
            for l in range(n):
                acc += u[i, l] * x[l, j]
            tmp[i, j] = acc
    for i in range(n):
        for j in range(n):
            acc = 0j
            for l in range(n):
                acc += tmp[i, l] * np.conj(u[j, l])
            out[i, j] = s * acc


@njit(cache=True, parallel=True)
def conjugate_batch_numba(states, unitaries, scales):
    m = states.shape[0]
    k = unitaries.shape[0]
    n = states.shape[1]
    out = np.empty((m * k, n, n), dtype=np.complex128)
    # blocks of states share one scratch matrix instead of allocating per call
    nblk = (m + _BLOCK - 1) // _BLOCK
    for b in prange(nblk):
        tmp = np.empty((n, n), dtype=np.complex128)
        for a in range(b * _BLOCK, min(m, (b + 1) * _BLOCK)):
            for i in range(k):
                _conj_into(unitaries[i], states[a], scales[i], out[a * k + i], tmp)
    return out


@njit(cache=True)
def left_multiply_batch_numba(mats, unitaries):
    m = mats.shape[0]
    k = unitaries.shape[0]
    n = mats.shape[1]
    out = np.zeros((m * k, n, n), dtype=np.complex128)
    for a in range(m):
        for i in range(k):
            for r in range(n):
                for c in range(n):
                    acc = 0j
                    for l in range(n):
                        acc += unitaries[i, r, l] * mats[a, l, c]
                    out[a * k + i, r, c] = acc
    return out


@njit(cache=True, parallel=True)
def apply_words_numba(rho, unitaries, scales, words):
    nsamp, length = words.shape
    n = rho.shape[0]
    out = np.empty((nsamp, n, n), dtype=np.complex128)
    for s in prange(nsamp):
        cur = rho.copy()
        nxt = np.empty((n, n), dtype=np.complex128)
        tmp = np.empty((n, n), dtype=np.complex128)
        for t in range(length):
            j = words[s, t]
            _conj_into(unitaries[j], cur, scales[j], nxt, tmp)
            cur, nxt = nxt, cur
        out[s] = cur
    return out


@njit(cache=True, parallel=True)
def apply_words_multi_numba(states, unitaries, scales, words):
    nsamp, length = words.shape
    n = states.shape[1]
    out = np.empty((nsamp, n, n), dtype=np.complex128)
    for s in prange(nsamp):
        cur = states[s].copy()
        nxt = np.empty((n, n), dtype=np.complex128)
        tmp = np.empty((n, n), dtype=np.complex128)
        for t in range(length):
            j = words[s, t]
            _conj_into(unitaries[j], cur, scales[j], nxt, tmp)
            cur, nxt = nxt, cur
        out[s] = cur
    return out


@njit(cache=True, inline="always")
def _pick_branch(state, povm, u):
    # index i with cumulative tr(Q_i state) first exceeding u * total
    k = povm.shape[0]
    n = state.shape[0]
    probs = np.empty(k)
    total = 0.0
    for i in range(k):
        acc = 0.0
        for a in range(n):
            for b in range(n):
                acc += (povm[i, a, b] * state[b, a]).real
        if acc < 0.0:
            acc = 0.0
        probs[i] = acc
        total += acc
    target = u * total
    run = 0.0
    for i in range(k):
        run += probs[i]
        if target < run:
            return i
    # u close to 1: last branch with positive probability
    for i in range(k - 1, -1, -1):
        if probs[i] > 0.0:
            return i
    return k - 1


@njit(cache=True, parallel=True)
def walk_place_dependent_numba(rho, unitaries, povm, uniforms):
    nsamp, length = uniforms.shape
    n = rho.shape[0]
    out = np.empty((nsamp, n, n), dtype=np.complex128)
    for s in prange(nsamp):
        cur = rho.copy()
        nxt = np.empty((n, n), dtype=np.complex128)
        tmp = np.empty((n, n), dtype=np.complex128)
        for t in range(length):
            j = _pick_branch(cur, povm, uniforms[s, t])
            _conj_into(unitaries[j], cur, 1.0, nxt, tmp)
            cur, nxt = nxt, cur
        out[s] = cur
    return out


@njit(cache=True)
def trajectory_numba(rho, unitaries, indices):
    steps = indices.shape[0]
    n = rho.shape[0]
    out = np.empty((steps + 1, n, n), dtype=np.complex128)
    out[0] = rho
    tmp = np.empty((n, n), dtype=np.complex128)
    for t in range(steps):
        _conj_into(unitaries[indices[t]], out[t], 1.0, out[t + 1], tmp)
    return out


@njit(cache=True)
def trajectory_place_dependent_numba(rho, unitaries, povm, uniforms):
    steps = uniforms.shape[0]
    n = rho.shape[0]
    out = np.empty((steps + 1, n, n), dtype=np.complex128)
    out[0] = rho
    tmp = np.empty((n, n), dtype=np.complex128)
    for t in range(steps):
        j = _pick_branch(out[t], povm, uniforms[t])
        _conj_into(unitaries[j], out[t], 1.0, out[t + 1], tmp)
    return out


# ---------------------------------------------------------------------------
# numpy fallbacks

def conjugate_batch_numpy(states, unitaries, scales):
    m, n, _ = states.shape
    k = unitaries.shape[0]
    out = np.einsum("kij,mjl,kpl->mkip", unitaries, states, unitaries.conj(), optimize=True)
    out *= scales[None, :, None, None]
    return out.reshape(m * k, n, n)


def left_multiply_batch_numpy(mats, unitaries):
    m, n, _ = mats.shape
    k = unitaries.shape[0]
    return np.einsum("kij,mjl->mkil", unitaries, mats).reshape(m * k, n, n)


def apply_words_numpy(rho, unitaries, scales, words):
    nsamp, length = words.shape
    cur = np.broadcast_to(rho, (nsamp,) + rho.shape).copy()
    for t in range(length):
        u = unitaries[words[:, t]]
        cur = scales[words[:, t]][:, None, None] * (u @ cur @ u.conj().transpose(0, 2, 1))
    return cur


def apply_words_multi_numpy(states, unitaries, scales, words):
    cur = states.copy()
    for t in range(words.shape[1]):
        u = unitaries[words[:, t]]
        cur = scales[words[:, t]][:, None, None] * (u @ cur @ u.conj().transpose(0, 2, 1))
    return cur


def _pick_branches_numpy(states, povm, u):
    probs = np.einsum("kab,sba->sk", povm, states).real
    np.clip(probs, 0.0, None, out=probs)
    cum = np.cumsum(probs, axis=1)
    target = u * cum[:, -1]
    idx = (cum <= target[:, None]).sum(axis=1)
    # guard against u ~ 1 rounding past the last positive branch
    last_pos = probs.shape[1] - 1 - np.argmax(probs[:, ::-1] > 0.0, axis=1)
    return np.minimum(idx, last_pos)


def walk_place_dependent_numpy(rho, unitaries, povm, uniforms):
    nsamp, length = uniforms.shape
    cur = np.broadcast_to(rho, (nsamp,) + rho.shape).copy()
    for t in range(length):
        idx = _pick_branches_numpy(cur, povm, uniforms[:, t])
        u = unitaries[idx]
        cur = u @ cur @ u.conj().transpose(0, 2, 1)
    return cur


def trajectory_numpy(rho, unitaries, indices):
    steps = indices.shape[0]
    out = np.empty((steps + 1,) + rho.shape, dtype=np.complex128)
    out[0] = rho
    for t in range(steps):
        u = unitaries[indices[t]]
        out[t + 1] = u @ out[t] @ u.conj().T
    return out


def trajectory_place_dependent_numpy(rho, unitaries, povm, uniforms):
    steps = uniforms.shape[0]
    out = np.empty((steps + 1,) + rho.shape, dtype=np.complex128)
    out[0] = rho
    for t in range(steps):
        j = _pick_branches_numpy(out[t][None], povm, uniforms[t:t + 1])[0]
        u = unitaries[j]
        out[t + 1] = u @ out[t] @ u.conj().T
    return out


# ---------------------------------------------------------------------------
# dispatch

def _c(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def _f(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def conjugate_batch(states, unitaries, scales):
    """Return ``scales[i] * U_i X_a U_i^*`` for every state ``a`` and branch ``i``.

    Output has shape ``(m*k, n, n)`` with state index major.
    """
    fn = conjugate_batch_numba if USE_NUMBA else conjugate_batch_numpy
    return fn(_c(states), _c(unitaries), _f(scales))


def left_multiply_batch(mats, unitaries):
    """Return ``U_i @ M_a`` for all pairs, state index major."""
    fn = left_multiply_batch_numba if USE_NUMBA else left_multiply_batch_numpy
    return fn(_c(mats), _c(unitaries))


def apply_words(rho, unitaries, scales, words):
    """Push ``rho`` through each row of ``words``; letter 0 acts first."""
    fn = apply_words_numba if USE_NUMBA else apply_words_numpy
    return fn(_c(rho), _c(unitaries), _f(scales), _i(words))


def apply_words_multi(states, unitaries, scales, words):
    """Like :func:`apply_words` but row ``s`` of ``words`` acts on ``states[s]``."""
    fn = apply_words_multi_numba if USE_NUMBA else apply_words_multi_numpy
    return fn(_c(states), _c(unitaries), _f(scales), _i(words))


def walk_place_dependent(rho, unitaries, povm, uniforms):
    """Final states of paths whose branch at each step is drawn with tr(Q_i state)."""
    fn = walk_place_dependent_numba if USE_NUMBA else walk_place_dependent_numpy
    return fn(_c(rho), _c(unitaries), _c(povm), _f(uniforms))


def trajectory(rho, unitaries, indices):
    fn = trajectory_numba if USE_NUMBA else trajectory_numpy
    return fn(_c(rho), _c(unitaries), _i(indices))


def trajectory_place_dependent(rho, unitaries, povm, uniforms):
    fn = trajectory_place_dependent_numba if USE_NUMBA else trajectory_place_dependent_numpy
    return fn(_c(rho), _c(unitaries), _c(povm), _f(uniforms))
