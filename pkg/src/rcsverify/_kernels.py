"""In-place gate kernels on flat state vectors.

``bit`` arguments count from the least significant end of the index. A
compiled program is three parallel arrays: ``kinds`` (0 diagonal 1-qubit,
1 dense 1-qubit, 2 fSim, 3 dense 2-qubit), ``params`` (sixteen complex
numbers per op, row-major for dense matrices) and ``bits`` (two bit
positions per op; for 2-qubit ops the first is the high bit of the matrix).
"""
import numba
import numpy as np

DIAG, DENSE1, FSIM, DENSE2 = 0, 1, 2, 3

_jit = numba.njit(cache=True, nogil=True, fastmath=True, error_model="numpy")


@_jit
def apply_1q(state, m00, m01, m10, m11, bit):
    step = 1 << bit
    for base in range(0, state.size, 2 * step):
        for i in range(base, base + step):
            a = state[i]
            b = state[i + step]
            state[i] = m00 * a + m01 * b
            state[i + step] = m10 * a + m11 * b


@_jit
def apply_diag_1q(state, d0, d1, bit):
    step = 1 << bit
    for base in range(0, state.size, 2 * step):
        for i in range(base, base + step):
            state[i] *= d0
            state[i + step] *= d1


@_jit
def apply_fsim(state, c, mis, phase, bit_a, bit_b):
    # |01> and |10> mix through [[c, mis], [mis, c]]; |11> picks up phase
    lo = min(bit_a, bit_b)
    hi = max(bit_a, bit_b)
    ma = 1 << bit_a
    mb = 1 << bit_b
    for j in range(state.size >> 2):
        i = ((j >> lo) << (lo + 1)) | (j & ((1 << lo) - 1))
        i = ((i >> hi) << (hi + 1)) | (i & ((1 << hi) - 1))
        v1 = state[i | mb]
        v2 = state[i | ma]
        state[i | mb] = c * v1 + mis * v2
        state[i | ma] = mis * v1 + c * v2
        state[i | ma | mb] *= phase


@_jit
def apply_2q(state, m, bit_a, bit_b):
    m00 = m[0]; m01 = m[1]; m02 = m[2]; m03 = m[3]
    m10 = m[4]; m11 = m[5]; m12 = m[6]; m13 = m[7]
    m20 = m[8]; m21 = m[9]; m22 = m[10]; m23 = m[11]
    m30 = m[12]; m31 = m[13]; m32 = m[14]; m33 = m[15]
    lo = min(bit_a, bit_b)
    hi = max(bit_a, bit_b)
    ma = 1 << bit_a
    mb = 1 << bit_b
    slo = 1 << lo
    shi = 1 << hi
    for b1 in range(0, state.size, 2 * shi):
        for b2 in range(b1, b1 + shi, 2 * slo):
            for i in range(b2, b2 + slo):
                v0 = state[i]
                v1 = state[i | mb]
                v2 = state[i | ma]
                v3 = state[i | ma | mb]
                state[i] = m00 * v0 + m01 * v1 + m02 * v2 + m03 * v3
                state[i | mb] = m10 * v0 + m11 * v1 + m12 * v2 + m13 * v3
                state[i | ma] = m20 * v0 + m21 * v1 + m22 * v2 + m23 * v3
                state[i | ma | mb] = m30 * v0 + m31 * v1 + m32 * v2 + m33 * v3


@_jit
def run_program(state, kinds, params, bits, start, stop):
    for k in range(start, stop):
        p = params[k]
        if kinds[k] == DENSE1:
            apply_1q(state, p[0], p[1], p[2], p[3], bits[k, 0])
        elif kinds[k] == FSIM:
            apply_fsim(state, p[0], p[1], p[2], bits[k, 0], bits[k, 1])
        elif kinds[k] == DENSE2:
            apply_2q(state, p, bits[k, 0], bits[k, 1])
        else:
            apply_diag_1q(state, p[0], p[1], bits[k, 0])
    return state


def warm_up():
    s = np.zeros(4, dtype=np.complex128)
    s[0] = 1
    kinds = np.array([DENSE1, FSIM, DIAG, DENSE2], dtype=np.int64)
    params = np.ones((4, 16), dtype=np.complex128)
    bits = np.array([[0, 0], [1, 0], [1, 0], [1, 0]], dtype=np.int64)
    run_program(s, kinds, params, bits, 0, 4)
