# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: a line-for-line mirror of ``pyfallback``.

Same splitmix64 stream, same proposal order, same floating-point
evaluation order, so outputs are bit-identical to the fallback.  Any
behavioral change must land in both files.
"""

import time

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, pow, rint

cnp.import_array()

BACKEND_NAME = "native"

ctypedef unsigned long long u64

cdef u64 MASK64 = 0xFFFFFFFFFFFFFFFFULL
cdef u64 GAMMA = 0x9E3779B97F4A7C15ULL


cdef inline u64 _next_u64(u64* state) nogil:
    state[0] = state[0] + GAMMA
    cdef u64 z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(u64* state) nogil:
    return <double>(_next_u64(state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline int _randbelow(u64* state, int n) nogil:
    return <int>(_next_u64(state) % <u64>n)


cdef inline double _signed_power(double x, double exponent) nogil:
    cdef double acc, mag
    cdef int k, i
    if exponent == rint(exponent):
        k = <int>rint(exponent)
        acc = 1.0
        if k < 0:
            for i in range(-k):
                acc *= x
            return 1.0 / acc
        for i in range(k):
            acc *= x
        return acc
    mag = pow(fabs(x), exponent)
    return -mag if x < 0 else mag


cdef double _qubo_direct(double[:, ::1] q, unsigned char[::1] x) nogil:
    cdef int n = q.shape[0]
    cdef double acc = 0.0
    cdef int i, j
    for i in range(n):
        if not x[i]:
            continue
        acc += q[i, i]
        for j in range(i + 1, n):
            if x[j]:
                acc += 2.0 * q[i, j]
    return acc


cdef double _cqns_direct(double[:, ::1] c, double[::1] r, double alpha,
                         unsigned char[::1] x) nogil:
    cdef int n = c.shape[0]
    cdef int m = 0
    cdef double lin = 0.0
    cdef double quad = 0.0
    cdef int i, j
    for i in range(n):
        if not x[i]:
            continue
        m += 1
        lin += r[i]
        quad += c[i, i]
        for j in range(i + 1, n):
            if x[j]:
                quad += 2.0 * c[i, j]
    cdef double mean = lin / m
    cdef double var = quad / (<double>m * <double>m)
    return var - _signed_power(mean, 2.0 + alpha)


def qubo_direct(matrix, bits):
    cdef double[:, ::1] q = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef unsigned char[::1] x = np.ascontiguousarray(bits, dtype=np.uint8)
    return _qubo_direct(q, x)


def cqns_direct(cov, rets, alpha, bits):
    cdef double[:, ::1] c = np.ascontiguousarray(cov, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rets, dtype=np.float64)
    cdef unsigned char[::1] x = np.ascontiguousarray(bits, dtype=np.uint8)
    return _cqns_direct(c, r, <double>alpha, x)


cdef void _random_bits(u64* state, unsigned char[::1] x) nogil:
    cdef int i
    for i in range(x.shape[0]):
        x[i] = 1 if _uniform(state) < 0.5 else 0


cdef void _random_nonempty_bits(u64* state, unsigned char[::1] x) nogil:
    cdef int i
    cdef bint empty = True
    while True:
        _random_bits(state, x)
        empty = True
        for i in range(x.shape[0]):
            if x[i]:
                empty = False
                break
        if not empty:
            return


def sa_custom_cqns(cov, rets, alpha, t_max, cooling_rate, cycles, sweeps, seed):
    cdef double[:, ::1] c = np.ascontiguousarray(cov, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rets, dtype=np.float64)
    cdef double a = <double>alpha
    cdef double tmax = <double>t_max
    cdef double cool = <double>cooling_rate
    cdef int ncycles = <int>cycles
    cdef int nsweeps = <int>sweeps
    cdef int n = c.shape[0]
    cdef u64 state = <u64>(seed & 0xFFFFFFFFFFFFFFFF)

    x_arr = np.zeros(n, dtype=np.uint8)
    best_arr = np.zeros(n, dtype=np.uint8)
    field_arr = np.zeros(n, dtype=np.float64)
    cdef unsigned char[::1] x = x_arr
    cdef unsigned char[::1] best_bits = best_arr
    cdef double[::1] field = field_arr

    cdef int i, j, cycle, sweep, m, nm, s
    cdef double acc, lin, quad, cur, best, temp, dq, nlin, nquad, cand, delta
    cdef long worse_prop = 0
    cdef long worse_acc = 0
    cdef bint accept

    with nogil:
        _random_nonempty_bits(&state, x)
        for i in range(n):
            acc = 0.0
            for j in range(n):
                if x[j]:
                    acc += c[i, j]
            field[i] = acc
        m = 0
        for i in range(n):
            if x[i]:
                m += 1
        lin = 0.0
        quad = 0.0
        for i in range(n):
            if x[i]:
                lin += r[i]
                quad += field[i]
        cur = quad / (<double>m * <double>m) - _signed_power(lin / m, 2.0 + a)

        for i in range(n):
            best_bits[i] = x[i]
        best = cur

        for cycle in range(ncycles):
            temp = tmax - cycle * cool
            for sweep in range(nsweeps):
                i = _randbelow(&state, n)
                if x[i]:
                    if m == 1:
                        continue
                    s = -1
                    dq = c[i, i] - 2.0 * field[i]
                else:
                    s = 1
                    dq = c[i, i] + 2.0 * field[i]
                nm = m + s
                nlin = lin + s * r[i]
                nquad = quad + dq
                cand = nquad / (<double>nm * <double>nm) - _signed_power(nlin / nm, 2.0 + a)
                delta = cand - cur
                if delta <= 0.0:
                    accept = True
                else:
                    worse_prop += 1
                    accept = _uniform(&state) < exp(-delta / temp)
                    if accept:
                        worse_acc += 1
                if accept:
                    x[i] ^= 1
                    m = nm
                    lin = nlin
                    quad = nquad
                    cur = cand
                    if s > 0:
                        for j in range(n):
                            field[j] += c[j, i]
                    else:
                        for j in range(n):
                            field[j] -= c[j, i]
                    if cur < best:
                        best = cur
                        for j in range(n):
                            best_bits[j] = x[j]

    cdef double final = _cqns_direct(c, r, a, best_bits)
    return best_arr, final, worse_prop, worse_acc


def sa_custom_qubo(matrix, t_max, cooling_rate, cycles, sweeps, seed):
    cdef double[:, ::1] q = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef double tmax = <double>t_max
    cdef double cool = <double>cooling_rate
    cdef int ncycles = <int>cycles
    cdef int nsweeps = <int>sweeps
    cdef int n = q.shape[0]
    cdef u64 state = <u64>(seed & 0xFFFFFFFFFFFFFFFF)

    x_arr = np.zeros(n, dtype=np.uint8)
    best_arr = np.zeros(n, dtype=np.uint8)
    field_arr = np.zeros(n, dtype=np.float64)
    cdef unsigned char[::1] x = x_arr
    cdef unsigned char[::1] best_bits = best_arr
    cdef double[::1] field = field_arr

    cdef int i, j, cycle, sweep, s
    cdef double acc, cur, best, temp, delta
    cdef long worse_prop = 0
    cdef long worse_acc = 0
    cdef bint accept

    with nogil:
        _random_bits(&state, x)
        for i in range(n):
            acc = 0.0
            for j in range(n):
                if x[j]:
                    acc += q[i, j]
            field[i] = acc
        cur = 0.0
        for i in range(n):
            if x[i]:
                cur += field[i]
        for i in range(n):
            best_bits[i] = x[i]
        best = cur

        for cycle in range(ncycles):
            temp = tmax - cycle * cool
            for sweep in range(nsweeps):
                i = _randbelow(&state, n)
                if x[i]:
                    delta = q[i, i] - 2.0 * field[i]
                    s = -1
                else:
                    delta = q[i, i] + 2.0 * field[i]
                    s = 1
                if delta <= 0.0:
                    accept = True
                else:
                    worse_prop += 1
                    accept = _uniform(&state) < exp(-delta / temp)
                    if accept:
                        worse_acc += 1
                if accept:
                    x[i] ^= 1
                    cur += delta
                    if s > 0:
                        for j in range(n):
                            field[j] += q[j, i]
                    else:
                        for j in range(n):
                            field[j] -= q[j, i]
                    if cur < best:
                        best = cur
                        for j in range(n):
                            best_bits[j] = x[j]

    cdef double final = _qubo_direct(q, best_bits)
    return best_arr, final, worse_prop, worse_acc


def sa_geometric(matrix, schedule, reads, seed):
    cdef double[:, ::1] q = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef double[::1] betas = np.ascontiguousarray(schedule, dtype=np.float64)
    cdef int nreads = <int>reads
    cdef int n = q.shape[0]
    cdef int nsteps = betas.shape[0]
    cdef u64 state = <u64>(seed & 0xFFFFFFFFFFFFFFFF)

    masks_arr = np.zeros((nreads, n), dtype=np.uint8)
    energies_arr = np.zeros(nreads, dtype=np.float64)
    x_arr = np.zeros(n, dtype=np.uint8)
    field_arr = np.zeros(n, dtype=np.float64)
    cdef unsigned char[:, ::1] masks = masks_arr
    cdef double[::1] energies = energies_arr
    cdef unsigned char[::1] x = x_arr
    cdef double[::1] field = field_arr

    cdef int read, i, j, step, s
    cdef double acc, beta, delta
    cdef long worse_prop = 0
    cdef long worse_acc = 0
    cdef bint accept

    with nogil:
        for read in range(nreads):
            _random_bits(&state, x)
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    if x[j]:
                        acc += q[i, j]
                field[i] = acc
            for step in range(nsteps):
                beta = betas[step]
                for i in range(n):
                    if x[i]:
                        delta = q[i, i] - 2.0 * field[i]
                        s = -1
                    else:
                        delta = q[i, i] + 2.0 * field[i]
                        s = 1
                    if delta <= 0.0:
                        accept = True
                    else:
                        worse_prop += 1
                        accept = _uniform(&state) < exp(-beta * delta)
                        if accept:
                            worse_acc += 1
                    if accept:
                        x[i] ^= 1
                        if s > 0:
                            for j in range(n):
                                field[j] += q[j, i]
                        else:
                            for j in range(n):
                                field[j] -= q[j, i]
            for i in range(n):
                masks[read, i] = x[i]
            energies[read] = _qubo_direct(q, x)

    return masks_arr, energies_arr, worse_prop, worse_acc


def tabu_run(matrix, tenure, reads, stagnation_limit, time_cap, seed, collect_trace=False):
    cdef double[:, ::1] q = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef int ntenure = <int>tenure
    cdef int nreads = <int>reads
    cdef int stag_limit = <int>stagnation_limit
    cdef double cap = 0.0 if time_cap is None else <double>time_cap
    cdef int n = q.shape[0]
    cdef u64 state = <u64>(seed & 0xFFFFFFFFFFFFFFFF)

    masks_arr = np.zeros((nreads, n), dtype=np.uint8)
    energies_arr = np.zeros(nreads, dtype=np.float64)
    x_arr = np.zeros(n, dtype=np.uint8)
    best_arr = np.zeros(n, dtype=np.uint8)
    field_arr = np.zeros(n, dtype=np.float64)
    tabu_arr = np.zeros(n, dtype=np.int64)
    cdef unsigned char[:, ::1] masks = masks_arr
    cdef double[::1] energies = energies_arr
    cdef unsigned char[::1] x = x_arr
    cdef unsigned char[::1] best_bits = best_arr
    cdef double[::1] field = field_arr
    cdef long[::1] tabu_until = tabu_arr

    trace = {"read": [], "var": [], "tabu": [], "new_best": []} if collect_trace else None
    cdef bint tracing = collect_trace
    cdef double deadline = -1.0
    if cap > 0.0:
        deadline = time.perf_counter() + cap

    cdef int read, i, j, chosen, s
    cdef long iteration, stagnation
    cdef double acc, cur, best, delta, chosen_delta
    cdef bint is_tabu, chosen_tabu, improved, timed_out

    for read in range(nreads):
        with nogil:
            _random_bits(&state, x)
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    if x[j]:
                        acc += q[i, j]
                field[i] = acc
            cur = 0.0
            for i in range(n):
                if x[i]:
                    cur += field[i]
            for i in range(n):
                best_bits[i] = x[i]
            best = cur
            for i in range(n):
                tabu_until[i] = 0
        iteration = 0
        stagnation = 0

        while stagnation < stag_limit:
            if deadline >= 0.0 and time.perf_counter() >= deadline:
                break
            iteration += 1
            chosen = -1
            chosen_delta = 0.0
            chosen_tabu = False
            with nogil:
                for i in range(n):
                    if x[i]:
                        delta = q[i, i] - 2.0 * field[i]
                    else:
                        delta = q[i, i] + 2.0 * field[i]
                    is_tabu = tabu_until[i] >= iteration
                    if is_tabu and not (cur + delta < best):
                        continue
                    if chosen < 0 or delta < chosen_delta:
                        chosen = i
                        chosen_delta = delta
                        chosen_tabu = is_tabu
            if chosen < 0:
                break
            with nogil:
                s = -1 if x[chosen] else 1
                x[chosen] ^= 1
                cur += chosen_delta
                if s > 0:
                    for j in range(n):
                        field[j] += q[j, chosen]
                else:
                    for j in range(n):
                        field[j] -= q[j, chosen]
                tabu_until[chosen] = iteration + ntenure
                improved = cur < best
                if improved:
                    best = cur
                    for j in range(n):
                        best_bits[j] = x[j]
                    stagnation = 0
                else:
                    stagnation += 1
            if tracing:
                trace["read"].append(read)
                trace["var"].append(chosen)
                trace["tabu"].append(1 if chosen_tabu else 0)
                trace["new_best"].append(1 if improved else 0)

        for i in range(n):
            masks[read, i] = best_bits[i]
        energies[read] = _qubo_direct(q, best_bits)

    if trace is not None:
        trace = {key: np.array(val, dtype=np.int64) for key, val in trace.items()}
    return masks_arr, energies_arr, trace
