"""Pure-Python kernels: the reference implementation of the hot loops.

The compiled extension (``_native``) mirrors these functions operation
for operation, including RNG draws and floating-point evaluation order,
so both backends produce bit-identical outputs.  Keep any change here in
lockstep with ``_native.pyx``.

State lives in plain lists; per-flip deltas are O(1) against a
maintained row-sum field and the returned energies are always recomputed
directly from the final mask, so incremental drift never reaches a
caller.
"""

from __future__ import annotations

import time
from math import exp

import numpy as np

from ..rng import SplitMix64

BACKEND_NAME = "python"


def _as_lists(matrix):
    return [list(map(float, row)) for row in np.asarray(matrix, dtype=np.float64)]


def _signed_power(x: float, exponent: float) -> float:
    if float(exponent).is_integer():
        k = int(exponent)
        acc = 1.0
        for _ in range(abs(k)):
            acc *= x
        if k < 0:
            acc = 1.0 / acc
        return acc
    mag = abs(x) ** exponent
    return -mag if x < 0 else mag


def qubo_direct(matrix, bits) -> float:
    """x' Q x by explicit loops (diagonal once, each pair twice)."""
    q = _as_lists(matrix)
    x = [int(b) for b in bits]
    n = len(x)
    acc = 0.0
    for i in range(n):
        if not x[i]:
            continue
        acc += q[i][i]
        row = q[i]
        for j in range(i + 1, n):
            if x[j]:
                acc += 2.0 * row[j]
    return acc


def cqns_direct(cov, rets, alpha, bits) -> float:
    """Net score by explicit loops; the honest rescore used at run end."""
    c = _as_lists(cov)
    r = [float(v) for v in rets]
    x = [int(b) for b in bits]
    n = len(x)
    m = 0
    lin = 0.0
    quad = 0.0
    for i in range(n):
        if not x[i]:
            continue
        m += 1
        lin += r[i]
        quad += c[i][i]
        row = c[i]
        for j in range(i + 1, n):
            if x[j]:
                quad += 2.0 * row[j]
    mean = lin / m
    var = quad / (m * m)
    return var - _signed_power(mean, 2.0 + alpha)


def _random_bits(rng: SplitMix64, n: int) -> list:
    return [1 if rng.uniform() < 0.5 else 0 for _ in range(n)]


def _random_nonempty_bits(rng: SplitMix64, n: int) -> list:
    x = _random_bits(rng, n)
    while not any(x):
        x = _random_bits(rng, n)
    return x


def sa_custom_cqns(cov, rets, alpha, t_max, cooling_rate, cycles, sweeps, seed):
    """One annealing restart over exact net scores, all sizes reachable.

    Single-flip proposals; worse moves accepted with probability
    exp(-delta/T); emptying the mask is never allowed.  Returns
    (best mask, best score, worse proposed, worse accepted).
    """
    c = _as_lists(cov)
    r = [float(v) for v in rets]
    n = len(r)
    rng = SplitMix64(seed)
    x = _random_nonempty_bits(rng, n)

    field = [0.0] * n
    for i in range(n):
        acc = 0.0
        row = c[i]
        for j in range(n):
            if x[j]:
                acc += row[j]
        field[i] = acc
    m = sum(x)
    lin = 0.0
    quad = 0.0
    for i in range(n):
        if x[i]:
            lin += r[i]
            quad += field[i]
    cur = quad / (m * m) - _signed_power(lin / m, 2.0 + alpha)

    best_bits = list(x)
    best = cur
    worse_prop = 0
    worse_acc = 0

    for cycle in range(cycles):
        temp = t_max - cycle * cooling_rate
        for _ in range(sweeps):
            i = rng.randbelow(n)
            if x[i]:
                if m == 1:
                    continue
                s = -1
                dq = c[i][i] - 2.0 * field[i]
            else:
                s = 1
                dq = c[i][i] + 2.0 * field[i]
            nm = m + s
            nlin = lin + s * r[i]
            nquad = quad + dq
            cand = nquad / (nm * nm) - _signed_power(nlin / nm, 2.0 + alpha)
            delta = cand - cur
            if delta <= 0.0:
                accept = True
            else:
                worse_prop += 1
                accept = rng.uniform() < exp(-delta / temp)
                if accept:
                    worse_acc += 1
            if accept:
                x[i] ^= 1
                m, lin, quad, cur = nm, nlin, nquad, cand
                col = c[i]
                if s > 0:
                    for j in range(n):
                        field[j] += col[j]
                else:
                    for j in range(n):
                        field[j] -= col[j]
                if cur < best:
                    best = cur
                    best_bits = list(x)

    final = cqns_direct(cov, rets, alpha, best_bits)
    return np.array(best_bits, dtype=np.uint8), final, worse_prop, worse_acc


def sa_custom_qubo(matrix, t_max, cooling_rate, cycles, sweeps, seed):
    """One annealing restart over QUBO energies (empty mask allowed)."""
    q = _as_lists(matrix)
    n = len(q)
    rng = SplitMix64(seed)
    x = _random_bits(rng, n)

    field = [0.0] * n
    for i in range(n):
        acc = 0.0
        row = q[i]
        for j in range(n):
            if x[j]:
                acc += row[j]
        field[i] = acc
    cur = 0.0
    for i in range(n):
        if x[i]:
            cur += field[i]

    best_bits = list(x)
    best = cur
    worse_prop = 0
    worse_acc = 0

    for cycle in range(cycles):
        temp = t_max - cycle * cooling_rate
        for _ in range(sweeps):
            i = rng.randbelow(n)
            if x[i]:
                delta = q[i][i] - 2.0 * field[i]
                s = -1
            else:
                delta = q[i][i] + 2.0 * field[i]
                s = 1
            if delta <= 0.0:
                accept = True
            else:
                worse_prop += 1
                accept = rng.uniform() < exp(-delta / temp)
                if accept:
                    worse_acc += 1
            if accept:
                x[i] ^= 1
                cur += delta
                col = q[i]
                if s > 0:
                    for j in range(n):
                        field[j] += col[j]
                else:
                    for j in range(n):
                        field[j] -= col[j]
                if cur < best:
                    best = cur
                    best_bits = list(x)

    final = qubo_direct(matrix, best_bits)
    return np.array(best_bits, dtype=np.uint8), final, worse_prop, worse_acc


def sa_geometric(matrix, schedule, reads, seed):
    """Inverse-temperature annealing: per read, one full fixed-order sweep
    of Metropolis flips at each beta in the schedule; the final state is
    what gets reported, not the best seen.

    Returns (masks, energies, worse proposed, worse accepted); one
    continuous RNG stream covers all reads.
    """
    q = _as_lists(matrix)
    n = len(q)
    betas = [float(b) for b in schedule]
    rng = SplitMix64(seed)
    masks = np.zeros((reads, n), dtype=np.uint8)
    energies = np.zeros(reads, dtype=np.float64)
    worse_prop = 0
    worse_acc = 0

    for read in range(reads):
        x = _random_bits(rng, n)
        field = [0.0] * n
        for i in range(n):
            acc = 0.0
            row = q[i]
            for j in range(n):
                if x[j]:
                    acc += row[j]
            field[i] = acc
        for beta in betas:
            for i in range(n):
                if x[i]:
                    delta = q[i][i] - 2.0 * field[i]
                    s = -1
                else:
                    delta = q[i][i] + 2.0 * field[i]
                    s = 1
                if delta <= 0.0:
                    accept = True
                else:
                    worse_prop += 1
                    accept = rng.uniform() < exp(-beta * delta)
                    if accept:
                        worse_acc += 1
                if accept:
                    x[i] ^= 1
                    col = q[i]
                    if s > 0:
                        for j in range(n):
                            field[j] += col[j]
                    else:
                        for j in range(n):
                            field[j] -= col[j]
        masks[read, :] = x
        energies[read] = qubo_direct(matrix, x)

    return masks, energies, worse_prop, worse_acc


def tabu_run(matrix, tenure, reads, stagnation_limit, time_cap, seed, collect_trace=False):
    """Multistart tabu search: steepest single-flip descent with a
    recency memory; a tabu move is allowed only when it would beat the
    best energy seen in the read (aspiration).

    Each read stops after ``stagnation_limit`` consecutive moves without
    a new best, or when the optional wall-clock cap expires (the cap
    trades determinism for bounded latency).  Returns (masks, energies,
    trace) where the trace (optional) records per move: read index,
    flipped variable, whether the move was tabu when taken, and whether
    it set a new best (tabu moves must, that is the aspiration rule).
    """
    q = _as_lists(matrix)
    n = len(q)
    rng = SplitMix64(seed)
    masks = np.zeros((reads, n), dtype=np.uint8)
    energies = np.zeros(reads, dtype=np.float64)
    trace = {"read": [], "var": [], "tabu": [], "new_best": []} if collect_trace else None
    deadline = time.perf_counter() + time_cap if time_cap and time_cap > 0 else None

    for read in range(reads):
        x = _random_bits(rng, n)
        field = [0.0] * n
        for i in range(n):
            acc = 0.0
            row = q[i]
            for j in range(n):
                if x[j]:
                    acc += row[j]
            field[i] = acc
        cur = 0.0
        for i in range(n):
            if x[i]:
                cur += field[i]
        best = cur
        best_bits = list(x)
        tabu_until = [0] * n
        iteration = 0
        stagnation = 0

        while stagnation < stagnation_limit:
            if deadline is not None and time.perf_counter() >= deadline:
                break
            iteration += 1
            chosen = -1
            chosen_delta = 0.0
            chosen_tabu = False
            for i in range(n):
                if x[i]:
                    delta = q[i][i] - 2.0 * field[i]
                else:
                    delta = q[i][i] + 2.0 * field[i]
                is_tabu = tabu_until[i] >= iteration
                if is_tabu and not (cur + delta < best):
                    continue
                if chosen < 0 or delta < chosen_delta:
                    chosen = i
                    chosen_delta = delta
                    chosen_tabu = is_tabu
            if chosen < 0:
                break
            s = -1 if x[chosen] else 1
            x[chosen] ^= 1
            cur += chosen_delta
            col = q[chosen]
            if s > 0:
                for j in range(n):
                    field[j] += col[j]
            else:
                for j in range(n):
                    field[j] -= col[j]
            tabu_until[chosen] = iteration + tenure
            improved = cur < best
            if improved:
                best = cur
                best_bits = list(x)
                stagnation = 0
            else:
                stagnation += 1
            if trace is not None:
                trace["read"].append(read)
                trace["var"].append(chosen)
                trace["tabu"].append(int(chosen_tabu))
                trace["new_best"].append(int(improved))

        masks[read, :] = best_bits
        energies[read] = qubo_direct(matrix, best_bits)

    if trace is not None:
        trace = {key: np.array(val, dtype=np.int64) for key, val in trace.items()}
    return masks, energies, trace


class IncrementalCqns:
    """Delta-update net-score tracker, the same bookkeeping the annealer
    uses internally; exposed so tests can walk it across every mask."""

    def __init__(self, cov, rets, alpha, bits):
        self._c = _as_lists(cov)
        self._r = [float(v) for v in rets]
        self._alpha = float(alpha)
        n = len(self._r)
        self._x = [int(b) for b in bits]
        self._field = [0.0] * n
        for i in range(n):
            acc = 0.0
            row = self._c[i]
            for j in range(n):
                if self._x[j]:
                    acc += row[j]
            self._field[i] = acc
        self.m = sum(self._x)
        self._lin = 0.0
        self._quad = 0.0
        for i in range(n):
            if self._x[i]:
                self._lin += self._r[i]
                self._quad += self._field[i]

    def flip(self, i: int) -> None:
        if self._x[i]:
            s = -1
            dq = self._c[i][i] - 2.0 * self._field[i]
        else:
            s = 1
            dq = self._c[i][i] + 2.0 * self._field[i]
        self._x[i] ^= 1
        self.m += s
        self._lin += s * self._r[i]
        self._quad += dq
        col = self._c[i]
        if s > 0:
            for j in range(len(self._field)):
                self._field[j] += col[j]
        else:
            for j in range(len(self._field)):
                self._field[j] -= col[j]

    def score(self) -> float:
        if self.m == 0:
            raise ValueError("empty mask has no score")
        mean = self._lin / self.m
        var = self._quad / (self.m * self.m)
        return var - _signed_power(mean, 2.0 + self._alpha)
