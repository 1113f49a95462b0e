"""Per-cardinality QUBO construction, penalty calibration, and scaling.

For a target size k the raw matrix loads negated expected-return content
on the linear (diagonal) terms and covariance content on the quadratic
terms, so on the popcount-k slice the energy is the quadratic surrogate
``Var(R_w) - lin_coeff * sum(selected returns)``.  A quadratic size
penalty S(m) = lin*m + quad*m^2 with S(0) = S(k) = 0 and a tunable
full-mask anchor is then folded into the coefficients, the matrix is
scaled into [-0.9, 0.9], and sampler energies can be inverted back to
raw energies and exact net scores.

The surrogate is deliberately imprecise: the net score's power term is
not quadratic and cannot be loaded into the matrix, so valid masks are
always rescored exactly through the scoring module.  Surrogate error
affects search guidance only, never reported numbers.
"""

from __future__ import annotations

import json
import statistics
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    BadSize,
    DegenerateAnchor,
    EmptyPortfolio,
    IoError,
    RangeViolation,
    ZeroMatrix,
)
from .market_data import MarketModel
from .scoring import DEFAULT_ALPHA, Portfolio, cqns as exact_cqns

SCALE_TARGET = 0.9
H_RANGE = (-2.0, 2.0)
J_RANGE = (-0.9, 0.9)
DEFAULT_SAMPLES_PER_SIZE = 200
DEFAULT_TUNE_ETA = 0.5
MIN_TUNE_FACTOR = 0.01


class Weighting(str, Enum):
    PER_SIZE = "per_size"
    UNWEIGHTED = "unweighted"


def default_lin_coeff(weighting: Weighting, k: int) -> float:
    """1/k under per-size weighting (keeps linear and quadratic content on
    the observed relative magnitudes), 1 when unweighted."""
    return 1.0 / k if weighting is Weighting.PER_SIZE else 1.0


def qubo_energy(matrix: np.ndarray, bits: np.ndarray) -> float:
    """x' Q x over the full symmetric matrix (off-diagonals counted twice)."""
    x = np.asarray(bits, dtype=np.float64)
    return float(x @ matrix @ x)


def qubo_energies(matrix: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Batch x' Q x for an (S, N) mask matrix."""
    x = np.asarray(masks, dtype=np.float64)
    return np.einsum("si,si->s", x @ matrix, x)


@dataclass(frozen=True)
class RawQubo:
    """Unshifted coefficient matrix for one target size."""

    n: int
    target_size: int
    q: np.ndarray
    weighting: Weighting
    lin_coeff: float

    def energy(self, bits: np.ndarray) -> float:
        return qubo_energy(self.q, bits)


@dataclass(frozen=True)
class ShiftParams:
    """Affine size penalty S(m) = lin*m + quad*m^2 with lin = -k*quad.

    ``n`` and ``ebar_n`` (the sampled mean raw energy of the full mask)
    are carried along so the penalty can be re-tuned and inverted
    without re-sampling.
    """

    lin: float
    quad: float
    target_size: int
    end_energy: float
    n: int
    ebar_n: float

    def penalty(self, m: int) -> float:
        """S(m), evaluated in a factored form that is exactly zero at the
        m=0 and m=k anchors and exactly end_energy - ebar_n at m=n."""
        k = self.target_size
        num = m * (m - k)
        if num == 0:
            return 0.0
        ratio = num / (self.n * (self.n - k))
        return (self.end_energy - self.ebar_n) * ratio

    @classmethod
    def identity(cls, n: int, target_size: int, ebar_n: float = 0.0) -> "ShiftParams":
        return cls(lin=0.0, quad=0.0, target_size=target_size,
                   end_energy=ebar_n, n=n, ebar_n=ebar_n)


@dataclass(frozen=True)
class ScaledQubo:
    """Shifted-and-scaled matrix ready for a sampler, with inversion data.

    ``matrix`` holds the scaled entries (max absolute entry 0.9);
    dividing a sampled energy by ``scale`` and subtracting the penalty
    recovers the raw energy.
    """

    matrix: np.ndarray
    scale: float
    shift: ShiftParams
    target_size: int

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    def energy(self, bits: np.ndarray) -> float:
        return qubo_energy(self.matrix, bits)

    def raw_energy(self, bits: np.ndarray) -> float:
        bits = np.asarray(bits)
        return self.energy(bits) / self.scale - self.shift.penalty(int(bits.sum()))


@dataclass(frozen=True)
class IsingModel:
    """Spin formulation: energy(s) = sum h_i s_i + sum_{i<j} J_ij s_i s_j."""

    h: np.ndarray
    j: dict
    offset: float

    @property
    def n(self) -> int:
        return int(self.h.shape[0])

    def energy(self, spins: np.ndarray) -> float:
        """Ising energy excluding the offset."""
        e = float(self.h @ np.asarray(spins, dtype=np.float64))
        for (a, b), coupling in self.j.items():
            e += coupling * spins[a] * spins[b]
        return e


@dataclass(frozen=True)
class BigMatrix:
    """The full per-size QUBO stack: one scaled matrix per target size."""

    qubos: dict


def build_raw_qubo(
    model: MarketModel,
    k: int,
    weighting: Weighting = Weighting.PER_SIZE,
    lin_coeff: float | None = None,
) -> RawQubo:
    """Load covariance on the quadratic terms and negated expected returns
    on the linear terms for target size k.

    With per-size weighting the covariance block is divided by k^2, so a
    popcount-k mask's energy equals its portfolio variance minus
    lin_coeff times the sum of its expected returns (Var - E at the
    default lin_coeff = 1/k).
    """
    n = model.n
    if not 1 <= k <= n - 1:
        raise BadSize(f"target size {k} outside [1, {n - 1}] for {n} assets")
    if lin_coeff is None:
        lin_coeff = default_lin_coeff(weighting, k)
    if weighting is Weighting.PER_SIZE:
        q = model.cov / (k * k)
    else:
        q = model.cov.copy()
    q[np.diag_indices(n)] = np.diag(q) - model.expected_returns * lin_coeff
    return RawQubo(n=n, target_size=k, q=q, weighting=weighting, lin_coeff=lin_coeff)


def random_mask_batch(rng: np.random.Generator, n: int, m: int, count: int) -> np.ndarray:
    """count uniform masks of popcount m, as a (count, n) float matrix."""
    keys = rng.random((count, n))
    order = np.argpartition(keys, m - 1, axis=1)[:, :m]
    masks = np.zeros((count, n), dtype=np.float64)
    rows = np.repeat(np.arange(count), m)
    masks[rows, order.ravel()] = 1.0
    return masks


def estimate_size_energy(
    raw: RawQubo,
    samples_per_size: int = DEFAULT_SAMPLES_PER_SIZE,
    seed: int = 0,
) -> np.ndarray:
    """Mean raw energy per popcount, from uniform sampling at each size.

    Returns a vector indexed by m in [0, n]; the empty mask is zero by
    definition and the full mask is exact (a single outcome).
    """
    if samples_per_size < 1:
        raise ValueError("samples_per_size must be >= 1")
    n = raw.n
    rng = np.random.default_rng(seed)
    e_bar = np.zeros(n + 1)
    for m in range(1, n):
        masks = random_mask_batch(rng, n, m, samples_per_size)
        e_bar[m] = float(qubo_energies(raw.q, masks).mean())
    e_bar[n] = raw.energy(np.ones(n, dtype=np.float64))
    return e_bar


def _solve_shift_scalar(ebar_n: float, n: int, k: int, end_energy: float) -> ShiftParams:
    if k >= n:
        raise DegenerateAnchor(f"target size {k} must be below the asset count {n}")
    quad = (end_energy - ebar_n) / (n * (n - k))
    lin = -k * quad
    return ShiftParams(lin=lin, quad=quad, target_size=k,
                       end_energy=end_energy, n=n, ebar_n=ebar_n)


def solve_shift(e_bar: np.ndarray, k: int, end_energy: float) -> ShiftParams:
    """Fit the three-anchor penalty: S(0) = S(k) = 0 and the expected
    full-mask energy pinned to end_energy."""
    n = len(e_bar) - 1
    ebar_n = float(e_bar[n])
    if end_energy < ebar_n:
        warnings.warn(
            f"end_energy {end_energy} is below the full-mask mean {ebar_n}; "
            f"the penalty will reward oversized portfolios",
            stacklevel=2,
        )
    return _solve_shift_scalar(ebar_n, n, k, end_energy)


def auto_end_energy(e_bar: np.ndarray, k: int) -> float:
    """Pick a full-mask anchor that roughly centers the shifted energy
    minimum on the target size.

    Fits e_bar(m) to q*m^2 - c*m and solves for the quad penalty that
    puts the combined parabola's vertex at k.  A floor keeps the penalty
    positive when the raw landscape already bends upward early.
    """
    n = len(e_bar) - 1
    m = np.arange(n + 1, dtype=np.float64)
    design = np.stack([m * m, m], axis=1)
    coef, *_ = np.linalg.lstsq(design, e_bar, rcond=None)
    curve_quad, curve_lin = float(coef[0]), float(coef[1])
    c = -curve_lin
    b = c / k - 2.0 * curve_quad
    floor = max(abs(c) / (10.0 * n), 1e-12)
    b = max(b, floor)
    return float(e_bar[n] + b * n * (n - k))


def apply_shift(raw: RawQubo, shift: ShiftParams) -> np.ndarray:
    """Fold the size penalty into the coefficients.

    Popcount m satisfies m = sum x_i and m^2 = sum x_i + 2 sum_{i<j}
    x_i x_j, so the penalty lands as lin+quad on the diagonal and quad
    on every ordered off-diagonal entry.
    """
    if shift.n != raw.n:
        raise ValueError(f"shift built for n={shift.n}, matrix has n={raw.n}")
    shifted = raw.q + shift.quad
    shifted[np.diag_indices(raw.n)] += shift.lin
    return shifted


def graduated_tune(
    prior: ShiftParams,
    observed_sizes,
    k: int,
    eta: float = DEFAULT_TUNE_ETA,
) -> ShiftParams:
    """Move the full-mask anchor in response to the sizes a sampler
    actually returned, then re-fit the penalty.

    Undersized medians raise end_energy (multiplicatively, step eta);
    the factor is floored so a positive anchor stays positive.
    """
    observed = list(observed_sizes)
    if not observed:
        raise ValueError("graduated_tune needs at least one observed size")
    med = statistics.median(observed)
    factor = 1.0 + eta * (k - med) / prior.n
    factor = max(factor, MIN_TUNE_FACTOR)
    new_end = prior.end_energy * factor
    return _solve_shift_scalar(prior.ebar_n, prior.n, k, new_end)


def scale(shifted: np.ndarray, shift: ShiftParams) -> ScaledQubo:
    """Multiply the shifted matrix onto the [-0.9, 0.9] range."""
    peak = float(np.abs(shifted).max())
    if peak == 0.0:
        raise ZeroMatrix("cannot scale an all-zero matrix")
    factor = SCALE_TARGET / peak
    return ScaledQubo(matrix=shifted * factor, scale=factor,
                      shift=shift, target_size=shift.target_size)


def build_scaled_qubo(
    model: MarketModel,
    k: int,
    weighting: Weighting = Weighting.PER_SIZE,
    lin_coeff: float | None = None,
    samples_per_size: int = DEFAULT_SAMPLES_PER_SIZE,
    end_energy: float | None = None,
    seed: int = 0,
) -> ScaledQubo:
    """Raw matrix -> sampled size-energy curve -> penalty -> scaling."""
    raw = build_raw_qubo(model, k, weighting, lin_coeff)
    e_bar = estimate_size_energy(raw, samples_per_size, seed)
    if end_energy is None:
        end_energy = auto_end_energy(e_bar, k)
    shift = solve_shift(e_bar, k, end_energy)
    return scale(apply_shift(raw, shift), shift)


def build_bigmatrix(
    model: MarketModel,
    sizes,
    weighting: Weighting = Weighting.PER_SIZE,
    lin_coeff: float | None = None,
    samples_per_size: int = DEFAULT_SAMPLES_PER_SIZE,
    end_energy: float | None = None,
    seed: int = 0,
) -> BigMatrix:
    """One calibrated, scaled QUBO per requested target size."""
    sizes = sorted(set(int(s) for s in sizes))
    if sizes and (sizes[0] < 2 or sizes[-1] > model.n - 1):
        raise BadSize(f"sizes {sizes[0]}..{sizes[-1]} outside [2, {model.n - 1}]")
    qubos = {
        k: build_scaled_qubo(model, k, weighting, lin_coeff,
                             samples_per_size, end_energy, seed)
        for k in sizes
    }
    return BigMatrix(qubos=qubos)


def to_ising(q: ScaledQubo, validate: bool = True) -> IsingModel:
    """Standard binary-to-spin substitution x = (s + 1) / 2.

    Raises RangeViolation (listing the offending indices) when a linear
    field leaves [-2, 2] or a coupling leaves [-0.9, 0.9].
    """
    mat = q.matrix
    n = q.n
    diag = np.diag(mat).copy()
    off_row_sums = mat.sum(axis=1) - diag
    h = diag / 2.0 + off_row_sums / 2.0
    offset = float(diag.sum() / 2.0)
    couplings = {}
    for i in range(n):
        for jj in range(i + 1, n):
            val = mat[i, jj] / 2.0
            if val != 0.0:
                couplings[(i, jj)] = float(val)
            offset += float(mat[i, jj] / 2.0)
    model = IsingModel(h=h, j=couplings, offset=offset)
    if validate:
        bad_h = [i for i in range(n) if not H_RANGE[0] <= h[i] <= H_RANGE[1]]
        bad_j = [pair for pair, val in couplings.items()
                 if not J_RANGE[0] <= val <= J_RANGE[1]]
        if bad_h or bad_j:
            raise RangeViolation(
                f"linear fields outside {list(H_RANGE)} at indices {bad_h}; "
                f"couplings outside {list(J_RANGE)} at pairs {bad_j}",
                linear_indices=bad_h,
                coupling_indices=bad_j,
            )
    return model


def refactor_energy(
    sample_energy: float,
    q: ScaledQubo,
    bits: np.ndarray,
    model: MarketModel,
    alpha: float = DEFAULT_ALPHA,
) -> tuple[float, float]:
    """Invert a sampled energy to (raw energy, exact net score).

    The net score is always recomputed from the mask through the scoring
    module: the matrix encodes only the quadratic surrogate, so the
    sampled energy is never trusted as a score.
    """
    bits = np.asarray(bits)
    m = int(bits.sum())
    if m == 0:
        raise EmptyPortfolio("cannot refactor an empty mask")
    raw = sample_energy / q.scale - q.shift.penalty(m)
    exact = exact_cqns(Portfolio(bits.astype(np.uint8)), model, alpha)
    return raw, exact


def export_qubo(q: ScaledQubo, path, seed: int | None = None,
                model_hash: str | None = None) -> None:
    """Write the scaled matrix as JSON: upper-triangular (i, j, value)
    triplets with the full pair weight on each off-diagonal entry.

    This file is the hand-off boundary for external annealing hardware;
    floats round-trip bit-exactly through the JSON encoder.
    """
    mat = q.matrix
    entries = []
    for i in range(q.n):
        entries.append([i, i, float(mat[i, i])])
        for jj in range(i + 1, q.n):
            entries.append([i, jj, float(2.0 * mat[i, jj])])
    doc = {
        "n": q.n,
        "target_size": q.target_size,
        "scale": q.scale,
        "shift": {
            "lin": q.shift.lin,
            "quad": q.shift.quad,
            "end_energy": q.shift.end_energy,
            "n": q.shift.n,
            "ebar_n": q.shift.ebar_n,
            "target_size": q.shift.target_size,
        },
        "entries": entries,
        "metadata": {"seed": seed, "model_hash": model_hash},
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def import_qubo(path) -> ScaledQubo:
    """Rebuild a ScaledQubo from an exported JSON document."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    n = int(doc["n"])
    mat = np.zeros((n, n))
    for i, jj, value in doc["entries"]:
        if i == jj:
            mat[i, i] = value
        else:
            mat[i, jj] = value / 2.0
            mat[jj, i] = value / 2.0
    s = doc["shift"]
    shift = ShiftParams(lin=s["lin"], quad=s["quad"], target_size=s["target_size"],
                        end_energy=s["end_energy"], n=s["n"], ebar_n=s["ebar_n"])
    return ScaledQubo(matrix=mat, scale=float(doc["scale"]), shift=shift,
                      target_size=int(doc["target_size"]))
