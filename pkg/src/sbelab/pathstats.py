"""Pathwise estimators for the probabilistic structure of the simulated paths.

Everything here consumes recorded scalar paths or coefficient ensembles and
produces numbers with a declared statistical meaning: the Russo-Vallois
quadratic variation with its epsilon-extrapolation rule, exact discrete
p-variation, moment-scaling Hoelder exponents, distributional tests of the
white-noise invariant law, and the Cauchy rate of the mollified quadratic
drift between nested cutoff levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .simulate import (
    SimConfig,
    make_noise_tables,
    normalize_parameters,
    sample_noise_increments,
)
from .spectral import (
    Mollifier,
    SpectralField,
    TorusGrid,
    derivative,
    inner,
    mollify,
    pointwise_product,
    sample_white_noise,
)

__all__ = [
    "CauchyRate",
    "HolderEstimate",
    "LawTestReport",
    "QvEstimate",
    "ScalarPath",
    "holder_exponent",
    "law_test_functions",
    "nonlinearity_cauchy_rate",
    "p_variation",
    "quadratic_variation",
    "white_noise_law_test",
    "wick_drift_pairing",
]

#: Relative tolerance for "this lag sits on the grid" checks.
_GRID_TOL = 1e-9

#: Relative change between consecutive epsilon estimates below which the
#: quadratic-variation extrapolation treats the pair as stable.
QV_STABILITY_THRESHOLD = 0.2


@dataclass(frozen=True)
class ScalarPath:
    """A scalar observable sampled on a uniform time grid.

    Parameters
    ----------
    times:
        Strictly increasing, uniformly spaced stamps (at least 3).
    values:
        One sample per stamp.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != x.shape:
            raise ValueError("times and values must be matching 1-d arrays")
        if t.size < 3:
            raise ValueError(f"need at least 3 stamps, got {t.size}")
        steps = np.diff(t)
        if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-8, atol=0.0):
            raise ValueError("stamps must increase by a uniform step")
        for arr in (t, x):
            arr.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", x)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def __len__(self) -> int:
        return int(self.times.size)


def _lag_steps(path: ScalarPath, lag: float) -> int:
    """Convert a time lag to a whole number of grid steps (or fail loudly)."""
    ratio = lag / path.step
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > _GRID_TOL * max(1.0, ratio):
        raise ValueError(
            f"lag {lag} is not a positive multiple of the grid step {path.step}"
        )
    if m >= len(path):
        raise ValueError(f"lag {lag} exceeds the recorded duration")
    return m


@dataclass(frozen=True)
class QvEstimate:
    """Russo-Vallois estimates per epsilon plus the declared extrapolation.

    ``stable`` records whether two consecutive epsilons agreed to within
    QV_STABILITY_THRESHOLD; when none do, the extrapolation falls back to the
    two smallest epsilons and says so here.
    """

    eps: np.ndarray
    estimates: np.ndarray
    extrapolated: float
    stable: bool


def quadratic_variation(path: ScalarPath, eps_list: Sequence[float]) -> QvEstimate:
    """Estimate [X]_T by (1/eps) sum (x_{j+eps/delta} - x_j)^2 delta per eps.

    The zero-epsilon value is a linear fit through the two smallest stable
    consecutive epsilons (relative change < 20%); with no stable pair the two
    smallest epsilons are used and the result is flagged unstable.
    """
    if len(eps_list) < 2:
        raise ValueError("need at least two epsilon values to extrapolate")
    eps = np.asarray(sorted(float(e) for e in eps_list))
    x = path.values
    delta = path.step
    estimates = np.empty(eps.size)
    for i, e in enumerate(eps):
        m = _lag_steps(path, e)
        inc = x[m:] - x[:-m]
        estimates[i] = float(np.sum(inc * inc) * delta / e)

    floor = 1e-300
    rel = np.abs(np.diff(estimates)) / np.maximum(
        np.maximum(np.abs(estimates[:-1]), np.abs(estimates[1:])), floor
    )
    stable_pairs = np.flatnonzero(rel < QV_STABILITY_THRESHOLD)
    if stable_pairs.size:
        i = int(stable_pairs[0])
        stable = True
    else:
        i = 0
        stable = False
    e1, e2 = eps[i], eps[i + 1]
    v1, v2 = estimates[i], estimates[i + 1]
    extrapolated = float(v1 - e1 * (v2 - v1) / (e2 - e1))
    return QvEstimate(eps=eps, estimates=estimates, extrapolated=extrapolated, stable=stable)


def p_variation(path: ScalarPath | np.ndarray, p: float) -> float:
    """Exact p-variation of the sampled path (supremum over all partitions).

    Dynamic programming over grid points: best[j] = max_i best[i] + |x_j - x_i|^p.
    For a discrete path the supremum is attained on a subset of the grid, so
    this is exact, at O(n^2) cost.  Accepts a bare value array as well since
    the time grid plays no role.
    """
    if p < 1.0:
        raise ValueError(f"p-variation needs p >= 1, got {p}")
    x = path.values if isinstance(path, ScalarPath) else np.asarray(path, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-d path with at least two points")
    best = np.zeros(x.size)
    for j in range(1, x.size):
        best[j] = float(np.max(best[:j] + np.abs(x[j] - x[:j]) ** p))
    return float(best[-1])


@dataclass(frozen=True)
class HolderEstimate:
    """Moment-scaling exponent estimate with its regression standard error."""

    exponent: float
    stderr: float
    lags: np.ndarray
    per_power: Mapping[float, tuple[float, float]]  # q -> (slope/q, se/q)


def holder_exponent(
    paths: Sequence[ScalarPath],
    lags: Sequence[float],
    powers: Sequence[float] = (2.0, 4.0),
) -> HolderEstimate:
    """Regress log E|X_{t+tau} - X_t|^q on log tau and average slope/q over q.

    Requires at least 50 paths on a common grid and lags spanning at least
    1.5 decades; expectations pool every admissible start index of every path.
    """
    if len(paths) < 50:
        raise ValueError(f"need at least 50 paths, got {len(paths)}")
    base = paths[0]
    for p in paths[1:]:
        if len(p) != len(base) or not np.allclose(p.times, base.times):
            raise ValueError("paths must share one time grid")
    lag_arr = np.asarray(sorted(float(v) for v in lags))
    if lag_arr.size < 3:
        raise ValueError("need at least three lags to regress")
    span = math.log10(lag_arr[-1] / lag_arr[0])
    if span < 1.5:
        raise ValueError(f"lags span {span:.2f} decades; need at least 1.5")

    values = np.stack([p.values for p in paths])
    log_tau = np.log(lag_arr)
    per_power: dict[float, tuple[float, float]] = {}
    estimates, variances = [], []
    for q in powers:
        log_moment = np.empty(lag_arr.size)
        for i, lag in enumerate(lag_arr):
            m = _lag_steps(base, lag)
            inc = values[:, m:] - values[:, :-m]
            log_moment[i] = math.log(float(np.mean(np.abs(inc) ** q)))
        slope, se = _ols_slope(log_tau, log_moment)
        per_power[float(q)] = (slope / q, se / q)
        estimates.append(slope / q)
        variances.append((se / q) ** 2)
    exponent = float(np.mean(estimates))
    stderr = float(np.sqrt(np.sum(variances)) / len(estimates))
    return HolderEstimate(
        exponent=exponent, stderr=stderr, lags=lag_arr, per_power=per_power
    )


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and its classical standard error."""
    xc = x - x.mean()
    sxx = float(np.sum(xc * xc))
    slope = float(np.sum(xc * y) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    dof = max(x.size - 2, 1)
    se = math.sqrt(float(np.sum(resid * resid)) / dof / sxx)
    return slope, se


# ---------------------------------------------------------------------------
# distributional law test
# ---------------------------------------------------------------------------


def law_test_functions(max_frequency: int) -> list[SpectralField]:
    """The five fixed pairing test functions used by white_noise_law_test.

    Chosen once and for all: two single harmonics, a two-mode mix, a function
    with a nonzero mean (so the mean-free projection in the target matters),
    and a broadband profile with summable tail.
    """
    if max_frequency < 4:
        raise ValueError("the fixed test set uses modes up to 3; need K >= 4")
    grid = TorusGrid(max_frequency=max_frequency)
    K = grid.max_frequency
    fields = []

    def build(fill) -> SpectralField:
        c = np.zeros(K + 1, dtype=complex)
        fill(c)
        return SpectralField(grid, c)

    fields.append(build(lambda c: c.__setitem__(1, 0.5)))  # cos(2 pi x)
    fields.append(build(lambda c: c.__setitem__(1, -0.5j)))  # sin(2 pi x)

    def two_mode(c):
        c[1] = 0.5
        c[2] = -0.25j

    def with_mean(c):
        c[0] = 1.0
        c[1] = 0.5
        c[3] = 0.2

    def broadband(c):
        k = np.arange(1, K + 1)
        c[1:] = 1.0 / (1.0 + k) ** 2

    fields.append(build(two_mode))
    fields.append(build(with_mean))
    fields.append(build(broadband))
    return fields


@dataclass(frozen=True)
class LawTestReport:
    """Outcome of the three-part white-noise law test at the 99% level."""

    n_samples: int
    variance_passed: np.ndarray  # per mode k = 1..K
    variance_pvalues: np.ndarray
    covariance_passed: np.ndarray  # per unordered mode pair
    pairing_passed: np.ndarray  # per fixed test function
    pairing_pvalues: np.ndarray

    @property
    def variance_pass_fraction(self) -> float:
        return float(np.mean(self.variance_passed))

    @property
    def covariance_pass_fraction(self) -> float:
        return float(np.mean(self.covariance_passed))


def white_noise_law_test(
    fields: Sequence[SpectralField] | np.ndarray, alpha: float = 0.01
) -> LawTestReport:
    """Check an ensemble of mean-zero fields against the white-noise law.

    Three ingredients, each at level ``alpha`` (two-sided where applicable):
    a per-mode chi-square test of E|c_k|^2 = 1 (2n V_k ~ chi^2(2n)), a
    pairwise covariance test of E[c_k conj(c_l)] = 0, and a variance test of
    the pairing u(phi) against <phi - mean, phi - mean> for the five fixed
    functions from law_test_functions.
    """
    if isinstance(fields, np.ndarray):
        coeffs = np.asarray(fields, dtype=complex)
    else:
        coeffs = np.stack([f.c for f in fields])
    n, bands = coeffs.shape
    if n < 100:
        raise ValueError(f"need at least 100 samples, got {n}")
    K = bands - 1

    # Per-mode variance: under the law, 2n * mean|c_k|^2 ~ chi^2(2n).
    v_bar = np.mean(np.abs(coeffs[:, 1:]) ** 2, axis=0)
    stat = 2.0 * n * v_bar
    cdf = stats.chi2.cdf(stat, df=2 * n)
    var_pvalues = 2.0 * np.minimum(cdf, 1.0 - cdf)
    var_passed = var_pvalues >= alpha

    # Pairwise covariance: mean c_k conj(c_l) has independent N(0, 1/(2n))
    # parts under the law, so 2n |mean|^2 ~ chi^2(2).
    cross = coeffs[:, 1:].T @ np.conj(coeffs[:, 1:]) / n
    iu = np.triu_indices(K, k=1)
    cov_stat = 2.0 * n * np.abs(cross[iu]) ** 2
    cov_passed = cov_stat <= stats.chi2.ppf(1.0 - alpha, df=2)

    # Fixed pairings: u(phi) is N(0, ||phi - mean||^2), n of them give chi^2(n).
    pair_pvalues = np.empty(5)
    for i, phi in enumerate(law_test_functions(K)):
        pc = phi.c
        vals = (coeffs[:, 0] * pc[0]).real + 2.0 * (coeffs[:, 1:] @ np.conj(pc[1:])).real
        target = float(2.0 * np.sum(np.abs(pc[1:]) ** 2))
        s = float(np.sum(vals * vals) / target)
        c = stats.chi2.cdf(s, df=n)
        pair_pvalues[i] = 2.0 * min(c, 1.0 - c)
    pair_passed = pair_pvalues >= alpha

    return LawTestReport(
        n_samples=n,
        variance_passed=var_passed,
        variance_pvalues=var_pvalues,
        covariance_passed=cov_passed,
        pairing_passed=pair_passed,
        pairing_pvalues=pair_pvalues,
    )


# ---------------------------------------------------------------------------
# mollification Cauchy rate
# ---------------------------------------------------------------------------


def wick_drift_pairing(
    u: SpectralField, m: Mollifier, level: int, phi: SpectralField
) -> float:
    """<d/dx (rho_bar^level * u)^2, phi>, the instantaneous quadratic drift.

    The centering constant is spatially flat, so it never reaches the
    derivative and the plain square can be paired directly.
    """
    ul = mollify(u, m, level)
    return inner(derivative(pointwise_product(ul, ul)), phi)


@dataclass(frozen=True)
class CauchyRate:
    """Log-log rate of E[D_N^2] over nested cutoff pairs (N, 2N)."""

    levels: np.ndarray
    mean_sq: np.ndarray
    stderr: np.ndarray
    slope: float
    slope_stderr: float
    n_samples: int


def nonlinearity_cauchy_rate(
    cfg: SimConfig,
    levels: Sequence[int],
    phi: SpectralField,
    n_samples: int,
) -> CauchyRate:
    """Cauchy rate of the time-integrated quadratic drift across cutoffs.

    For each sample one stationary linear path (exact transition sampling)
    drives every level, so the per-pair difference

        D_N = sup_{t <= T} | int_0^t <d/dx (u_s^{2N})^{o2} - d/dx (u_s^N)^{o2}, phi> ds |

    isolates the mollification error alone; returned is the least-squares
    slope of log E[D_N^2] against log N.  Left-point quadrature at the
    configured step, which therefore must resolve the relaxation time of the
    fastest retained mode pair.
    """
    lvl = [int(v) for v in levels]
    if sorted(lvl) != lvl or len(lvl) < 2:
        raise ValueError("levels must be an increasing list of at least two cutoffs")
    for a, b in zip(lvl, lvl[1:]):
        if b != 2 * a:
            raise ValueError(f"levels must double at each step, got {a} -> {b}")
    K = cfg.max_frequency
    if 2 * lvl[-1] > K:
        raise ValueError(
            f"comparison level {2 * lvl[-1]} exceeds the frequency band K={K}"
        )

    grid = TorusGrid(max_frequency=K)
    if phi.grid != grid:
        raise ValueError("phi must live on the run's grid")
    lam, scale = normalize_parameters(cfg.viscosity, cfg.noise_strength, cfg.coupling)
    dt = cfg.time_step / scale
    n_steps = int(round(cfg.horizon / scale / dt))
    tables = make_noise_tables(K, dt)

    modes = [int(j) for j in np.flatnonzero(np.abs(phi.c[1:])) + 1]
    if not modes:
        raise ValueError("phi has no nonzero oscillating mode to pair against")
    phi_conj = {j: np.conj(phi.c[j]) for j in modes}
    all_levels = lvl + [2 * lvl[-1]]
    k_signed = np.abs(np.arange(-K, K + 1))
    m = Mollifier()
    w_full = {n_lvl: m.profile(k_signed / n_lvl) for n_lvl in all_levels}

    def drift_value(full: np.ndarray, n_lvl: int) -> float:
        a = full * w_full[n_lvl]
        total = 0.0
        for j in modes:
            seg = a[j:]
            conv = np.dot(seg, seg[::-1])
            total += 2.0 * ((2j * np.pi * j) * conv * phi_conj[j]).real
        return lam * total

    sup_sq = np.zeros((n_samples, len(lvl)))
    for s in range(n_samples):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(s,)))
        c = sample_white_noise(grid, rng).c.copy()
        acc = np.zeros(len(all_levels))
        diff_sup = np.zeros(len(lvl))
        for _ in range(n_steps):
            full = np.concatenate([np.conj(c[:0:-1]), c])
            for i, n_lvl in enumerate(all_levels):
                acc[i] += dt * drift_value(full, n_lvl)
            np.maximum(diff_sup, np.abs(acc[1:] - acc[:-1]), out=diff_sup)
            inc = sample_noise_increments(tables, rng)
            c = tables.decay * c + inc.ou_kick
        sup_sq[s] = diff_sup**2

    mean_sq = sup_sq.mean(axis=0)
    stderr = sup_sq.std(axis=0, ddof=1) / math.sqrt(n_samples)
    slope, slope_se = _ols_slope(np.log(np.asarray(lvl, dtype=float)), np.log(mean_sq))
    return CauchyRate(
        levels=np.asarray(lvl),
        mean_sq=mean_sq,
        stderr=stderr,
        slope=slope,
        slope_stderr=slope_se,
        n_samples=n_samples,
    )
