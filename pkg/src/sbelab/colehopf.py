"""Exponentiated-height bookkeeping for the coupled triple.

The multiplicative frame weighs everything by phi^L = e^{lam h^L} with
h^L = Theta * rho_bar^L * u the smoothed, mean-free height.  Tracked here are
the two correction processes of that frame -- the quadratic-variation
compensator Q^L and the pairing remainder R^L with its closed-form centering
constant -- together with the drift-slope regression that measures the
lam^3/12 clock shift between the height zero mode and the spatial mean of
log Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chaos import k_constant
from .pathstats import ScalarPath
from .simulate import (
    PathRecord,
    SimConfig,
    StateView,
    normalize_parameters,
    run_ensemble,
)
from .spectral import (
    Mollifier,
    SpectralField,
    TorusGrid,
    integrate_theta,
    mollify,
    variance_constant,
)

__all__ = [
    "DriftRegression",
    "EXP_GUARD",
    "MassObserver",
    "RemainderAccumulator",
    "drift_slope",
    "exp_height",
    "gradient_gap",
    "height_qv_density",
    "q_process",
    "r_process",
    "remainder_observers",
    "smoothed_height",
]

#: Largest |lam * h^L| the exponential weight accepts before overflowing.
EXP_GUARD = 700.0


def _checked_exp(arg: np.ndarray) -> np.ndarray:
    peak = float(np.max(np.abs(arg)))
    if peak > EXP_GUARD:
        raise OverflowError(
            f"exponentiated height overflows: |lam * h| reaches {peak:.3g} "
            f"(guard at {EXP_GUARD:g})"
        )
    return np.exp(arg)


def smoothed_height(u: SpectralField, m: Mollifier, level: int) -> SpectralField:
    """Mean-free height of the mollified velocity, Theta * (rho_bar^level * u)."""
    return integrate_theta(mollify(u, m, level))


def exp_height(
    u: SpectralField, m: Mollifier, level: int, coupling: float = 1.0
) -> SpectralField:
    """The weight e^{coupling * h^level} as a field on u's padded grid.

    The exponential is taken pointwise on the grid nodes and projected back to
    the represented band.  Raises OverflowError when the exponent exceeds
    EXP_GUARD anywhere, and rejects fields with a nonzero mean (the height is
    only defined up to its zero mode, which lives elsewhere).
    """
    if not u.is_mean_zero:
        raise ValueError("exp_height needs a mean-zero velocity field")
    h = smoothed_height(u, m, level).to_physical()
    return SpectralField.from_physical(u.grid, _checked_exp(coupling * h))


def height_qv_density(m: Mollifier, level: int) -> float:
    """Pointwise quadratic-variation density of the smoothed height.

    d[h^L(x)] = 2 ||rho_bar^L - 1||^2 dt and the Parseval sum of the kernel
    minus its mean is exactly 2 sum_{k != 0} rho_hat(k/L)^2 = 2 c_L.
    """
    return 2.0 * variance_constant(m, level)


# ---------------------------------------------------------------------------
# correction processes
# ---------------------------------------------------------------------------


@dataclass
class MassObserver:
    """Records the mollified mass S_t = <(rho_bar^level * u_t)^2, 1> at stamps.

    Attach as (an) ``extra_record`` to run_coupled / run_ensemble; the series
    key is "S:<level>".  This is the sufficient statistic q_process folds.
    """

    m: Mollifier
    level: int

    def __post_init__(self) -> None:
        self.key = f"S:{self.level}"
        self._w2: np.ndarray | None = None

    def record(self, view: StateView) -> dict[str, float]:
        if self._w2 is None:
            self._w2 = self.m.weights(view.grid, self.level) ** 2
        c = view.c_u[1:]
        return {self.key: float(2.0 * np.sum(self._w2[1:] * (c.real**2 + c.imag**2)))}


def q_process(path: PathRecord, m: Mollifier, level: int) -> ScalarPath:
    """The compensator Q_t = int_0^t (c_level + 2 - S_s) ds from a recorded path.

    Left-point quadrature on the record grid, so record_every=1 reproduces the
    stepper's own resolution.  The constant is ||rho_bar^level||^2 + 1 =
    c_level + 2: the kernel norm includes the zero mode the velocity never
    carries, which is why the ensemble-mean slope is 2 rather than 0.
    """
    key = f"S:{level}"
    if key not in path.values:
        raise ValueError(
            f"path lacks the mollified-mass series {key!r}; "
            "attach a MassObserver when running"
        )
    s = path.values[key]
    t = path.times
    const = variance_constant(m, level) + 2.0
    q = np.concatenate([[0.0], np.cumsum((const - s[:-1]) * np.diff(t))])
    return ScalarPath(t, q)


class RemainderAccumulator:
    """Online integrator of the pairing remainder R_t(phi).

    Per step (left endpoint, via run_coupled's per_step protocol) it adds

        dt * < phi_s^L * ( a_s - Pi_0 (u_s^L)^2 - lam^2 K_L ), phi >

    where a_s is the level-L smoothing of that step's quadratic drift rate
    (the recorded mollified-square coefficients, Theta-paired so only the
    mean-free part survives), phi_s^L = e^{lam h_s^L} is the exponentiated
    smoothed height, and K_L is the closed-form centering sum -- never a
    stochastic estimate.  With the nonlinearity off there are no recorded
    drift coefficients and the defining mollified integral of the left-point
    state is used instead, which makes the two realizations coincide by
    construction on identical states.

    ``record`` snapshots the running value and its running absolute supremum
    under "R:<level>" and "R:<level>:sup".
    """

    def __init__(
        self,
        m: Mollifier,
        level: int,
        phi: SpectralField,
        key: str | None = None,
    ) -> None:
        self.m = m
        self.level = int(level)
        self.phi = phi
        self.key = key if key is not None else f"R:{self.level}"
        self.value = 0.0
        self.sup_abs = 0.0
        self._ready = False

    def _prepare(self, view: StateView) -> None:
        grid = view.grid
        if self.phi.grid != grid:
            raise ValueError("phi must live on the simulation grid")
        w = self.m.weights(grid, self.level)
        theta = np.zeros(grid.max_frequency + 1, dtype=complex)
        theta[1:] = w[1:] / (1j * grid.two_pi_k[1:])
        self._w = w
        self._theta = theta
        self._w_drift = self.m.weights(grid, view.cfg.drift_level)
        self._center = view.lam**2 * k_constant(self.m, self.level)
        _, scale = normalize_parameters(
            view.cfg.viscosity, view.cfg.noise_strength, view.cfg.coupling
        )
        self._dt = view.cfg.time_step / scale
        self._phi_phys = self.phi.to_physical()
        self._ready = True

    def step(self, view: StateView) -> None:
        if not self._ready:
            self._prepare(view)
        grid = view.grid
        c = view.c_u
        u_l = grid.synth(self._w * c)
        weight = _checked_exp(view.lam * grid.synth(self._theta * c))
        c_sq = view.wick_coeffs
        if c_sq is None:
            c_sq = grid.analyze(grid.synth(self._w_drift * c) ** 2)
        paired = self._w * c_sq
        paired[0] = 0.0
        a = grid.synth(paired)
        b = u_l * u_l
        b -= b.mean()
        integrand = self._phi_phys * weight * (a - b - self._center)
        self.value += self._dt * float(integrand.mean())
        if abs(self.value) > self.sup_abs:
            self.sup_abs = abs(self.value)

    def record(self, view: StateView) -> dict[str, float]:
        return {self.key: self.value, f"{self.key}:sup": self.sup_abs}


def remainder_observers(
    make: Callable[[], RemainderAccumulator],
) -> tuple[Callable[[], Callable], Callable[[], Callable]]:
    """Factory pair for run_ensemble sharing one accumulator per sample.

    run_ensemble builds each sample's per-step observer before its recorder,
    so the recorder factory adopts the accumulator the step factory just made;
    a mismatch (recorder first, or reuse) fails loudly on the empty list.
    """
    pending: list[RemainderAccumulator] = []

    def per_step_factory() -> Callable[[StateView], None]:
        acc = make()
        pending.append(acc)
        return acc.step

    def extra_record_factory() -> Callable[[StateView], dict[str, float]]:
        return pending.pop().record

    return per_step_factory, extra_record_factory


def r_process(path: PathRecord, level: int) -> ScalarPath:
    """Extract the remainder path R_t accumulated while the run was live.

    The pairing function, mollifier and centering constant all entered
    through the RemainderAccumulator that wrote the series; this just lifts
    the record into a ScalarPath for decay studies.
    """
    key = f"R:{level}"
    if key not in path.values:
        raise ValueError(
            f"path lacks the drift-remainder series {key!r} (missing drift "
            "records); attach a RemainderAccumulator when running"
        )
    return ScalarPath(path.times, path.values[key])


# ---------------------------------------------------------------------------
# drift slope
# ---------------------------------------------------------------------------


def gradient_gap(
    c_u: np.ndarray,
    c_z: np.ndarray,
    grid: TorusGrid,
    coupling: float,
    band_divisor: int = 4,
) -> float:
    """Low-band H^{-1}-type distance between u and lam^{-1} d/dx log Z.

    sqrt( sum_{1 <= k <= K/band_divisor} 2 |u_k - v_k|^2 / (2 pi k)^2 ) with
    v the analyzed coefficients of coupling^{-1} d/dx log z.  The low band
    keeps the comparison away from the mollifier-dominated tail where the
    two fields are not expected to agree.
    """
    if coupling == 0.0:
        raise ValueError("gradient_gap divides by the coupling")
    k_band = grid.max_frequency // band_divisor
    if k_band < 1:
        raise ValueError(f"band K/{band_divisor} is empty at K={grid.max_frequency}")
    z = grid.synth(np.asarray(c_z, dtype=complex))
    if z.min() <= 0.0:
        raise ValueError("cannot take the log of a nonpositive heat field")
    log_c = grid.analyze(np.log(z))
    band = slice(1, k_band + 1)
    v = 1j * grid.two_pi_k[band] * log_c[band] / coupling
    diff = np.asarray(c_u)[band] - v
    return float(np.sqrt(np.sum(2.0 * np.abs(diff) ** 2 / grid.two_pi_k[band] ** 2)))


@dataclass(frozen=True)
class DriftRegression:
    """Least-squares summary of the height-vs-log-Z drift gap.

    ``stderr`` is the classical OLS error of the fitted slope; since the mean
    path's slope equals the mean of the per-sample slopes, ``sample_stderr``
    (spread of those slopes over sqrt(n)) is the honest ensemble error bar.
    """

    times: np.ndarray
    gap_mean: np.ndarray
    gap_stderr: np.ndarray
    slope: float
    stderr: float
    sample_stderr: float
    residuals: np.ndarray
    target: float
    gradient_error: float
    n_samples: int


def _regress(t: np.ndarray, y: np.ndarray) -> tuple[float, float, np.ndarray]:
    tc = t - t.mean()
    sxx = float(tc @ tc)
    slope = float(tc @ y / sxx)
    intercept = float(y.mean() - slope * t.mean())
    residuals = y - (intercept + slope * t)
    dof = max(t.size - 2, 1)
    stderr = math.sqrt(float(residuals @ residuals) / dof / sxx)
    return slope, stderr, residuals


def drift_slope(
    cfg: SimConfig,
    n_samples: int,
    record_every: int = 100,
    band_divisor: int = 4,
) -> DriftRegression:
    """Regress the ensemble-and-space mean of h_t - lam^{-1} log Z_t on t.

    The spatial mean of the height is its zero mode (the gradient part is
    mean-free), so the gap per sample is the recorded "h0" minus
    "logZ_mean" / lam, in the standard clock and standard coupling; the
    returned target is lam^3 / 12 in the same frame.  The gradient
    consistency of the two solutions at the final time is reported as a
    covariate (ensemble mean of gradient_gap).
    """
    if cfg.coupling == 0.0:
        raise ValueError(
            "the drift gap divides by the coupling; with lam = 0 use the "
            "additive height checks instead"
        )
    summary = run_ensemble(cfg, n_samples, record_every=record_every)
    lam, _ = normalize_parameters(cfg.viscosity, cfg.noise_strength, cfg.coupling)
    gaps = summary.values["h0"] - summary.values["logZ_mean"] / lam
    t = summary.times
    slope, stderr, residuals = _regress(t, gaps.mean(axis=0))

    tc = t - t.mean()
    per_sample = gaps @ tc / float(tc @ tc)
    sample_stderr = float(per_sample.std(ddof=1) / math.sqrt(n_samples))

    grid = TorusGrid(max_frequency=cfg.max_frequency)
    gradient_error = float(
        np.mean(
            [
                gradient_gap(summary.final_u[i], summary.final_z[i], grid, lam, band_divisor)
                for i in range(n_samples)
            ]
        )
    )
    return DriftRegression(
        times=t,
        gap_mean=gaps.mean(axis=0),
        gap_stderr=gaps.std(axis=0, ddof=1) / math.sqrt(n_samples),
        slope=slope,
        stderr=stderr,
        sample_stderr=sample_stderr,
        residuals=residuals,
        target=lam**3 / 12.0,
        gradient_error=gradient_error,
        n_samples=n_samples,
    )
