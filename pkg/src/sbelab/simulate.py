"""Coupled time stepping for the conservative Burgers field, the
multiplicative heat equation, and the growing height.

One Brownian family drives everything: per mode k the sampler draws the
exact Ornstein-Uhlenbeck stochastic integral together with the plain
increment of the same Brownian path, with their exact joint law, so the
velocity field sees the integrated noise while the height and the heat
equation see the raw increments of an identical realization.

All dynamics run in standard form (unit viscosity, noise strength 2);
`normalize_parameters` maps general coefficients onto that form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from sbelab.chaos import grid_variance_constant, wick_square
from sbelab.spectral import (
    Mollifier,
    SpectralField,
    TorusGrid,
    integrate_theta,
    sample_white_noise,
)

__all__ = [
    "CFL_GUARD",
    "HEIGHT_DRIFT_CONSTANT",
    "DEFAULT_MOLLIFIER",
    "SimConfig",
    "NormalizedParameters",
    "normalize_parameters",
    "StochasticIncrements",
    "NoiseTables",
    "make_noise_tables",
    "sample_noise_increments",
    "ou_step_exact",
    "SbeStepRecord",
    "sbe_step",
    "she_step",
    "kpz_height_step",
    "initial_state",
    "StateView",
    "PathRecord",
    "run_coupled",
    "EnsembleSummary",
    "run_ensemble",
]

# Abort threshold for |dt * lambda * 2 pi K * max|wick square||.  The formal
# advective estimate overstates the band-limited drift by an order of
# magnitude, and its max fluctuates with the largest Gaussian excursion of
# the squared field, so healthy runs range up to ~5; genuine blowups cross
# this within a few steps of turning unstable.
CFL_GUARD = 50.0

# The height's zero mode is driven by lambda * (spatial mean of the Wick
# square minus this constant): the growth renormalization subtracts the full
# bump norm, which exceeds the variance constant by exactly the k = 0 term.
HEIGHT_DRIFT_CONSTANT = 1.0

DEFAULT_MOLLIFIER = Mollifier()


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one coupled simulation.

    Times (`time_step`, `horizon`) are wall-clock values of the model; when
    viscosity != 1 or noise_strength != 2 the runner converts them to the
    standard clock s = viscosity * t internally and all recorded stamps are
    standard-clock values.
    """

    max_frequency: int = 128
    time_step: float = 1e-5
    horizon: float = 0.25
    coupling: float = 1.0
    viscosity: float = 1.0
    noise_strength: float = 2.0
    drift_level: int = 16
    noise_level: int | None = None  # defaults to drift_level
    seed: int = 0
    scheme: str = "euler"
    positivity: str = "permissive"

    def __post_init__(self) -> None:
        if self.time_step <= 0:
            raise ValueError("time_step must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.viscosity <= 0 or self.noise_strength <= 0:
            raise ValueError("viscosity and noise strength must be positive")
        if self.drift_level < 1:
            raise ValueError("drift_level must be a positive integer")
        if self.scheme not in ("exp", "euler"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.positivity not in ("strict", "permissive"):
            raise ValueError(f"unknown positivity mode {self.positivity!r}")
        if self.noise_level is None:
            object.__setattr__(self, "noise_level", self.drift_level)
        ln, n = self.noise_level, self.drift_level
        if ln < 1:
            raise ValueError("noise_level must be a positive integer")
        if ln != n and max(ln, n) < DEFAULT_MOLLIFIER.nesting_ratio * min(ln, n):
            raise ValueError(
                f"levels {n} and {ln} are neither equal nor nested "
                f"(ratio {DEFAULT_MOLLIFIER.nesting_ratio:g})"
            )


class NormalizedParameters(NamedTuple):
    """Standard-form coupling and the clock factor.

    A standard-clock duration s corresponds to model duration s * time_scale
    (time_scale = 1/viscosity); conversely a model duration t is simulated
    for t / time_scale standard seconds.  Field amplitudes map as
    u_std = sqrt(2 viscosity / noise_strength) * u.
    """

    coupling: float
    time_scale: float


def normalize_parameters(
    viscosity: float, noise_strength: float, coupling: float
) -> NormalizedParameters:
    """Reduce (viscosity, noise strength, coupling) to unit-viscosity,
    strength-2 form: the equivalent coupling is coupling * sqrt(D / (2 nu^3))."""
    if viscosity <= 0 or noise_strength <= 0:
        raise ValueError("viscosity and noise strength must be positive")
    lam = coupling * math.sqrt(noise_strength / (2.0 * viscosity**3))
    return NormalizedParameters(lam, 1.0 / viscosity)


class StochasticIncrements(NamedTuple):
    """Noise of one interval on the half spectrum (index 0 = mean mode).

    ou_kick[k] is the additive term of the exact Ornstein-Uhlenbeck update
    (the integrated, derivative-weighted noise; zero at k = 0); brownian[k]
    is the plain increment of the same Brownian mode, with the real zero
    mode stored in slot 0.
    """

    ou_kick: np.ndarray
    brownian: np.ndarray


class NoiseTables(NamedTuple):
    """Per-mode constants of the exact one-interval joint sampler."""

    dt: float
    decay: np.ndarray  # e^{-theta dt}, k = 0..K (1 at k = 0)
    j_std: float  # per-component std of the plain increment
    coupled: np.ndarray  # complex regression weight of ou_kick on brownian
    residual_std: np.ndarray  # conditional std of the remaining ou_kick part


def make_noise_tables(K: int, dt: float) -> NoiseTables:
    k = np.arange(K + 1)
    theta = (2.0 * np.pi * k) ** 2
    if dt == 0.0:
        zero = np.zeros(K + 1)
        return NoiseTables(0.0, np.ones(K + 1), 0.0, zero.astype(complex), zero)
    sigma = math.sqrt(2.0) * 2j * np.pi * k  # derivative-weighted noise factor
    with np.errstate(divide="ignore", invalid="ignore"):
        var_i = np.where(k > 0, -np.expm1(-2.0 * theta * dt) / (2.0 * theta), 0.0)
        cov = np.where(k > 0, -np.expm1(-theta * dt) / theta, 0.0)
    residual = np.maximum(var_i - cov**2 / dt, 0.0)
    return NoiseTables(
        dt=dt,
        decay=np.exp(-theta * dt),
        j_std=math.sqrt(dt / 2.0),
        coupled=sigma * (cov / dt),
        residual_std=np.sqrt(theta * residual),
    )


def sample_noise_increments(
    tables: NoiseTables, rng: np.random.Generator
) -> StochasticIncrements:
    """Draw one interval of coupled noise; fixed draw order for determinism."""
    K = tables.decay.size - 1
    j0 = rng.standard_normal() * math.sqrt(tables.dt)
    gj = rng.standard_normal((2, K))
    gi = rng.standard_normal((2, K))
    brownian = np.empty(K + 1, dtype=complex)
    brownian[0] = j0
    brownian[1:] = (gj[0] + 1j * gj[1]) * tables.j_std
    kick = np.zeros(K + 1, dtype=complex)
    kick[1:] = tables.coupled[1:] * brownian[1:] + tables.residual_std[1:] * (
        gi[0] + 1j * gi[1]
    )
    return StochasticIncrements(kick, brownian)


def ou_step_exact(
    u: SpectralField, dt: float, rng: np.random.Generator
) -> SpectralField:
    """Exact-in-law stationary Ornstein-Uhlenbeck update of every mode."""
    if not u.is_mean_zero:
        raise ValueError("the velocity field must be mean-zero")
    tables = make_noise_tables(u.grid.max_frequency, dt)
    inc = sample_noise_increments(tables, rng)
    return SpectralField(u.grid, tables.decay * u.c + inc.ou_kick)


class SbeStepRecord(NamedTuple):
    drift_increment: SpectralField
    brownian: np.ndarray  # full-step plain increments, slot 0 real


def _drift_coeffs(
    c_mid: np.ndarray, grid: TorusGrid, lam: float, dt: float, level: int
) -> tuple[np.ndarray, float]:
    """dt * lam * d/dx of the Wick square, plus its uncentered spatial mean.

    The derivative kills the mean mode, so no centering constant enters the
    drift; the raw mean is returned for the height bookkeeping.
    """
    w = DEFAULT_MOLLIFIER.weights(grid, level)
    sq = grid.synth(w * c_mid) ** 2
    guard = abs(dt * lam) * (2.0 * np.pi * grid.max_frequency) * np.abs(sq).max()
    if guard > CFL_GUARD:
        raise RuntimeError(
            f"drift increment too large for the explicit step: "
            f"|dt*lam*2piK*max(square)| = {guard:.3g} > {CFL_GUARD}"
        )
    c_sq = grid.analyze(sq)
    return dt * lam * grid.two_pi_k * 1j * c_sq, float(c_sq[0].real)


def sbe_step(
    u: SpectralField, cfg: SimConfig, rng: np.random.Generator
) -> tuple[SpectralField, SbeStepRecord]:
    """One Strang step: exact half flow, explicit Wick drift, exact half flow.

    The two half-interval Brownian increments are summed into the record so
    downstream equations can ride the same noise.
    """
    if not u.is_mean_zero:
        raise ValueError("the velocity field must be mean-zero")
    lam, scale = normalize_parameters(cfg.viscosity, cfg.noise_strength, cfg.coupling)
    dt = cfg.time_step / scale
    tables = make_noise_tables(u.grid.max_frequency, dt / 2.0)
    inc1 = sample_noise_increments(tables, rng)
    c = tables.decay * u.c + inc1.ou_kick
    dc, _ = _drift_coeffs(c, u.grid, lam, dt, cfg.drift_level)
    c = c + dc
    inc2 = sample_noise_increments(tables, rng)
    c = tables.decay * c + inc2.ou_kick
    record = SbeStepRecord(
        drift_increment=SpectralField(u.grid, dc),
        brownian=inc1.brownian + inc2.brownian,
    )
    return SpectralField(u.grid, c), record


def _she_factor(
    w_phys: np.ndarray, lam: float, dt: float, c_level: float, scheme: str
) -> np.ndarray:
    """Pointwise multiplicative noise factor of one heat-equation step."""
    if scheme == "euler":
        return 1.0 + math.sqrt(2.0) * lam * w_phys
    return np.exp(math.sqrt(2.0) * lam * w_phys - lam**2 * (1.0 + c_level) * dt)


def she_step(
    Z: SpectralField, cfg: SimConfig, noise: np.ndarray
) -> tuple[SpectralField, float]:
    """Mild multiplicative step driven by the shared increments.

    Multiplies in physical space by the scheme's noise factor (level-
    noise_level smoothed field built from `noise`, mean mode included) and
    applies the exact heat semigroup.  Returns the stepped field and the
    minimum of the multiplied physical field; in strict positivity mode a
    nonpositive minimum aborts the step.  The closing band projection can
    undershoot slightly below the reported minimum.
    """
    lam, scale = normalize_parameters(cfg.viscosity, cfg.noise_strength, cfg.coupling)
    dt = cfg.time_step / scale
    grid = Z.grid
    if lam == 0.0:
        decay = np.exp(-((2.0 * np.pi * grid.k) ** 2) * dt)
        return SpectralField(grid, decay * Z.c), float(Z.to_physical().min())
    w = DEFAULT_MOLLIFIER.weights(grid, cfg.noise_level)
    w_phys = grid.synth(w * noise)
    c_level = grid_variance_constant(DEFAULT_MOLLIFIER, grid, cfg.noise_level)
    z_phys = Z.to_physical() * _she_factor(w_phys, lam, dt, c_level, cfg.scheme)
    low = float(z_phys.min())
    if low <= 0.0 and cfg.positivity == "strict":
        raise RuntimeError(f"heat-equation field lost positivity (min {low:.3g})")
    decay = np.exp(-((2.0 * np.pi * grid.k) ** 2) * dt)
    return SpectralField(grid, decay * grid.analyze(z_phys)), low


def kpz_height_step(
    h: SpectralField,
    u: SpectralField,
    cfg: SimConfig,
    noise: np.ndarray,
    drift_mean: float | None = None,
) -> SpectralField:
    """Advance the height: slaved nonzero modes, explicitly grown zero mode.

    Nonzero modes are the primitive of u, coefficient for coefficient.  The
    zero mode gains dt * lam * (spatial mean of the Wick square minus the
    accounting constant) plus sqrt(2) times the mean Brownian increment; a
    precomputed quadrature value for the Wick-square mean may be passed to
    avoid recomputing it.
    """
    lam, scale = normalize_parameters(cfg.viscosity, cfg.noise_strength, cfg.coupling)
    dt = cfg.time_step / scale
    if drift_mean is None:
        drift_mean = float(
            wick_square(u, DEFAULT_MOLLIFIER, cfg.drift_level).c[0].real
        )
    c = integrate_theta(u).c.copy()
    c[0] = (
        h.c[0].real
        + dt * lam * (drift_mean - HEIGHT_DRIFT_CONSTANT)
        + math.sqrt(2.0) * noise[0].real
    )
    return SpectralField(h.grid, c)


def initial_state(
    cfg: SimConfig, rng: np.random.Generator
) -> tuple[SpectralField, SpectralField, SpectralField]:
    """Stationary-coupled start: white noise u, exponential-primitive Z, and
    the primitive height with zero mean."""
    grid = TorusGrid(max_frequency=cfg.max_frequency)
    lam, _ = normalize_parameters(cfg.viscosity, cfg.noise_strength, cfg.coupling)
    u0 = sample_white_noise(grid, rng)
    h0 = integrate_theta(u0)
    z0 = SpectralField.from_physical(grid, np.exp(lam * h0.to_physical()))
    return u0, z0, h0


@dataclass
class StateView:
    """Read-only window onto the running state, handed to observers.

    ``wick_coeffs`` holds the analyzed coefficients of the mid-step mollified
    square (entry 0 = raw spatial mean, before the variance subtraction) and
    ``drift_increment`` the resulting velocity increment; both are None while
    the nonlinearity is switched off.
    """

    t: float
    cfg: SimConfig
    grid: TorusGrid
    c_u: np.ndarray
    z_phys: np.ndarray
    h0: float
    lam: float
    wick_coeffs: np.ndarray | None = None
    drift_increment: np.ndarray | None = None

    def u_field(self) -> SpectralField:
        return SpectralField(self.grid, self.c_u)


@dataclass(frozen=True)
class PathRecord:
    """Sampled scalar observables of one simulation path."""

    times: np.ndarray
    values: dict[str, np.ndarray]
    final_u: np.ndarray
    final_z: np.ndarray
    final_h0: float
    positivity_violations: int
    noise_path: np.ndarray | None = None  # per-stamp cumulative increments

    def __post_init__(self) -> None:
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("record stamps must increase strictly")
        for name, arr in self.values.items():
            if arr.shape[0] != self.times.shape[0]:
                raise ValueError(f"observable {name!r} misaligned with stamps")


def run_coupled(
    cfg: SimConfig,
    rng: np.random.Generator,
    pairings: Sequence[SpectralField] = (),
    record_every: int = 1,
    per_step: Callable[[StateView], None] | None = None,
    extra_record: Callable[[StateView], dict[str, float]] | None = None,
    retain_noise: bool = False,
) -> PathRecord:
    """Run the coupled triple over the horizon on one noise realization.

    Records, every `record_every` steps (stamp 0 included): the velocity
    pairings u(phi_i) as "u:i", the accumulated drift pairings as "A:i", the
    height zero mode "h0", the spatial mean of log Z "logZ_mean", the running
    minimum monitor "z_min", and the cumulative mean-mode noise "B0".
    `per_step` fires once per step and sees the state before the step (left
    endpoint) together with that step's mollified-square coefficients and
    drift increment; the optional `extra_record` returns additional scalars
    at each stamp.  Stamps are standard-clock times.
    """
    lam, scale = normalize_parameters(cfg.viscosity, cfg.noise_strength, cfg.coupling)
    dt = cfg.time_step / scale
    horizon = cfg.horizon / scale
    n_steps = int(round(horizon / dt))
    grid = TorusGrid(max_frequency=cfg.max_frequency)
    K = grid.max_frequency

    u0, z0, h0f = initial_state(cfg, rng)
    c_u = u0.c.copy()
    z_phys = z0.to_physical()
    h0 = 0.0  # the height zero mode starts at zero by convention

    w_drift = DEFAULT_MOLLIFIER.weights(grid, cfg.drift_level)
    w_noise = DEFAULT_MOLLIFIER.weights(grid, cfg.noise_level)
    c_noise_level = grid_variance_constant(DEFAULT_MOLLIFIER, grid, cfg.noise_level)
    c_drift_level = grid_variance_constant(DEFAULT_MOLLIFIER, grid, cfg.drift_level)
    tables = make_noise_tables(K, dt / 2.0)
    heat_decay = np.exp(-((2.0 * np.pi * grid.k) ** 2) * dt)
    two_pi_k_i = grid.two_pi_k * 1j
    guard_scale = abs(dt * lam) * 2.0 * np.pi * K

    pair_conj = [np.conj(p.c) for p in pairings]

    def pair(coeffs: np.ndarray, pc: np.ndarray) -> float:
        return float(
            (coeffs[0] * pc[0]).real + 2.0 * np.sum(coeffs[1:] * pc[1:]).real
        )

    stamps = [0.0]
    series: dict[str, list[float]] = {
        **{f"u:{i}": [pair(c_u, pc)] for i, pc in enumerate(pair_conj)},
        **{f"A:{i}": [0.0] for i in range(len(pair_conj))},
        "h0": [h0],
        "logZ_mean": [float(np.log(z_phys).mean())],
        "z_min": [float(z_phys.min())],
        "B0": [0.0],
    }
    acc_A = [0.0] * len(pair_conj)
    B0 = 0.0
    violations = 0
    noise_rows = [np.zeros(K + 1, dtype=complex)] if retain_noise else None
    noise_acc = np.zeros(K + 1, dtype=complex)

    view = StateView(0.0, cfg, grid, c_u, z_phys, h0, lam)
    if extra_record is not None:
        for name, val in extra_record(view).items():
            series[name] = [val]

    sqrt2 = math.sqrt(2.0)
    for j in range(n_steps):
        t = j * dt
        inc1 = sample_noise_increments(tables, rng)
        c_mid = tables.decay * c_u + inc1.ou_kick
        if lam != 0.0:
            sq = grid.synth(w_drift * c_mid) ** 2
            if guard_scale * np.abs(sq).max() > CFL_GUARD:
                raise RuntimeError(
                    f"drift increment too large at step {j}: "
                    f"{guard_scale * np.abs(sq).max():.3g} > {CFL_GUARD}"
                )
            c_sq = grid.analyze(sq)
            dc = dt * lam * two_pi_k_i * c_sq
            wick_mean = float(c_sq[0].real) - c_drift_level
        else:
            c_sq = None
            dc = None
            wick_mean = 0.0

        if per_step is not None:
            # Left-endpoint state plus this step's (mid-point) drift data.
            view.t, view.c_u, view.z_phys, view.h0 = t, c_u, z_phys, h0
            view.wick_coeffs, view.drift_increment = c_sq, dc
            per_step(view)

        if dc is not None:
            c_mid = c_mid + dc
        inc2 = sample_noise_increments(tables, rng)
        c_u = tables.decay * c_mid + inc2.ou_kick

        brown = inc1.brownian + inc2.brownian
        h0 += dt * lam * (wick_mean - HEIGHT_DRIFT_CONSTANT) + sqrt2 * brown[0].real
        B0 += brown[0].real
        noise_acc = noise_acc + brown

        if lam != 0.0:
            z_phys = z_phys * _she_factor(
                grid.synth(w_noise * brown), lam, dt, c_noise_level, cfg.scheme
            )
            low = z_phys.min()
            if low <= 0.0:
                if cfg.positivity == "strict":
                    raise RuntimeError(
                        f"heat-equation field lost positivity at step {j} "
                        f"(min {low:.3g})"
                    )
                violations += 1
            z_phys = grid.synth(heat_decay * grid.analyze(z_phys))
        else:
            z_phys = grid.synth(heat_decay * grid.analyze(z_phys))
            low = z_phys.min()

        if dc is not None:
            for i, pc in enumerate(pair_conj):
                acc_A[i] += pair(dc, pc)

        if (j + 1) % record_every == 0 or j == n_steps - 1:
            stamps.append((j + 1) * dt)
            for i, pc in enumerate(pair_conj):
                series[f"u:{i}"].append(pair(c_u, pc))
                series[f"A:{i}"].append(acc_A[i])
            series["h0"].append(h0)
            series["logZ_mean"].append(float(np.log(np.maximum(z_phys, 1e-300)).mean()))
            series["z_min"].append(float(low))
            series["B0"].append(B0)
            if extra_record is not None:
                view.t, view.c_u, view.z_phys, view.h0 = (j + 1) * dt, c_u, z_phys, h0
                for name, val in extra_record(view).items():
                    series[name].append(val)
            if retain_noise:
                noise_rows.append(noise_acc.copy())

    return PathRecord(
        times=np.asarray(stamps),
        values={name: np.asarray(col) for name, col in series.items()},
        final_u=c_u.copy(),
        final_z=grid.analyze(z_phys),
        final_h0=h0,
        positivity_violations=violations,
        noise_path=np.asarray(noise_rows) if retain_noise else None,
    )


@dataclass(frozen=True)
class EnsembleSummary:
    """Stacked path observables of independent coupled runs."""

    config: SimConfig
    times: np.ndarray
    values: dict[str, np.ndarray]  # name -> (n_samples, n_stamps)
    final_u: np.ndarray  # (n_samples, K+1) complex
    final_z: np.ndarray  # (n_samples, K+1) complex
    n_samples: int

    def mean(self, name: str) -> np.ndarray:
        return self.values[name].mean(axis=0)

    def stderr(self, name: str) -> np.ndarray:
        v = self.values[name]
        return v.std(axis=0, ddof=1) / np.sqrt(v.shape[0])

    def variance(self, name: str) -> np.ndarray:
        return self.values[name].var(axis=0, ddof=1)


def run_ensemble(
    cfg: SimConfig,
    n_samples: int,
    pairings: Sequence[SpectralField] = (),
    record_every: int = 1,
    per_step_factory: Callable[[], Callable[[StateView], None]] | None = None,
    extra_record_factory: Callable[[], Callable[[StateView], dict[str, float]]]
    | None = None,
) -> EnsembleSummary:
    """Independent coupled runs from per-sample child streams of cfg.seed,
    aggregated in sample order (deterministic for a fixed config)."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    stacked: dict[str, list[np.ndarray]] = {}
    finals = []
    finals_z = []
    times = None
    for i in range(n_samples):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(i,)))
        try:
            rec = run_coupled(
                cfg,
                rng,
                pairings=pairings,
                record_every=record_every,
                per_step=per_step_factory() if per_step_factory else None,
                extra_record=extra_record_factory() if extra_record_factory else None,
            )
        except RuntimeError as exc:
            raise RuntimeError(f"sample {i} failed: {exc}") from exc
        if times is None:
            times = rec.times
        for name, col in rec.values.items():
            stacked.setdefault(name, []).append(col)
        finals.append(rec.final_u)
        finals_z.append(rec.final_z)
    return EnsembleSummary(
        config=cfg,
        times=times,
        values={name: np.vstack(cols) for name, cols in stacked.items()},
        final_u=np.vstack(finals),
        final_z=np.vstack(finals_z),
        n_samples=n_samples,
    )
