"""Fourier-side field algebra on the unit circle.

Conventions used throughout the package (torus of length 1):

* analysis        c_k = integral_0^1 u(x) e^{-2 pi i k x} dx
* synthesis       u(x) = sum_{|k| <= K} c_k e^{+2 pi i k x}
* derivative      multiply mode k by (2 pi i k)
* Laplacian       multiply mode k by -(2 pi k)^2
* antiderivative  multiply mode k by 1/(2 pi i k) for k != 0, drop the mean
                  (the kernel of this multiplier is Theta(x) = 1/2 - x on [0,1))

Real fields are stored through the half spectrum ``c[0..K]``; the negative
modes are implied by Hermitian symmetry ``c_{-k} = conj(c_k)``, so realness is
structural and cannot be violated by construction.  Physical values live on a
uniform grid of ``M`` points with ``M >= 3K + 1``, which makes the quadratic
product of two represented fields alias-free on the retained band (a product
of two K-band fields has band 2K; a padded transform of size >= 3K + 1 keeps
every aliased image off the retained modes).

Parseval with this storage: ||u||^2_{L^2} = c_0^2 + 2 sum_{k>=1} |c_k|^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TorusGrid",
    "SpectralField",
    "Mollifier",
    "sample_white_noise",
    "mollify",
    "integrate_theta",
    "derivative",
    "pointwise_product",
    "inner",
    "norm_l2_sq",
    "variance_constant",
]


def _padded_size(max_frequency: int) -> int:
    """Smallest power of two >= 3K + 1 (alias-free quadratic products)."""
    n = 1
    while n < 3 * max_frequency + 1:
        n *= 2
    return n


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the unit circle with a symmetric frequency band.

    Parameters
    ----------
    max_frequency:
        Largest retained wavenumber K; represented modes are k = -K..K.
    num_points:
        Number of physical nodes M.  Defaults to the smallest power of two
        >= 3K + 1 so that quadratic products are exactly de-aliased.  Must
        satisfy M >= 2K + 1 (injective sampling of the represented band).

    Precomputed arrays (read-only): ``k`` (0..K), ``two_pi_k``, ``laplacian``
    (the multiplier -(2 pi k)^2) and the node positions ``x``.
    """

    max_frequency: int
    num_points: int = 0
    k: np.ndarray = field(init=False, repr=False, compare=False)
    two_pi_k: np.ndarray = field(init=False, repr=False, compare=False)
    laplacian: np.ndarray = field(init=False, repr=False, compare=False)
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        K = int(self.max_frequency)
        if K < 1:
            raise ValueError(f"max_frequency must be >= 1, got {K}")
        M = int(self.num_points) or _padded_size(K)
        if M < 2 * K + 1:
            raise ValueError(f"num_points={M} < 2K+1={2 * K + 1}")
        object.__setattr__(self, "max_frequency", K)
        object.__setattr__(self, "num_points", M)
        k = np.arange(K + 1)
        for name, arr in (
            ("k", k),
            ("two_pi_k", 2.0 * np.pi * k),
            ("laplacian", -((2.0 * np.pi * k) ** 2)),
            ("x", np.arange(M) / M),
        ):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def spacing(self) -> float:
        return 1.0 / self.num_points

    @property
    def dealiased(self) -> bool:
        """Whether quadratic products are alias-free on this grid."""
        return self.num_points >= 3 * self.max_frequency + 1

    # --- raw-array transform kernels (shared by the simulator hot loops) ---

    def synth(self, c: np.ndarray) -> np.ndarray:
        """Physical values on the M nodes from half-spectrum coefficients."""
        spec = np.zeros(self.num_points // 2 + 1, dtype=complex)
        spec[: self.max_frequency + 1] = c
        return np.fft.irfft(spec * self.num_points, n=self.num_points)

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Half-spectrum coefficients c_0..c_K from M physical node values."""
        return np.fft.rfft(values)[: self.max_frequency + 1] / self.num_points


@dataclass(frozen=True)
class SpectralField:
    """A real periodic field as half-spectrum coefficients on a grid.

    ``c[k]`` holds the coefficient of e^{2 pi i k x} for k = 0..K; negative
    modes are conj-implied.  c[0] must be real (it is the spatial mean).
    Instances are immutable; the coefficient array is frozen on construction.
    """

    grid: TorusGrid
    c: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=complex)
        if c.shape != (self.grid.max_frequency + 1,):
            raise ValueError(
                f"coefficient array has shape {c.shape}, "
                f"expected ({self.grid.max_frequency + 1},)"
            )
        if c[0].imag != 0.0:
            raise ValueError("mean coefficient c_0 must be real")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "c", c)

    @property
    def is_mean_zero(self) -> bool:
        return self.c[0] == 0

    def coeff(self, k: int) -> complex:
        """Coefficient of mode k for signed k (Hermitian for k < 0)."""
        if abs(k) > self.grid.max_frequency:
            return 0.0 + 0.0j
        return complex(self.c[k]) if k >= 0 else complex(np.conj(self.c[-k]))

    def to_physical(self) -> np.ndarray:
        return self.grid.synth(self.c)

    @classmethod
    def from_physical(cls, grid: TorusGrid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.num_points,):
            raise ValueError(
                f"expected {grid.num_points} node values, got shape {values.shape}"
            )
        c = grid.analyze(values)
        c[0] = c[0].real  # rounding can leave ~1e-18i on the mean
        return cls(grid, c)

    def spatial_mean(self) -> float:
        return float(self.c[0].real)


@dataclass(frozen=True)
class Mollifier:
    """Even smoothing kernel given by its Fourier profile rho_hat.

    The profile equals exactly 1 on ``|xi| <= plateau_radius``, decays to
    exactly 0 at ``|xi| = support_radius`` through the C^2 quintic smoothstep
    s^3 (10 - 15 s + 6 s^2), and vanishes beyond.  Acting at level L multiplies
    mode k by ``profile(k / L)``.

    The default (plateau 1/2, support 1) has nesting ratio 2: for N >= 2L the
    level-N profile is exactly 1 wherever the level-L profile is nonzero, so
    mollifying at N after L reproduces the level-L result bit for bit.
    """

    plateau_radius: float = 0.5
    support_radius: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.plateau_radius < self.support_radius):
            raise ValueError(
                f"need 0 < plateau {self.plateau_radius} < support {self.support_radius}"
            )

    def profile(self, xi) -> np.ndarray:
        """rho_hat evaluated elementwise (exact 1.0 / 0.0 off the ramp)."""
        xi = np.abs(np.asarray(xi, dtype=float))
        s = (xi - self.plateau_radius) / (self.support_radius - self.plateau_radius)
        s = np.clip(s, 0.0, 1.0)
        ramp = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        return np.where(xi <= self.plateau_radius, 1.0, np.where(xi >= self.support_radius, 0.0, ramp))

    def weights(self, grid: TorusGrid, level: int) -> np.ndarray:
        """profile(k / level) on the grid's half spectrum k = 0..K."""
        if level < 1:
            raise ValueError(f"level must be a positive integer, got {level}")
        return self.profile(grid.k / level)

    @property
    def nesting_ratio(self) -> float:
        """Smallest N/L making level-N-after-level-L exact (= support/plateau)."""
        return self.support_radius / self.plateau_radius


def sample_white_noise(grid: TorusGrid, rng: np.random.Generator) -> SpectralField:
    """Mean-zero spatial white noise: c_0 = 0, c_k = (g1 + i g2)/sqrt(2).

    Each nonzero mode has E|c_k|^2 = 1, so pairings satisfy
    E[eta(phi) eta(psi)] = <phi - mean(phi), psi - mean(psi)>_{L^2}.
    """
    K = grid.max_frequency
    g = rng.standard_normal((2, K))
    c = np.empty(K + 1, dtype=complex)
    c[0] = 0.0
    c[1:] = (g[0] + 1j * g[1]) / np.sqrt(2.0)
    return SpectralField(grid, c)


def mollify(u: SpectralField, m: Mollifier, level: int) -> SpectralField:
    """Multiply mode k by the level-``level`` profile value rho_hat(k/level)."""
    return SpectralField(u.grid, u.c * m.weights(u.grid, level))


def integrate_theta(u: SpectralField) -> SpectralField:
    """Antiderivative with kernel Theta(x) = 1/2 - x: c_k / (2 pi i k), mean dropped.

    The spectral derivative of the result recovers the mean-free part of the
    input (up to floating-point rounding in the multiplier round trip).
    """
    c = np.empty_like(u.c)
    c[0] = 0.0
    c[1:] = u.c[1:] / (1j * u.grid.two_pi_k[1:])
    return SpectralField(u.grid, c)


def derivative(u: SpectralField) -> SpectralField:
    """Spectral derivative: multiply mode k by 2 pi i k."""
    return SpectralField(u.grid, u.c * (1j * u.grid.two_pi_k))


def pointwise_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Exact truncated product of two fields on the shared (padded) grid.

    Computed physically on the grid's M nodes and transformed back; with
    M >= 3K + 1 no aliased image of the degree-2K product lands on the
    retained band, so the retained coefficients equal the exact convolution
    sum_{|j|<=K, |k-j|<=K} f_j g_{k-j}.
    """
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    if not f.grid.dealiased:
        raise ValueError(
            f"grid with M={f.grid.num_points} < 3K+1={3 * f.grid.max_frequency + 1} "
            "cannot form alias-free products"
        )
    return SpectralField.from_physical(f.grid, f.to_physical() * g.to_physical())


def inner(f: SpectralField, g: SpectralField) -> float:
    """L^2 pairing <f, g> = f_0 g_0 + 2 Re sum_{k>=1} f_k conj(g_k)."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return float(
        f.c[0].real * g.c[0].real
        + 2.0 * np.sum(f.c[1:] * np.conj(g.c[1:])).real
    )


def norm_l2_sq(u: SpectralField) -> float:
    """Parseval: ||u||^2 = c_0^2 + 2 sum_{k>=1} |c_k|^2."""
    return float(u.c[0].real ** 2 + 2.0 * np.sum(np.abs(u.c[1:]) ** 2))


def variance_constant(m: Mollifier, level: int, k_max: int | None = None) -> float:
    """Pointwise variance sum c_L = sum_{k != 0} rho_hat(k/L)^2.

    This is the variance of the level-``level`` mollified field at any point
    when the nonzero modes are unit-variance (the white-noise normalization).
    ``k_max`` defaults to the full support (every nonzero term included);
    passing a smaller band raises unless it still covers the support.
    """
    support = int(np.ceil(m.support_radius * level))
    if k_max is None:
        k_max = support
    elif k_max < support:
        raise ValueError(
            f"k_max={k_max} truncates the profile support (need >= {support})"
        )
    k = np.arange(1, k_max + 1)
    return float(2.0 * np.sum(m.profile(k / level) ** 2))
