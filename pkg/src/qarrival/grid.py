"""Spatial lattice, wave packets, potential profiles, and discrete functionals.

All spatial integrals are plain Riemann sums with weight ``dx``.  Nodes sit at
cell centers, so a box that straddles the origin never places a node exactly
at x = 0 and the step profile is unambiguous there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ContainmentError

#: Maximum fraction of a packet's mass allowed outside the box at t = 0.
CONTAINMENT_TOL = 1e-6


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D lattice with half-cell node offset.

    Nodes are x_j = x_min + (j + 1/2) * dx for j = 0..n-1.  ``n`` must be
    even so the momentum grid used by spectral propagation is symmetric.
    """

    x_min: float
    x_max: float
    n: int

    @cached_property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @cached_property
    def x(self) -> np.ndarray:
        j = np.arange(self.n)
        return self.x_min + (j + 0.5) * self.dx

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers matching np.fft conventions."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def length(self) -> float:
        return self.x_max - self.x_min


def make_grid(x_min: float, x_max: float, n: int) -> Grid1D:
    """Validate and build a grid.

    Raises ConfigurationError for x_min >= x_max, n < 2, or odd n.
    """
    if not x_min < x_max:
        raise ConfigurationError(f"x_min ({x_min}) must be below x_max ({x_max})")
    if n < 2:
        raise ConfigurationError(f"need at least 2 nodes, got n={n}")
    if n % 2 != 0:
        raise ConfigurationError(f"node count must be even, got n={n}")
    return Grid1D(float(x_min), float(x_max), int(n))


@dataclass(frozen=True)
class ModelParams:
    """Physical and stepping parameters for a detection run.

    gamma is the detector coupling rate, tau the observation window, and dt
    the sampling/quadrature step used for time integrals of the arrival
    density.  Natural units hbar = mass = 1 are the defaults.
    """

    gamma: float
    tau: float
    dt: float
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigurationError(f"gamma must be >= 0, got {self.gamma}")
        if self.mass <= 0:
            raise ConfigurationError(f"mass must be > 0, got {self.mass}")
        if self.hbar <= 0:
            raise ConfigurationError(f"hbar must be > 0, got {self.hbar}")
        if not 0 < self.dt <= self.tau:
            raise ConfigurationError(
                f"dt must satisfy 0 < dt <= tau, got dt={self.dt}, tau={self.tau}"
            )

    def with_gamma(self, gamma: float) -> "ModelParams":
        return ModelParams(gamma, self.tau, self.dt, self.mass, self.hbar)


@dataclass(frozen=True)
class WaveFunction:
    """Complex amplitude field on a grid, Riemann-normalized.

    norm2 = sum |psi_j|^2 dx.  Instances are treated as immutable; evolution
    operations return new instances.
    """

    grid: Grid1D
    psi: np.ndarray

    def __post_init__(self):
        if self.psi.shape != (self.grid.n,):
            raise ConfigurationError(
                f"amplitude array shape {self.psi.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(self.psi)):
            raise ConfigurationError("wave function amplitudes must be finite")

    @property
    def norm2(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.dx)

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm2)

    def position_expectation(self) -> float:
        w = np.abs(self.psi) ** 2
        return float(np.sum(self.grid.x * w) * self.grid.dx / self.norm2)

    def momentum_expectation(self, hbar: float = 1.0) -> float:
        phat = np.fft.fft(self.psi)
        w = np.abs(phat) ** 2
        return float(hbar * np.sum(self.grid.k * w) / np.sum(w))


@dataclass(frozen=True)
class PotentialProfile:
    """Detector coupling shape V(x) on the grid.

    is_projector marks exact 0/1 profiles, for which V^2 = V holds entrywise
    and the fast product-form paths are valid.
    """

    grid: Grid1D
    values: np.ndarray
    is_projector: bool = field(default=False)

    def __post_init__(self):
        if self.values.shape != (self.grid.n,):
            raise ConfigurationError(
                f"profile shape {self.values.shape} does not match grid n={self.grid.n}"
            )
        if self.is_projector:
            v = self.values
            if not (np.isrealobj(v) or np.all(v.imag == 0)):
                raise ConfigurationError("projector profile must be real")
            if not np.all((v.real == 0) | (v.real == 1)):
                raise ConfigurationError("projector profile must be exactly 0/1")

    @property
    def is_real(self) -> bool:
        return bool(np.isrealobj(self.values) or np.all(self.values.imag == 0))


def step_indicator(grid: Grid1D) -> PotentialProfile:
    """Unit step on the negative half-axis: V = 1 where x < 0, else 0."""
    values = np.where(grid.x < 0, 1.0, 0.0)
    return PotentialProfile(grid, values, is_projector=True)


def gaussian_packet(grid: Grid1D, x0: float, p0: float, sigma: float,
                    hbar: float = 1.0) -> WaveFunction:
    """Normalized Gaussian packet centered at x0 with mean momentum p0.

    The packet must fit in the box: the analytic tail mass outside
    [x_min, x_max] may not exceed CONTAINMENT_TOL, otherwise spectral
    propagation would silently wrap it around.
    """
    if sigma <= 0:
        raise ConfigurationError(f"sigma must be > 0, got {sigma}")
    s2 = math.sqrt(2.0) * sigma
    tail = 0.5 * (math.erfc((grid.x_max - x0) / s2) + math.erfc((x0 - grid.x_min) / s2))
    if tail > CONTAINMENT_TOL:
        raise ContainmentError(
            f"packet tail mass outside the box is {tail:.3e} (> {CONTAINMENT_TOL:.0e}); "
            f"enlarge the box or move x0={x0}"
        )
    x = grid.x
    psi = np.exp(-((x - x0) ** 2) / (4.0 * sigma ** 2) + 1j * p0 * x / hbar)
    psi = psi / math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    return WaveFunction(grid, psi)


def region_probability(psi: WaveFunction, region: str) -> float:
    """Riemann sum of |psi|^2 dx over a sign region of the axis.

    region is one of "x<0", "x>0", "all".  The two half-axis sums partition
    the full sum exactly (same summands, half-offset nodes).
    """
    if region not in ("x<0", "x>0", "all"):
        raise ConfigurationError(f"unknown region {region!r}; use 'x<0', 'x>0' or 'all'")
    w = np.abs(psi.psi) ** 2
    neg = psi.grid.x < 0
    left = float(np.sum(w[neg])) * psi.grid.dx
    right = float(np.sum(w[~neg])) * psi.grid.dx
    if region == "x<0":
        return left
    if region == "x>0":
        return right
    # summing the two half-axis results keeps the partition identity exact
    return left + right


def edge_mass(psi: WaveFunction, cells_per_side: int | None = None) -> float:
    """Probability mass in the outermost cells, a wrap-around diagnostic."""
    n = psi.grid.n
    m = cells_per_side if cells_per_side is not None else max(2, n // 50)
    w = np.abs(psi.psi) ** 2
    return float((np.sum(w[:m]) + np.sum(w[-m:])) * psi.grid.dx)
