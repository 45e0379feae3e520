"""Fourier representation of scalar fields on the 2-torus [0, 2pi]^2.

Convention: f(x) = sum_k fhat_k exp(i k.x) with no normalization on the sum,
so symbol multipliers act literally on the coefficients.  Coefficients are
stored as full complex n x n arrays in numpy FFT layout (integer wavenumbers
from fftfreq).  The forward transform divides by n^2.

Real fields satisfy fhat(-k) = conj(fhat(k)); complex-valued fields (e.g.
eigenfunctions of the linearized operator) use the same storage without the
symmetry.  Mean-free fields have fhat(0,0) = 0 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DataError, DomainError, SymmetryError

TWO_PI = 2.0 * np.pi

#: Relative tolerance used when classifying a field as conjugate-symmetric.
SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform n x n collocation grid on [0, 2pi]^2, n even."""

    n: int

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < 8:
            raise DomainError(f"grid size must be even and >= 8, got n={self.n}")

    @property
    def dx(self) -> float:
        return TWO_PI / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @cached_property
    def k1(self) -> np.ndarray:
        """Integer wavenumber along axis 0, broadcast to (n, n)."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        return np.broadcast_to(k[:, None], (self.n, self.n))

    @cached_property
    def k2(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        return np.broadcast_to(k[None, :], (self.n, self.n))

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.hypot(self.k1, self.k2)

    @property
    def dealias_radius(self) -> int:
        return self.n // 3

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True where max(|k1|,|k2|) <= n/3 (modes kept by the 2/3 rule)."""
        r = self.dealias_radius
        return (np.abs(self.k1) <= r) & (np.abs(self.k2) <= r)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True away from the k_i = -n/2 rows (where odd derivatives are ill-defined)."""
        ny = -(self.n // 2)
        return (self.k1 != ny) & (self.k2 != ny)


@dataclass
class SpectralField:
    """Scalar field stored as Fourier coefficients; treat as immutable."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.grid.n, self.grid.n):
            raise DataError(
                f"coefficient array shape {self.coeffs.shape} does not match n={self.grid.n}"
            )
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    @property
    def mean_free(self) -> bool:
        return self.coeffs[0, 0] == 0.0

    def is_real_symmetric(self, rtol: float = SYMMETRY_RTOL) -> bool:
        c = self.coeffs
        reflected = np.roll(c[::-1, ::-1], (1, 1), axis=(0, 1))
        scale = np.linalg.norm(c)
        if scale == 0.0:
            return True
        return np.linalg.norm(reflected.conj() - c) <= rtol * scale

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())


@dataclass
class PhysicalField:
    """Real collocation values on the n x n grid, values[i1, i2] = f(x1_i1, x2_i2)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.n, self.grid.n):
            raise DataError(
                f"value array shape {self.values.shape} does not match n={self.grid.n}"
            )


def meshgrid(grid: GridSpec):
    """Collocation coordinates (X1, X2), each (n, n), x1 along axis 0."""
    return np.meshgrid(grid.x, grid.x, indexing="ij")


# -- transforms --------------------------------------------------------------

def forward(p: PhysicalField) -> SpectralField:
    """Physical values -> Fourier coefficients (divides by n^2).

    A mean that is negligible against the field magnitude (rounding noise of
    analytically mean-free data) is snapped to exactly zero.
    """
    if not np.all(np.isfinite(p.values)):
        raise DataError("physical field contains non-finite values")
    c = np.fft.fft2(p.values) / p.grid.n**2
    scale = np.max(np.abs(c))
    if scale > 0 and np.abs(c[0, 0]) <= 1e-13 * scale:
        c[0, 0] = 0.0
    return SpectralField(p.grid, c)


def inverse(s: SpectralField, rtol: float = SYMMETRY_RTOL) -> PhysicalField:
    """Fourier coefficients -> real physical values; rejects asymmetric input."""
    v = np.fft.ifft2(s.coeffs) * s.grid.n**2
    scale = np.max(np.abs(v))
    if scale > 0 and np.max(np.abs(v.imag)) > rtol * scale:
        raise SymmetryError(
            "conjugate symmetry broken: imaginary residue "
            f"{np.max(np.abs(v.imag)) / scale:.3e} of field magnitude"
        )
    return PhysicalField(s.grid, np.ascontiguousarray(v.real))


def to_values(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Complex collocation values of a coefficient array (no symmetry check)."""
    return np.fft.ifft2(coeffs) * n**2


def to_coeffs(values: np.ndarray, n: int) -> np.ndarray:
    return np.fft.fft2(values) / n**2


def from_values(grid: GridSpec, values: np.ndarray) -> SpectralField:
    """Convenience: real values -> SpectralField."""
    return forward(PhysicalField(grid, np.asarray(values, dtype=np.float64)))


# -- symbol multipliers -------------------------------------------------------

def lambda_pow(s: SpectralField, a: float) -> SpectralField:
    """Fractional dissipation symbol |k|^a; a < 0 requires a mean-free field."""
    if a < 0 and not s.mean_free:
        raise DomainError("lambda_pow with negative exponent requires a mean-free field")
    g = s.grid
    with np.errstate(divide="ignore"):
        mult = np.where(g.kmag > 0, g.kmag**a, 0.0)
    return SpectralField(g, s.coeffs * mult)


def riesz(s: SpectralField, j: int) -> SpectralField:
    """Riesz transform R_j = d_j Lambda^{-1}, symbol i k_j / |k|."""
    if not s.mean_free:
        raise DomainError("riesz transform requires a mean-free field")
    g = s.grid
    kj = g.k1 if j == 1 else g.k2 if j == 2 else None
    if kj is None:
        raise DomainError(f"riesz component must be 1 or 2, got {j}")
    with np.errstate(divide="ignore", invalid="ignore"):
        mult = np.where(g.kmag > 0, 1j * kj / g.kmag, 0.0)
    # odd symbol: zero the Nyquist rows
    return SpectralField(g, s.coeffs * mult * g.nyquist_mask)


def velocity_from_theta(s: SpectralField):
    """Velocity (R2 theta, -R1 theta) induced by the scalar."""
    u1 = riesz(s, 2)
    u2 = riesz(s, 1)
    u2.coeffs = -u2.coeffs
    return u1, u2


def derivative(s: SpectralField, j: int) -> SpectralField:
    """Partial derivative d_j, symbol i k_j, Nyquist row zeroed."""
    g = s.grid
    kj = g.k1 if j == 1 else g.k2 if j == 2 else None
    if kj is None:
        raise DomainError(f"derivative direction must be 1 or 2, got {j}")
    return SpectralField(g, s.coeffs * (1j * kj) * g.nyquist_mask)


def dealias(s: SpectralField) -> SpectralField:
    """2/3-rule projection: zero modes with max(|k1|,|k2|) > n/3."""
    return SpectralField(s.grid, s.coeffs * s.grid.dealias_mask)


def project_mean_free(s: SpectralField) -> SpectralField:
    c = s.coeffs.copy()
    c[0, 0] = 0.0
    return SpectralField(s.grid, c)


def embed(s: SpectralField, grid: GridSpec) -> SpectralField:
    """Zero-pad a field onto a finer grid (same wavenumber content)."""
    if grid.n < s.grid.n:
        raise DomainError("embed targets a grid at least as fine as the source")
    if grid.n == s.grid.n:
        return s.copy()
    c = np.zeros((grid.n, grid.n), dtype=np.complex128)
    half = s.grid.n // 2
    for k1 in range(-half, half):
        c[k1 % grid.n, np.arange(-half, half) % grid.n] = s.coeffs[
            k1 % s.grid.n, np.arange(-half, half) % s.grid.n
        ]
    return SpectralField(grid, c)


# -- norms and inner products -------------------------------------------------

def norm_l2(s: SpectralField) -> float:
    """L2 norm by Parseval: ||f|| = 2pi (sum |fhat|^2)^{1/2}."""
    return TWO_PI * float(np.linalg.norm(s.coeffs))


def norm_hs(s: SpectralField, sigma: float) -> float:
    """Homogeneous Sobolev seminorm (sum |k|^{2 sigma} |fhat|^2)^{1/2} * 2pi."""
    with np.errstate(divide="ignore"):
        w = np.where(s.grid.kmag > 0, s.grid.kmag ** (2.0 * sigma), 0.0)
    if sigma >= 0:
        w[0, 0] = 0.0 if sigma > 0 else 1.0
    return TWO_PI * float(np.sqrt(np.sum(w * np.abs(s.coeffs) ** 2)))


def norm_linf(s: SpectralField) -> float:
    return float(np.max(np.abs(inverse(s).values)))


def norm_linf_grad(s: SpectralField) -> float:
    """sup over the grid of the Euclidean norm of the gradient."""
    g1 = inverse(derivative(s, 1)).values
    g2 = inverse(derivative(s, 2)).values
    return float(np.max(np.hypot(g1, g2)))


def norm(s: SpectralField, which, sigma: float | None = None) -> float:
    """Dispatch on 'l2' | 'linf' | 'linf_grad' | 'hs' (requires sigma)."""
    if which == "l2":
        return norm_l2(s)
    if which == "linf":
        return norm_linf(s)
    if which == "linf_grad":
        return norm_linf_grad(s)
    if which == "hs":
        if sigma is None:
            raise DomainError("hs norm requires the order sigma")
        return norm_hs(s, sigma)
    raise DomainError(f"unknown norm {which!r}")


def inner_l2(a: SpectralField, b: SpectralField) -> float:
    """(a, b)_{L2} for real fields, computed spectrally."""
    return TWO_PI**2 * float(np.vdot(b.coeffs, a.coeffs).real)


# -- raw-coefficient kernels (shared by the dynamics and operator modules) ----

def advective_product(n: int, u1_vals, u2_vals, c_theta, grid: GridSpec) -> np.ndarray:
    """Dealiased, mean-zeroed coefficients of u . grad(theta).

    Velocity enters as (possibly complex) collocation values; theta as
    coefficients.  Used with complex basis vectors during dense assembly.
    """
    d1 = to_values(c_theta * (1j * grid.k1) * grid.nyquist_mask, n)
    d2 = to_values(c_theta * (1j * grid.k2) * grid.nyquist_mask, n)
    prod = to_coeffs(u1_vals * d1 + u2_vals * d2, n)
    prod *= grid.dealias_mask
    prod[0, 0] = 0.0
    return prod


def velocity_values(c_theta: np.ndarray, grid: GridSpec):
    """Collocation values of the induced velocity (R2 theta, -R1 theta)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_k = np.where(grid.kmag > 0, 1.0 / grid.kmag, 0.0)
    mask = grid.nyquist_mask
    u1 = to_values(c_theta * (1j * grid.k2) * inv_k * mask, grid.n)
    u2 = to_values(c_theta * (-1j * grid.k1) * inv_k * mask, grid.n)
    return u1, u2
