"""Two-photon spectral weight of collinear, degenerate type-II SPDC.

A cw pump at ``2*omega0`` splits into a signal at ``omega0 + Omega``
(extraordinary polarization) and an idler at ``omega0 - Omega`` (ordinary).
Exact frequency anti-correlation is built in: the spectrum is indexed by the
single offset ``Omega`` and consumers only ever evaluate the sample at the
pair ``omega0 +/- Omega``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from psqoct.errors import BandError, GridError, PhaseMatchingError
from psqoct.materials import (
    BBO_EXTRAORDINARY,
    BBO_ORDINARY,
    SPEED_OF_LIGHT,
    IndexModel,
    extraordinary_index_at_angle,
    omega_to_wavelength,
)
from psqoct.quadrature import simpson_weights

DEFAULT_GRID_POINTS = 4096
EDGE_FRACTION = 1e-4


@dataclass(frozen=True)
class TwinPhotonSource:
    """Pump and crystal description.

    Parameters
    ----------
    pump_wavelength : float
        Pump wavelength (m); the degenerate centre wavelength is twice this.
    crystal_length : float
        Nonlinear crystal length ``L`` (m).
    n_o, n_e : IndexModel
        Principal indices of the uniaxial crystal.
    cut_angle : float, optional
        Angle between optic axis and propagation direction (rad). ``None``
        until :func:`solve_cut_angle` has been applied.
    grid_points : int
        Number of uniform ``Omega`` samples.
    lobes : int
        Number of sinc lobes (main lobe included) the grid spans on each side.
    span : float, optional
        Explicit half-width of the ``Omega`` grid (rad/s); overrides ``lobes``.
    """

    pump_wavelength: float
    crystal_length: float
    n_o: IndexModel = BBO_ORDINARY
    n_e: IndexModel = BBO_EXTRAORDINARY
    cut_angle: float | None = None
    grid_points: int = DEFAULT_GRID_POINTS
    lobes: int = 3
    span: float | None = None

    def __post_init__(self) -> None:
        if self.pump_wavelength <= 0 or self.crystal_length < 0:
            raise ValueError("pump wavelength must be positive and crystal length non-negative")
        if self.grid_points < 4:
            raise ValueError("need at least 4 grid points")

    @property
    def omega0(self) -> float:
        """Degenerate centre frequency; the pump sits at exactly ``2*omega0``."""
        return np.pi * SPEED_OF_LIGHT / self.pump_wavelength

    @property
    def pump_omega(self) -> float:
        return 2.0 * self.omega0

    @property
    def center_wavelength(self) -> float:
        return 2.0 * self.pump_wavelength


def _k_extraordinary(source: TwinPhotonSource, omega: NDArray, theta: float) -> NDArray:
    lam = omega_to_wavelength(omega)
    n = extraordinary_index_at_angle(source.n_o(lam), source.n_e(lam), theta)
    return n * omega / SPEED_OF_LIGHT


def _k_ordinary(source: TwinPhotonSource, omega: NDArray) -> NDArray:
    return source.n_o(omega_to_wavelength(omega)) * omega / SPEED_OF_LIGHT


def phase_mismatch(
    source: TwinPhotonSource, offset: ArrayLike, theta: float | None = None
) -> NDArray[np.float64]:
    """``dk_z(Omega) = k_p(2 w0) - k_s(w0 + Omega) - k_i(w0 - Omega)`` in rad/m.

    Pump and signal are extraordinary waves at ``theta``; the idler is ordinary.
    """
    if theta is None:
        theta = source.cut_angle
    if theta is None:
        raise PhaseMatchingError("cut angle not set; call solve_cut_angle first")
    offset = np.asarray(offset, dtype=float)
    w0 = source.omega0
    k_p = _k_extraordinary(source, np.asarray(2 * w0), theta)
    k_s = _k_extraordinary(source, w0 + offset, theta)
    k_i = _k_ordinary(source, w0 - offset)
    return k_p - k_s - k_i


def solve_cut_angle(source: TwinPhotonSource, tol: float = 1e-6) -> float:
    """Bisect ``dk_z(0; theta) = 0`` on ``(0, pi/2)``.

    Stops once ``|dk_z(0)| L / 2 < tol`` (or the bracket stops shrinking).
    """
    half_length = max(source.crystal_length, 1e-12) / 2.0
    lo, hi = 1e-6, np.pi / 2 - 1e-6
    f_lo = float(phase_mismatch(source, 0.0, lo))
    f_hi = float(phase_mismatch(source, 0.0, hi))
    scale = max(abs(f_lo), abs(f_hi))
    if scale * half_length < tol:
        raise PhaseMatchingError("phase mismatch vanishes for every angle (degenerate bracket)")
    if np.sign(f_lo) == np.sign(f_hi):
        raise PhaseMatchingError("no type-II phase-matching angle in (0, 90 deg)")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = float(phase_mismatch(source, 0.0, mid))
        if abs(f_mid) * half_length < tol * 1e-3 or hi - lo < 1e-15:
            break
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    residual = abs(float(phase_mismatch(source, 0.0, theta))) * half_length
    if residual >= tol:
        raise PhaseMatchingError(f"bisection stalled with |dk L/2| = {residual:.3g}")
    return theta


def with_solved_cut_angle(source: TwinPhotonSource) -> TwinPhotonSource:
    return replace(source, cut_angle=solve_cut_angle(source))


def state_function(source: TwinPhotonSource, offset: ArrayLike) -> NDArray[np.float64]:
    """``Phi(Omega) = L sinc(dk_z L / 2)`` with ``sinc(x) = sin(x)/x``."""
    x = phase_mismatch(source, offset) * source.crystal_length / 2.0
    return source.crystal_length * np.sinc(x / np.pi)


@dataclass(frozen=True, eq=False)
class SampledSpectrum:
    """Weights ``w_k`` of the two-photon spectrum on a uniform, symmetric grid.

    ``offsets`` are the detunings ``Omega_k`` (rad/s) from ``omega0``.
    """

    omega0: float
    offsets: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        off = np.array(self.offsets, dtype=float)
        w = np.array(self.weights, dtype=float)
        if off.ndim != 1 or off.shape != w.shape or off.size < 4:
            raise ValueError("offsets and weights must be 1-D arrays of equal length >= 4")
        steps = np.diff(off)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise GridError("frequency grid must be uniform and increasing")
        if not np.allclose(off, -off[::-1], rtol=0, atol=1e-9 * abs(steps[0])):
            raise GridError("frequency grid must be symmetric about zero")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("spectral weights must be finite and non-negative")
        off.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "weights", w)

    @property
    def step(self) -> float:
        return float(self.offsets[1] - self.offsets[0])

    @property
    def size(self) -> int:
        return int(self.offsets.size)

    def quadrature_weights(self) -> NDArray[np.float64]:
        """Simpson weights times spectral weights, ready for ``@ integrand``."""
        return simpson_weights(self.size, self.step) * self.weights

    def integral(self) -> float:
        return float(self.quadrature_weights().sum())

    def scaled(self, factor: float) -> "SampledSpectrum":
        return SampledSpectrum(self.omega0, self.offsets, self.weights * factor)

    def normalized(self) -> "SampledSpectrum":
        """Rescale so that the integral of ``w`` over ``Omega`` is 1."""
        total = self.integral()
        if total <= 0:
            raise GridError("spectrum has zero weight")
        return self.scaled(1.0 / total)

    def symmetrized(self) -> "SampledSpectrum":
        """``(w(Omega) + w(-Omega)) / 2``; diagnostic for the type-II asymmetry."""
        return SampledSpectrum(self.omega0, self.offsets, 0.5 * (self.weights + self.weights[::-1]))

    def edge_fraction(self) -> float:
        peak = float(self.weights.max())
        if peak == 0:
            return 0.0
        return float(max(self.weights[0], self.weights[-1]) / peak)


def _lobe_edge(source: TwinPhotonSource, sign: int, target: float) -> float:
    """Offset on one side where ``|dk_z| L/2`` first reaches ``target``."""
    half = source.crystal_length / 2.0

    def excess(omega: float) -> float:
        return abs(float(phase_mismatch(source, sign * omega))) * half - target

    hi = 1e11
    try:
        while excess(hi) < 0:
            hi *= 2.0
            if hi > source.omega0:
                raise GridError("sinc lobes do not close inside the frequency band")
    except BandError as exc:
        raise GridError(f"requested sinc lobes extend outside the index-model band: {exc}") from exc
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def spectrum(source: TwinPhotonSource) -> SampledSpectrum:
    """Sample ``|Phi(Omega)|^2`` on the default symmetric grid.

    Unless ``source.span`` is given, the grid spans ``source.lobes`` sinc lobes
    on both sides. The type-II mismatch is not odd in ``Omega``, so the two
    sides close at different offsets: the grid reaches the farther closure and
    the weights are windowed to zero beyond the nearer one. Raises GridError
    when the edge weights exceed ``1e-4`` of the peak.
    """
    if source.cut_angle is None:
        raise PhaseMatchingError("cut angle not set; call solve_cut_angle first")
    if source.crystal_length <= 0 and source.span is None:
        raise GridError("zero-length crystal has unbounded lobes; give an explicit span")
    window = None
    if source.span is None:
        target = source.lobes * np.pi
        upper = _lobe_edge(source, +1, target)
        lower = _lobe_edge(source, -1, target)
        half_width = max(upper, lower)
        window = (-lower, upper)
    else:
        half_width = float(source.span)
    offsets = np.linspace(-half_width, half_width, source.grid_points)
    try:
        weights = np.abs(state_function(source, offsets)) ** 2
    except BandError as exc:
        raise GridError(f"frequency grid leaves the index-model band: {exc}") from exc
    if window is not None:
        weights = np.where((offsets >= window[0]) & (offsets <= window[1]), weights, 0.0)
    out = SampledSpectrum(source.omega0, offsets, weights)
    if out.edge_fraction() >= EDGE_FRACTION:
        raise GridError(
            f"grid too narrow: edge weight is {out.edge_fraction():.3g} of the peak"
        )
    return out


def gaussian_spectrum(
    omega0: float,
    fwhm: float,
    points: int = DEFAULT_GRID_POINTS,
    span: float | None = None,
) -> SampledSpectrum:
    """Gaussian ``exp(-4 ln2 Omega^2 / fwhm^2)`` on a symmetric grid.

    The default grid covers ``+/- 3 fwhm`` (six FWHM in total).
    """
    if fwhm <= 0:
        raise ValueError("fwhm must be positive")
    half_width = 3.0 * fwhm if span is None else float(span)
    offsets = np.linspace(-half_width, half_width, points)
    weights = np.exp(-4.0 * np.log(2.0) * offsets**2 / fwhm**2)
    return SampledSpectrum(omega0, offsets, weights)
