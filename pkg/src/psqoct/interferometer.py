"""Coincidence interferograms of a layered sample.

The rate at path-delay difference ``tau`` is

    R(tau) = Lambda0 - V_BS * Re Lambda(2 tau)

with

    Lambda0     = int w(W) |U1(w0+W) e_s|^2 dW
    Lambda(t)   = int w(W) F(w0+W) F*(w0-W) exp(-i W t) dW
    F(w)        = e_i^dagger U2^dagger U1(w) e_s = sum_m r_m exp(2i phi^(m)) F_m(w)

Delay axes
----------
``tau`` is the path-delay difference (reference minus sample). Interface
``m`` produces a dip at ``tau = 2 beta1 z_m``, i.e. at ``Lambda`` argument
``4 beta1 z_m``. Interferograms are reported on the single-pass optical-path
axis ``ctau = c tau / 2`` so that interface ``m`` sits at ``c beta1 z_m``
(``n z_m`` for a dispersionless layer) and the front surface at zero. The raw
``c tau`` axis is ``2 * ctau``.

Reference arm
-------------
The reference optics are a half-wave plate at ``theta`` optionally followed
by a quarter-wave plate at ``phi``. Their angles are read in the mirrored
frame of the reference path: ``U2 = sigma_1 [Q(phi)] HW(theta) sigma_1``.
With this convention ``F_0 = cos 2theta`` and
``F_1 = cos(d) cos 2theta + sin(d) sin 2theta exp(2i a)`` for a single
birefringent layer, and ``theta = 0`` / ``theta = 45 deg`` select the H / V
measurements.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from psqoct import jones
from psqoct.errors import ConfigError
from psqoct.materials import SPEED_OF_LIGHT
from psqoct.sample import LayeredSample, dispersion_expansion, interface_kernels, reflected_state
from psqoct.spdc import SampledSpectrum

CLIP_GUARD = -1e-9
_CHUNK = 128  # delays per reduction block; fixed so results do not depend on worker count


# --- reference arm and beam splitter ------------------------------------------


@dataclass(frozen=True)
class ReferenceArm:
    """Half-wave plate at ``half_wave_angle``, optional quarter-wave plate at
    ``quarter_wave_angle`` (both rad). Without the quarter-wave plate the arm is
    a plain linear rotator."""

    half_wave_angle: float = 0.0
    quarter_wave_angle: float | None = None

    @classmethod
    def horizontal(cls) -> "ReferenceArm":
        return cls(0.0)

    @classmethod
    def vertical(cls) -> "ReferenceArm":
        return cls(np.pi / 4)

    @property
    def is_cascade(self) -> bool:
        return self.quarter_wave_angle is not None


@dataclass(frozen=True)
class BeamSplitter:
    """Lossless final beam splitter; ``reflectance`` is the power fraction ``|r|^2``."""

    reflectance: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.reflectance < 1.0:
            raise ConfigError(f"beam-splitter reflectance must be in (0, 1), got {self.reflectance}")

    @property
    def transmittance(self) -> float:
        return 1.0 - self.reflectance

    @property
    def visibility(self) -> float:
        r2, t2 = self.reflectance, self.transmittance
        return 2.0 * r2 * t2 / (r2**2 + t2**2)


def reference_operator(arm: ReferenceArm) -> jones.Matrix:
    core = jones.half_wave(arm.half_wave_angle)
    if arm.quarter_wave_angle is not None:
        core = jones.quarter_wave(arm.quarter_wave_angle) @ core
    return jones.SIGMA1 @ core @ jones.SIGMA1


def reference_state(arm: ReferenceArm) -> jones.Vector:
    """Polarization of the reference photon, ``U2 e_i``."""
    return jones.apply(reference_operator(arm), jones.E_I)


def cascade_states(theta: ArrayLike, phi: ArrayLike) -> NDArray:
    """``U2 e_i`` for broadcast arrays of cascade angles; shape ``(..., 2)``."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    ops = jones.SIGMA1 @ jones.quarter_wave(phi) @ jones.half_wave(theta) @ jones.SIGMA1
    return ops[..., :, 1]


# --- delay-axis conversions -----------------------------------------------------


def ctau_to_delay(ctau: ArrayLike) -> NDArray:
    """Reported axis (m) to path-delay difference ``tau`` (s)."""
    return 2.0 * np.asarray(ctau, dtype=float) / SPEED_OF_LIGHT


def delay_to_ctau(tau: ArrayLike) -> NDArray:
    return 0.5 * SPEED_OF_LIGHT * np.asarray(tau, dtype=float)


# --- projections --------------------------------------------------------------


def sample_projection(sample: LayeredSample, arm: ReferenceArm, m: int, omega: ArrayLike) -> NDArray:
    """``F_m(w) = e_i^dagger U2^dagger u_m(w)``."""
    from psqoct.sample import interface_kernel

    return jones.inner(reference_state(arm), interface_kernel(sample, m, omega))


def projection(sample: LayeredSample, arm: ReferenceArm, omega: ArrayLike) -> NDArray:
    """Total ``F(w) = sum_m r_m exp(2i phi^(m)) F_m(w)``."""
    return jones.inner(reference_state(arm), reflected_state(sample, omega))


# --- the N-layer engine ---------------------------------------------------------


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("QOCT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"QOCT_THREADS must be an integer, got {env!r}") from None
    return min(8, os.cpu_count() or 1)


class CoincidenceModel:
    """Precomputed sample response on a spectrum grid.

    The reflected Jones vectors ``a(w0 +/- W) = U1 e_s`` are evaluated once;
    every arm setting and delay is then a weighted sum over the grid.
    """

    def __init__(self, sample: LayeredSample, spectrum: SampledSpectrum):
        self.sample = sample
        self.spectrum = spectrum
        off = spectrum.offsets
        self._offsets = off
        self._q = spectrum.quadrature_weights()
        self._a_plus = reflected_state(sample, spectrum.omega0 + off)
        self._a_minus = reflected_state(sample, spectrum.omega0 - off)

    def lambda0(self) -> float:
        norm2 = np.sum(np.abs(self._a_plus) ** 2, axis=-1)
        return float(self._q @ norm2)

    def _reduce(self, integrand: NDArray, tau: NDArray, workers: int | None) -> NDArray:
        flat = np.ravel(tau)
        chunks = [flat[i : i + _CHUNK] for i in range(0, flat.size, _CHUNK)]

        def run(t: NDArray) -> NDArray:
            phase = np.exp(-1j * np.outer(t, self._offsets))
            return phase @ integrand

        n = worker_count(workers)
        if n == 1 or len(chunks) == 1:
            parts = [run(c) for c in chunks]
        else:
            with ThreadPoolExecutor(max_workers=n) as pool:
                parts = list(pool.map(run, chunks))
        out = np.concatenate(parts) if parts else np.zeros(0, complex)
        return out.reshape(np.shape(tau) + integrand.shape[1:])

    def lambda_varying(self, arm: ReferenceArm, tau: ArrayLike, workers: int | None = None) -> NDArray:
        """``Lambda(tau)`` for the given arm; ``tau`` is the integral's argument (s)."""
        v = reference_state(arm)
        g_plus = self._a_plus @ np.conj(v)
        g_minus = self._a_minus @ np.conj(v)
        integrand = self._q * g_plus * np.conj(g_minus)
        return self._reduce(integrand[:, None], np.asarray(tau, dtype=float), workers)[..., 0]

    def coherency(self, tau: ArrayLike, workers: int | None = None) -> NDArray:
        """2x2 matrix ``M(tau)`` with ``Lambda(tau) = v^dagger M(tau) v`` for any
        reference state ``v``; shape ``tau.shape + (2, 2)``."""
        outer = self._a_plus[:, :, None] * np.conj(self._a_minus[:, None, :])
        integrand = (self._q[:, None, None] * outer).reshape(-1, 4)
        out = self._reduce(integrand, np.asarray(tau, dtype=float), workers)
        return out.reshape(np.shape(tau) + (2, 2))

    def rates(
        self,
        arm: ReferenceArm,
        bs: BeamSplitter,
        delay: ArrayLike,
        normalize: bool = True,
        workers: int | None = None,
    ) -> tuple[NDArray, int]:
        """Coincidence rate at path delays ``delay`` (s) and the clip count."""
        lam0 = self.lambda0()
        lam = self.lambda_varying(arm, 2.0 * np.asarray(delay, dtype=float), workers)
        raw = lam0 - bs.visibility * lam.real
        return _finish_rates(raw, lam0, normalize)


def _finish_rates(raw: NDArray, lam0: float, normalize: bool) -> tuple[NDArray, int]:
    scale = lam0 if lam0 > 0 else 1.0
    floor = CLIP_GUARD * scale
    clipped = int(np.count_nonzero(raw < floor))
    raw = np.maximum(raw, floor)
    if not normalize:
        return raw, clipped
    if lam0 <= 0:
        return np.zeros_like(raw), clipped
    return raw / lam0, clipped


def lambda_constant(sample: LayeredSample, spectrum: SampledSpectrum, arm: ReferenceArm | None = None) -> float:
    """``Lambda0``; independent of the (unitary) reference arm."""
    return CoincidenceModel(sample, spectrum).lambda0()


def lambda_varying(
    sample: LayeredSample, spectrum: SampledSpectrum, arm: ReferenceArm, tau: ArrayLike
) -> NDArray:
    return CoincidenceModel(sample, spectrum).lambda_varying(arm, tau)


def coincidence_rate(
    sample: LayeredSample,
    spectrum: SampledSpectrum,
    arm: ReferenceArm,
    bs: BeamSplitter,
    delay: ArrayLike,
    normalize: bool = False,
) -> NDArray:
    """``Lambda0 - V_BS Re Lambda(2 delay)``, guarded at ``-1e-9 Lambda0``."""
    rates, _ = CoincidenceModel(sample, spectrum).rates(arm, bs, delay, normalize)
    return rates


# --- scans --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ArmScan:
    """One reference-arm setting scanned over the reported ``ctau`` axis (m)."""

    positions: NDArray
    rates: NDArray
    lambda0: float
    arm: ReferenceArm
    visibility: float
    clipped: int = 0


@dataclass(frozen=True, eq=False)
class Interferogram:
    """H and V scans and the renormalized total ``R_T``; rates are Lambda0-normalized."""

    positions: NDArray
    R_H: NDArray
    R_V: NDArray
    R_T: NDArray
    lambda0_H: float
    lambda0_V: float
    visibility: float = 1.0
    clipped: int = 0

    @property
    def raw_ctau(self) -> NDArray:
        return 2.0 * self.positions

    @property
    def step(self) -> float:
        return float(np.median(np.diff(self.positions))) if self.positions.size > 1 else 0.0


def _check_grid(positions: NDArray) -> None:
    if positions.ndim != 1 or positions.size < 2:
        raise ConfigError("delay grid needs at least two points")
    if np.any(np.diff(positions) <= 0):
        raise ConfigError("delay grid must be strictly increasing")


def scan(
    sample: LayeredSample,
    spectrum: SampledSpectrum,
    arm: ReferenceArm,
    bs: BeamSplitter,
    positions: ArrayLike,
    workers: int | None = None,
    model: CoincidenceModel | None = None,
) -> ArmScan:
    positions = np.asarray(positions, dtype=float)
    _check_grid(positions)
    model = model or CoincidenceModel(sample, spectrum)
    rates, clipped = model.rates(arm, bs, ctau_to_delay(positions), True, workers)
    return ArmScan(positions, rates, model.lambda0(), arm, bs.visibility, clipped)


def combine(h_scan: ArmScan, v_scan: ArmScan) -> Interferogram:
    """``R_T = (R_V + R_H - Lambda0) / Lambda0`` from two orthogonal scans."""
    if not np.array_equal(h_scan.positions, v_scan.positions):
        raise ConfigError("H and V scans must share the delay grid")
    lam0 = h_scan.lambda0
    if lam0 > 0:
        total = h_scan.rates + v_scan.rates - 1.0
    else:
        total = np.zeros_like(h_scan.rates)
    return Interferogram(
        positions=h_scan.positions,
        R_H=h_scan.rates,
        R_V=v_scan.rates,
        R_T=total,
        lambda0_H=h_scan.lambda0,
        lambda0_V=v_scan.lambda0,
        visibility=h_scan.visibility,
        clipped=h_scan.clipped + v_scan.clipped,
    )


def simulate(
    sample: LayeredSample,
    spectrum: SampledSpectrum,
    bs: BeamSplitter,
    positions: ArrayLike,
    workers: int | None = None,
) -> Interferogram:
    """Run the H and V measurements and combine them."""
    model = CoincidenceModel(sample, spectrum)
    h = scan(sample, spectrum, ReferenceArm.horizontal(), bs, positions, workers, model)
    v = scan(sample, spectrum, ReferenceArm.vertical(), bs, positions, workers, model)
    return combine(h, v)


# --- closed forms for one buried layer ------------------------------------------


def closed_form_projections(arm: ReferenceArm, delta: ArrayLike, alpha: float) -> tuple[NDArray, NDArray]:
    """``(F_0, F_1)`` for a single layer from the trigonometric formulas."""
    two_theta = 2.0 * arm.half_wave_angle
    delta = np.asarray(delta, dtype=float)
    if arm.quarter_wave_angle is None:
        p = np.cos(two_theta) + 0j
        q = np.sin(two_theta) + 0j
    else:
        chi = 2.0 * (arm.quarter_wave_angle - arm.half_wave_angle)
        p = (np.cos(two_theta) - 1j * np.cos(chi)) / np.sqrt(2.0)
        q = (np.sin(two_theta) - 1j * np.sin(chi)) / np.sqrt(2.0)
    f1 = np.cos(delta) * p + np.sin(delta) * q * np.exp(2j * alpha)
    return np.broadcast_to(p, delta.shape), f1


def _single_layer_parts(sample: LayeredSample, spectrum: SampledSpectrum):
    if len(sample.interfaces) != 2 or sample.n_layers != 1:
        raise ValueError("closed forms need exactly two interfaces and one layer")
    layer = sample.layers[0]
    w0 = spectrum.omega0
    off = spectrum.offsets
    exp = dispersion_expansion(layer, w0)
    d_plus = layer.retardance(w0 + off)
    d_minus = layer.retardance(w0 - off)
    return layer, exp, off, d_plus, d_minus


def closed_form_two_layer(
    sample: LayeredSample, spectrum: SampledSpectrum, arm: ReferenceArm, tau: ArrayLike
) -> NDArray:
    """``Lambda(tau)`` for two interfaces around one layer, from envelope functions.

    Sum of the two interface envelopes ``g^(0)(tau)``, ``g^(1)(tau - 4 beta1 z)``
    and the two cross terms centred at ``2 beta1 z`` that carry the quadratic
    phase ``exp(+/- i beta2 z W^2)`` and the carrier ``exp(+/- 2i beta0 z)``.
    The mean propagation constant enters only through its second-order
    expansion, so this is exact for layers whose ``beta`` is quadratic.
    """
    layer, exp, off, d_plus, d_minus = _single_layer_parts(sample, spectrum)
    z = layer.thickness
    r0, r1 = sample.reflectances
    f0, f1_plus = closed_form_projections(arm, d_plus, layer.axis_angle)
    _, f1_minus = closed_form_projections(arm, d_minus, layer.axis_angle)
    q = spectrum.quadrature_weights()
    tau = np.asarray(tau, dtype=float)
    chirp = np.exp(1j * exp.beta2 * z * off**2)

    def envelope(weights: NDArray, shift: float) -> NDArray:
        return np.exp(-1j * np.multiply.outer(tau - shift, off)) @ (q * weights)

    g0 = envelope(f0 * np.conj(f0), 0.0)
    g1 = envelope(f1_plus * np.conj(f1_minus), 4 * exp.beta1 * z)
    gd_10 = envelope(f1_plus * np.conj(f0) * chirp, 2 * exp.beta1 * z)
    gd_01 = envelope(f0 * np.conj(f1_minus) * np.conj(chirp), 2 * exp.beta1 * z)
    carrier = np.exp(2j * exp.beta0 * z)
    return (
        abs(r0) ** 2 * g0
        + abs(r1) ** 2 * g1
        + np.conj(r0) * r1 * carrier * gd_10
        + np.conj(r1) * r0 * np.conj(carrier) * gd_01
    )


def closed_form_two_layer_constant(sample: LayeredSample, spectrum: SampledSpectrum) -> float:
    """``Lambda0`` for two interfaces, including the short-separation cross term."""
    layer, exp, off, d_plus, _ = _single_layer_parts(sample, spectrum)
    z = layer.thickness
    r0, r1 = sample.reflectances
    q = spectrum.quadrature_weights()
    total = q.sum()
    overlap = np.cos(d_plus)  # u_0^dagger u_1
    cross = np.conj(r0) * r1 * np.exp(2j * exp.beta0 * z) * (
        q @ (overlap * np.exp(1j * (2 * exp.beta1 * off + exp.beta2 * off**2) * z))
    )
    return float((abs(r0) ** 2 + abs(r1) ** 2) * total + 2.0 * cross.real)


def interface_positions(sample: LayeredSample, omega0: float) -> NDArray:
    """Expected dip positions on the reported ``ctau`` axis (m), ``c * beta1 * z_m``."""
    pos = [0.0]
    for layer in sample.layers:
        pos.append(pos[-1] + SPEED_OF_LIGHT * dispersion_expansion(layer, omega0).beta1 * layer.thickness)
    return np.array(pos[: len(sample.interfaces)])


def satellite_positions(sample: LayeredSample, omega0: float) -> tuple[float, float]:
    """Positions of the two birefringence satellites around the last interface dip.

    They appear when ``delta'(w0) * bandwidth >> 1`` at ``Lambda`` argument
    ``(4 beta1 +/- 2 delta_beta1) z``; returned on the ``ctau`` axis.
    """
    if sample.n_layers != 1:
        raise ValueError("satellite positions are defined for a single layer")
    layer = sample.layers[0]
    exp = dispersion_expansion(layer, omega0)
    centre = SPEED_OF_LIGHT * exp.beta1 * layer.thickness
    offset = 0.5 * SPEED_OF_LIGHT * abs(exp.delta_beta1) * layer.thickness
    return centre - offset, centre + offset


def kernels_and_phases(sample: LayeredSample, omega: ArrayLike):
    """Re-export for diagnostics: ``(exp(2i phi^(m)), u_m)`` stacks."""
    return interface_kernels(sample, omega)


__all__: Sequence[str] = [
    "ArmScan",
    "BeamSplitter",
    "CoincidenceModel",
    "Interferogram",
    "ReferenceArm",
    "cascade_states",
    "closed_form_projections",
    "closed_form_two_layer",
    "closed_form_two_layer_constant",
    "coincidence_rate",
    "combine",
    "ctau_to_delay",
    "delay_to_ctau",
    "interface_positions",
    "lambda_constant",
    "lambda_varying",
    "projection",
    "reference_operator",
    "reference_state",
    "sample_projection",
    "satellite_positions",
    "scan",
    "simulate",
]
