"""Layered birefringent samples and their frequency-dependent Jones operators.

Interface ``m`` (``0..N``) reflects isotropically with amplitude ``r_m``
(Jones matrix ``r_m * sigma_3``). Layer ``m`` (``1..N``) lies between
interfaces ``m-1`` and ``m``. The sample transfer function sums single-bounce
paths only:

    H(w) = sum_m S_1 ... S_m (r_m sigma_3) S~_m ... S~_1

where ``S~`` is the layer matrix evaluated at the negated axis angle. All
functions accept an array of angular frequencies and return stacked results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from psqoct import jones
from psqoct.errors import ConfigError
from psqoct.materials import (
    QUARTZ_EXTRAORDINARY,
    QUARTZ_ORDINARY,
    SPEED_OF_LIGHT,
    IndexModel,
    omega_to_wavelength,
)


@dataclass(frozen=True)
class Layer:
    """Birefringent slab.

    ``n_o`` and ``n_e`` follow the convention ``dn = n_o - n_e`` (negative for
    quartz). ``extra_gvd`` adds ``0.5 * extra_gvd * (w - reference_omega)**2``
    to the propagation constant, an artificial group-velocity dispersion used
    to probe dispersion cancellation. With ``freeze_retardance`` the
    retardance is evaluated at ``reference_omega`` for every frequency.
    """

    thickness: float
    axis_angle: float = 0.0
    n_o: IndexModel = QUARTZ_ORDINARY
    n_e: IndexModel = QUARTZ_EXTRAORDINARY
    extra_gvd: float = 0.0
    reference_omega: float | None = None
    freeze_retardance: bool = False

    def __post_init__(self) -> None:
        if not self.thickness > 0:
            raise ConfigError(f"layer thickness must be positive, got {self.thickness}")
        if (self.extra_gvd or self.freeze_retardance) and self.reference_omega is None:
            raise ConfigError("extra_gvd and freeze_retardance need a reference_omega")

    def mean_index(self, omega: ArrayLike) -> NDArray:
        lam = omega_to_wavelength(omega)
        return 0.5 * (self.n_o(lam) + self.n_e(lam))

    def birefringence(self, omega: ArrayLike) -> NDArray:
        lam = omega_to_wavelength(omega)
        return self.n_o(lam) - self.n_e(lam)

    def propagation_constant(self, omega: ArrayLike) -> NDArray:
        """Mean propagation constant ``beta(w)`` (rad/m), GVD injection included."""
        omega = np.asarray(omega, dtype=float)
        beta = omega * self.mean_index(omega) / SPEED_OF_LIGHT
        if self.extra_gvd:
            beta = beta + 0.5 * self.extra_gvd * (omega - self.reference_omega) ** 2
        return beta

    def phase_delay(self, omega: ArrayLike) -> NDArray:
        """Average single-pass phase ``Delta_m(w) = beta(w) d``."""
        return self.propagation_constant(omega) * self.thickness

    def retardance(self, omega: ArrayLike) -> NDArray:
        """Single-pass retardance ``delta_m(w) = w dn d / c``."""
        omega = np.asarray(omega, dtype=float)
        if self.freeze_retardance:
            w_ref = np.asarray(self.reference_omega, dtype=float)
            value = w_ref * self.birefringence(w_ref) * self.thickness / SPEED_OF_LIGHT
            return np.broadcast_to(value, omega.shape).copy()
        return omega * self.birefringence(omega) * self.thickness / SPEED_OF_LIGHT


@dataclass(frozen=True)
class Interface:
    r: complex

    def __post_init__(self) -> None:
        if abs(self.r) > 1.0 + 1e-12:
            raise ConfigError(f"|r| must not exceed 1, got {abs(self.r):.6g}")


@dataclass(frozen=True)
class LayeredSample:
    """Ordered interfaces ``r_0..r_N`` with ``N`` layers between them.

    An empty sample (no interfaces, no layers) reflects nothing.
    """

    interfaces: tuple[Interface, ...]
    layers: tuple[Layer, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "interfaces", tuple(self.interfaces))
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.interfaces and len(self.interfaces) != len(self.layers) + 1:
            raise ConfigError(
                f"{len(self.layers)} layers need {len(self.layers) + 1} interfaces, "
                f"got {len(self.interfaces)}"
            )
        if not self.interfaces and self.layers:
            raise ConfigError("layers given without interfaces")

    @classmethod
    def build(cls, reflectances: Sequence[complex], layers: Sequence[Layer] = ()) -> "LayeredSample":
        return cls(tuple(Interface(complex(r)) for r in reflectances), tuple(layers))

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def reflectances(self) -> NDArray[np.complex128]:
        return np.array([i.r for i in self.interfaces], dtype=complex)

    def is_empty(self) -> bool:
        return not self.interfaces


# --- per-layer operators ------------------------------------------------------


def birefringence_matrix(layer: Layer, omega: ArrayLike, tilde: bool = False) -> jones.Matrix:
    """``B_m = R(a) b(delta) R^dagger(a)``; ``tilde`` negates the axis angle."""
    angle = -layer.axis_angle if tilde else layer.axis_angle
    return jones.wave_plate(layer.retardance(omega), angle)


def layer_matrix(layer: Layer, omega: ArrayLike, tilde: bool = False) -> jones.Matrix:
    """``S_m = exp(i Delta_m) B_m`` (or ``S~_m`` with ``tilde``)."""
    phase = np.exp(1j * layer.phase_delay(omega))[..., None, None]
    return phase * birefringence_matrix(layer, omega, tilde)


def accumulated_phase(sample: LayeredSample, m: int, omega: ArrayLike) -> NDArray:
    """``phi^(m) = sum_{l<=m} Delta_l``; zero for the front interface."""
    _check_index(sample, m)
    omega = np.asarray(omega, dtype=float)
    total = np.zeros(omega.shape)
    for layer in sample.layers[:m]:
        total = total + layer.phase_delay(omega)
    return total


def accumulated_birefringence(
    sample: LayeredSample, m: int, omega: ArrayLike
) -> tuple[jones.Matrix, jones.Matrix]:
    """Return ``(B^(m), B~^(m))`` with ``B^(m) = B_1...B_m``, ``B~^(m) = B~_m...B~_1``."""
    _check_index(sample, m)
    omega = np.asarray(omega, dtype=float)
    fwd = np.broadcast_to(jones.IDENTITY, omega.shape + (2, 2)).copy()
    back = fwd.copy()
    for layer in sample.layers[:m]:
        fwd = fwd @ birefringence_matrix(layer, omega)
        back = birefringence_matrix(layer, omega, tilde=True) @ back
    return fwd, back


def _check_index(sample: LayeredSample, m: int) -> None:
    if not 0 <= m < len(sample.interfaces):
        raise IndexError(f"interface index {m} out of range for {len(sample.interfaces)} interfaces")


def _interface_terms(sample: LayeredSample, omega: NDArray):
    """Yield ``(m, exp(2i phi^(m)), B^(m), B~^(m))`` with running products."""
    fwd = np.broadcast_to(jones.IDENTITY, omega.shape + (2, 2)).copy()
    back = fwd.copy()
    phi = np.zeros(omega.shape)
    for m in range(len(sample.interfaces)):
        if m > 0:
            layer = sample.layers[m - 1]
            phi = phi + layer.phase_delay(omega)
            fwd = fwd @ birefringence_matrix(layer, omega)
            back = birefringence_matrix(layer, omega, tilde=True) @ back
        yield m, np.exp(2j * phi), fwd, back


def transfer_function(sample: LayeredSample, omega: ArrayLike) -> jones.Matrix:
    """Sample transfer function ``H(w)``; linear in every ``r_m``."""
    omega = np.asarray(omega, dtype=float)
    h = np.zeros(omega.shape + (2, 2), dtype=complex)
    for m, phase, fwd, back in _interface_terms(sample, omega):
        r = sample.interfaces[m].r
        h = h + phase[..., None, None] * r * (fwd @ jones.SIGMA3 @ back)
    return h


def sample_arm_operator(sample: LayeredSample, omega: ArrayLike) -> jones.Matrix:
    """``U_1 = Q(45) H Q^dagger(45)``."""
    q = jones.quarter_wave_45()
    return q @ transfer_function(sample, omega) @ jones.dagger(q)


def interface_kernel(sample: LayeredSample, m: int, omega: ArrayLike) -> jones.Vector:
    """Unit polarization kernel ``u_m = Q B^(m) sigma_3 B~^(m) Q^dagger e_s``."""
    fwd, back = accumulated_birefringence(sample, m, omega)
    q = jones.quarter_wave_45()
    return jones.apply(q @ fwd @ jones.SIGMA3 @ back @ jones.dagger(q), jones.E_S)


def interface_kernels(sample: LayeredSample, omega: ArrayLike) -> tuple[NDArray, NDArray]:
    """All kernels at once: ``phases[m] = exp(2i phi^(m))`` and ``kernels[m] = u_m``.

    Shapes are ``(M,) + omega.shape`` and ``(M,) + omega.shape + (2,)``.
    """
    omega = np.asarray(omega, dtype=float)
    q = jones.quarter_wave_45()
    qd = jones.dagger(q)
    phases, kernels = [], []
    for _, phase, fwd, back in _interface_terms(sample, omega):
        phases.append(phase)
        kernels.append(jones.apply(q @ fwd @ jones.SIGMA3 @ back @ qd, jones.E_S))
    if not phases:
        return np.zeros((0,) + omega.shape, complex), np.zeros((0,) + omega.shape + (2,), complex)
    return np.stack(phases), np.stack(kernels)


def reflected_state(sample: LayeredSample, omega: ArrayLike) -> jones.Vector:
    """``U_1(w) e_s = sum_m r_m exp(2i phi^(m)) u_m(w)``, shape ``omega.shape + (2,)``."""
    omega = np.asarray(omega, dtype=float)
    phases, kernels = interface_kernels(sample, omega)
    out = np.zeros(omega.shape + (2,), dtype=complex)
    for m in range(len(sample.interfaces)):
        out = out + (sample.interfaces[m].r * phases[m])[..., None] * kernels[m]
    return out


def noncommuting_layers(sample: LayeredSample, omega: float, atol: float = 1e-12) -> list[tuple[int, int]]:
    """Pairs of layers (1-based) whose birefringence matrices do not commute.

    For such stacks the return-pass ordering matters; the transfer function
    uses ``B~_m ... B~_1`` on the way in and ``B_1 ... B_m`` on the way out.
    """
    mats = [birefringence_matrix(layer, omega) for layer in sample.layers]
    pairs = []
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            if not np.allclose(mats[i] @ mats[j], mats[j] @ mats[i], atol=atol, rtol=0):
                pairs.append((i + 1, j + 1))
    return pairs


# --- dispersion expansion -------------------------------------------------------


@dataclass(frozen=True)
class DispersionExpansion:
    """Taylor coefficients of a layer's propagation constants at ``omega0``.

    ``beta`` is the mean propagation constant and ``delta_beta`` the
    birefringent one (``w dn / c``), so ``beta(w0 + W) ~ beta0 + beta1 W +
    beta2 W^2 / 2`` and the retardance per unit length is ``delta_beta``.
    """

    omega0: float
    beta0: float
    beta1: float
    beta2: float
    delta_beta: float
    delta_beta1: float

    @property
    def group_index(self) -> float:
        return self.beta1 * SPEED_OF_LIGHT


def dispersion_expansion(layer: Layer, omega0: float, rel_step: float = 1e-4) -> DispersionExpansion:
    """Expand ``beta`` and ``delta_beta`` to the orders used by the closed forms.

    Derivatives of the indices come from central differences with step
    ``rel_step * omega0``; the ``w/c`` factor and the injected GVD are
    differentiated exactly, so a constant-index layer gives ``beta1 = n/c``
    and ``beta2 = extra_gvd`` without round-off.
    """
    h = rel_step * omega0
    w = np.array([omega0 - h, omega0, omega0 + h])
    nbar = layer.mean_index(w)
    dn = layer.birefringence(w)
    c = SPEED_OF_LIGHT

    nbar_1 = (nbar[2] - nbar[0]) / (2 * h)
    nbar_2 = (nbar[2] - 2 * nbar[1] + nbar[0]) / h**2
    dn_1 = (dn[2] - dn[0]) / (2 * h)

    gvd_offset = 0.0 if layer.reference_omega is None else omega0 - layer.reference_omega
    beta0 = float(layer.propagation_constant(omega0))
    beta1 = (nbar[1] + omega0 * nbar_1) / c + layer.extra_gvd * gvd_offset
    beta2 = (2 * nbar_1 + omega0 * nbar_2) / c + layer.extra_gvd
    return DispersionExpansion(
        omega0=float(omega0),
        beta0=beta0,
        beta1=float(beta1),
        beta2=float(beta2),
        delta_beta=float(omega0 * dn[1] / c),
        delta_beta1=float((dn[1] + omega0 * dn_1) / c),
    )
