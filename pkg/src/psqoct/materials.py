"""Refractive-index models and the material constants used by the presets.

Wavelengths are in metres at the API; Sellmeier coefficients use the usual
micrometre convention internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from psqoct.errors import BandError, ConfigError

SPEED_OF_LIGHT = 299_792_458.0  # m/s

#: Band over which index models are evaluated (m).
SUPPORTED_BAND = (0.4e-6, 1.2e-6)
_BAND_SLACK = 1e-12  # relative, so a 400 nm pump sits inside the band


def _check_band(wavelength: NDArray) -> None:
    lo, hi = SUPPORTED_BAND
    bad = (wavelength < lo * (1 - _BAND_SLACK)) | (wavelength > hi * (1 + _BAND_SLACK))
    if np.any(bad) or not np.all(np.isfinite(wavelength)):
        worst = wavelength[bad] if np.any(bad) else wavelength
        raise BandError(
            f"wavelength {float(np.ravel(worst)[0]):.6g} m outside supported band "
            f"{lo:g}-{hi:g} m"
        )


def _check_index(n: NDArray, model: object) -> NDArray:
    if not np.all(np.isfinite(n)) or np.any(n <= 1.0) or np.any(n >= 3.0):
        raise ConfigError(f"index model {model!r} evaluates outside (1, 3)")
    return n


@dataclass(frozen=True)
class ConstantIndex:
    """Dispersionless medium."""

    n: float
    name: str = ""

    def __post_init__(self) -> None:
        if not 1.0 < self.n < 3.0:
            raise ConfigError(f"constant index {self.n} outside (1, 3)")

    def __call__(self, wavelength: ArrayLike) -> NDArray[np.float64]:
        lam = np.asarray(wavelength, dtype=float)
        _check_band(lam)
        return np.full(lam.shape, float(self.n))


@dataclass(frozen=True)
class SellmeierIndex:
    """``n^2 = a + sum b l^2/(l^2 - c) + sum p/(l^2 - q) - ir l^2`` with l in um.

    ``terms`` holds the standard ``(b, c)`` resonances, ``poles`` the
    ``(p, q)`` pairs of the Zernike-style form and ``ir`` the infrared
    correction. Unused parts are left empty.
    """

    a: float
    terms: tuple[tuple[float, float], ...] = ()
    poles: tuple[tuple[float, float], ...] = ()
    ir: float = 0.0
    name: str = ""
    citation: str = field(default="", compare=False)

    def index_squared(self, wavelength_um: NDArray) -> NDArray:
        l2 = wavelength_um**2
        n2 = np.full(l2.shape, float(self.a))
        for b, c in self.terms:
            n2 = n2 + b * l2 / (l2 - c)
        for p, q in self.poles:
            n2 = n2 + p / (l2 - q)
        return n2 - self.ir * l2

    def __call__(self, wavelength: ArrayLike) -> NDArray[np.float64]:
        lam = np.asarray(wavelength, dtype=float)
        _check_band(lam)
        return _check_index(np.sqrt(self.index_squared(lam * 1e6)), self)


IndexModel = Union[ConstantIndex, SellmeierIndex]


def refractive_index(model: IndexModel, wavelength: ArrayLike) -> NDArray[np.float64]:
    """Evaluate ``model`` at ``wavelength`` (m); raises BandError out of band."""
    return model(wavelength)


def extraordinary_index_at_angle(n_o: ArrayLike, n_e: ArrayLike, theta: ArrayLike) -> NDArray:
    """Index of the extraordinary wave at angle ``theta`` to the optic axis.

    Solves ``1/n^2 = cos^2(theta)/n_o^2 + sin^2(theta)/n_e^2``.
    """
    n_o = np.asarray(n_o, dtype=float)
    n_e = np.asarray(n_e, dtype=float)
    if np.any(n_o <= 1.0) or np.any(n_e <= 1.0):
        raise ValueError("principal indices must exceed 1")
    c, s = np.cos(theta), np.sin(theta)
    return 1.0 / np.sqrt(c**2 / n_o**2 + s**2 / n_e**2)


def omega_to_wavelength(omega: ArrayLike) -> NDArray:
    return 2 * np.pi * SPEED_OF_LIGHT / np.asarray(omega, dtype=float)


def wavelength_to_omega(wavelength: ArrayLike) -> NDArray:
    return 2 * np.pi * SPEED_OF_LIGHT / np.asarray(wavelength, dtype=float)


# --- beta-barium borate --------------------------------------------------------

_EIMERL = "D. Eimerl et al., J. Appl. Phys. 62, 1968 (1987)"

BBO_ORDINARY = SellmeierIndex(
    a=2.7405, poles=((0.0184, 0.0179),), ir=0.0155, name="BBO o", citation=_EIMERL
)
BBO_EXTRAORDINARY = SellmeierIndex(
    a=2.3730, poles=((0.0128, 0.0156),), ir=0.0044, name="BBO e", citation=_EIMERL
)

# --- crystalline quartz ----------------------------------------------------------

#: Constant indices used for the buried-reflector and two-surface simulations.
QUARTZ_N_O = 1.53773
QUARTZ_N_E = 1.54661
QUARTZ_ORDINARY = ConstantIndex(QUARTZ_N_O, name="quartz o")
QUARTZ_EXTRAORDINARY = ConstantIndex(QUARTZ_N_E, name="quartz e")

_GHOSH = "G. Ghosh, Opt. Commun. 163, 95 (1999)"

QUARTZ_SELLMEIER_ORDINARY = SellmeierIndex(
    a=1.28604141,
    terms=((1.07044083, 1.00585997e-2), (1.10202242, 100.0)),
    name="quartz o (Sellmeier)",
    citation=_GHOSH,
)
QUARTZ_SELLMEIER_EXTRAORDINARY = SellmeierIndex(
    a=1.28851804,
    terms=((1.09509924, 1.02101864e-2), (1.15662475, 100.0)),
    name="quartz e (Sellmeier)",
    citation=_GHOSH,
)

#: Named (ordinary, extraordinary) pairs accepted in sample and source files.
MATERIALS: dict[str, tuple[IndexModel, IndexModel]] = {
    "quartz": (QUARTZ_ORDINARY, QUARTZ_EXTRAORDINARY),
    "quartz-sellmeier": (QUARTZ_SELLMEIER_ORDINARY, QUARTZ_SELLMEIER_EXTRAORDINARY),
    "bbo": (BBO_ORDINARY, BBO_EXTRAORDINARY),
}


def material(name: str) -> tuple[IndexModel, IndexModel]:
    try:
        return MATERIALS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown material {name!r}; known: {sorted(MATERIALS)}") from None
