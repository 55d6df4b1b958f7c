"""Polarization-sensitive quantum-optical coherence tomography toolkit.

Forward model: coincidence interferograms of frequency-entangled photon pairs
reflected from layered birefringent samples. Inverse tools: dip location,
retardance from the V/H ratio, optical-axis angle from a nulling search.
"""

from psqoct.errors import (
    BandError,
    ConfigError,
    DegenerateError,
    DegenerateInputError,
    DegenerateLandscapeError,
    GridError,
    IndeterminateAlphaError,
    PhaseMatchingError,
    PhysicsError,
    QOCTError,
)

__version__ = "0.1.0"

__all__ = [
    "BandError",
    "ConfigError",
    "DegenerateError",
    "DegenerateInputError",
    "DegenerateLandscapeError",
    "GridError",
    "IndeterminateAlphaError",
    "PhaseMatchingError",
    "PhysicsError",
    "QOCTError",
]
