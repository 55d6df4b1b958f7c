"""Jones calculus on complex 2x2 matrices.

Matrices are plain numpy arrays of shape ``(..., 2, 2)`` and vectors have
shape ``(..., 2)``. Every function broadcasts over the leading axes, so a
whole frequency grid of layer matrices is built in one call.

Conventions
-----------
* ``E_S = [1, 0]`` is the signal polarization, ``E_I = [0, 1]`` the idler.
* ``exp_pauli(g, s)`` is ``exp(-i g s) = cos(g) I - i sin(g) s``.
* ``rotator(a) = exp(-i a sigma_2)``; a linear retarder with its fast axis
  horizontal is ``retarder(d) = exp(+i (d/2) sigma_3)``.
* ``quarter_wave_45()`` maps ``E_S`` to the state we call left circular.
  Handedness is a labelling choice only; nothing downstream depends on it.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

Matrix = NDArray[np.complex128]
Vector = NDArray[np.complex128]

IDENTITY: Matrix = np.eye(2, dtype=complex)
IDENTITY.setflags(write=False)

_PAULI_ENTRIES = {
    1: [[0, 1], [1, 0]],
    2: [[0, -1j], [1j, 0]],
    3: [[1, 0], [0, -1]],
}

E_S: Vector = np.array([1, 0], dtype=complex)
E_I: Vector = np.array([0, 1], dtype=complex)
E_S.setflags(write=False)
E_I.setflags(write=False)


def pauli(index: int) -> Matrix:
    """Return the Pauli matrix sigma_1, sigma_2 or sigma_3."""
    if isinstance(index, bool) or index not in _PAULI_ENTRIES:
        raise ValueError(f"Pauli index must be 1, 2 or 3, got {index!r}")
    return np.array(_PAULI_ENTRIES[index], dtype=complex)


SIGMA1 = pauli(1)
SIGMA2 = pauli(2)
SIGMA3 = pauli(3)
for _m in (SIGMA1, SIGMA2, SIGMA3):
    _m.setflags(write=False)


def exp_pauli(gamma: ArrayLike, sigma: Matrix) -> Matrix:
    """Closed-form ``exp(-i*gamma*sigma)`` for a Pauli matrix ``sigma``.

    ``gamma`` may be an array; the result then has shape ``gamma.shape + (2, 2)``.
    """
    g = np.asarray(gamma, dtype=float)[..., None, None]
    return np.cos(g) * IDENTITY - 1j * np.sin(g) * np.asarray(sigma, dtype=complex)


def rotator(alpha: ArrayLike) -> Matrix:
    """Rotation matrix ``R(alpha) = [[cos, -sin], [sin, cos]]``."""
    return exp_pauli(alpha, SIGMA2)


def retarder(retardance: ArrayLike) -> Matrix:
    """Linear retarder with its fast axis horizontal, ``exp(i (d/2) sigma_3)``."""
    return exp_pauli(-0.5 * np.asarray(retardance, dtype=float), SIGMA3)


def dagger(m: Matrix) -> Matrix:
    return np.conj(np.swapaxes(m, -1, -2))


def mul(m: Matrix, n: Matrix) -> Matrix:
    return np.matmul(m, n)


def apply(m: Matrix, v: Vector) -> Vector:
    return np.einsum("...ij,...j->...i", m, v)


def inner(u: Vector, v: Vector) -> NDArray[np.complex128]:
    """Hermitian inner product ``u^dagger v`` over the last axis."""
    return np.einsum("...i,...i->...", np.conj(u), v)


def wave_plate(retardance: ArrayLike, axis_angle: ArrayLike) -> Matrix:
    """Retarder of the given retardance with its fast axis at ``axis_angle``.

    ``W = R(a) b(d) R^dagger(a)``; ``wave_plate(d, 0)`` equals ``retarder(d)``.
    """
    r = rotator(axis_angle)
    return r @ retarder(retardance) @ dagger(r)


def half_wave(axis_angle: ArrayLike) -> Matrix:
    return wave_plate(np.pi, axis_angle)


def quarter_wave(axis_angle: ArrayLike) -> Matrix:
    return wave_plate(np.pi / 2, axis_angle)


def quarter_wave_45() -> Matrix:
    """``Q(45) = exp(i (pi/4) sigma_1)``, the sample-arm circularizing plate."""
    return exp_pauli(-np.pi / 4, SIGMA1)


def is_unitary(m: Matrix, atol: float = 1e-12) -> bool:
    eye = np.broadcast_to(IDENTITY, np.shape(m))
    return bool(np.allclose(dagger(m) @ m, eye, rtol=0.0, atol=atol))


def state_distance(u: Vector, v: Vector) -> float:
    """Distance between two Jones vectors, ignoring a global phase.

    Returns ``min_phi |u - exp(i phi) v|`` (largest over any broadcast axes).
    """
    overlap = inner(v, u)
    phase = np.exp(1j * np.angle(overlap))
    diff = np.asarray(u) - phase[..., None] * np.asarray(v)
    return float(np.max(np.linalg.norm(diff, axis=-1)))
