"""Inverse analysis of coincidence interferograms.

Three measurements are combined: H and V scans locate the interfaces and fix
the retardance through the ratio of the two dip depths, and a nulling search
over the reference-arm cascade fixes the optical-axis angle.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize, minimize_scalar
from scipy.signal import find_peaks

from psqoct.errors import DegenerateInputError, DegenerateLandscapeError, IndeterminateAlphaError
from psqoct.interferometer import (
    BeamSplitter,
    CoincidenceModel,
    Interferogram,
    ReferenceArm,
    cascade_states,
    ctau_to_delay,
    reference_state,
)

INTERFACE = "interface-dip"
MIDPOINT = "midpoint-feature"
DEFAULT_PROMINENCE = 0.05
ALPHA_COEFF_FLOOR = 1e-6

ForwardModel = Callable[[NDArray, NDArray, float], NDArray]


# --- feature detection ----------------------------------------------------------


@dataclass(frozen=True)
class DipFeature:
    """A dip or peak of a normalized interferogram.

    ``depth`` is the distance from the baseline (always positive); ``sign`` is
    -1 for a dip and +1 for a peak. Positions and widths are on the ``ctau``
    axis (m).
    """

    position: float
    depth: float
    width: float
    kind: str
    sign: int = -1
    index: int = 0

    @property
    def value(self) -> float:
        return 1.0 + self.sign * self.depth


def _parabolic(y: NDArray, i: int) -> tuple[float, float]:
    """Vertex offset (in grid steps) and value of the parabola through ``y[i-1:i+2]``."""
    if i <= 0 or i >= len(y) - 1:
        return 0.0, float(y[i])
    a, b, c = y[i - 1], y[i], y[i + 1]
    curv = a - 2 * b + c
    if curv == 0:
        return 0.0, float(b)
    offset = 0.5 * (a - c) / curv
    return float(offset), float(b - 0.25 * (a - c) * offset)


def _sample_at(x: NDArray, y: NDArray, i: int, offset: float) -> float:
    """Quadratic interpolation of ``y`` at ``x[i] + offset * step``."""
    if i <= 0 or i >= len(y) - 1:
        return float(y[i])
    a, b, c = y[i - 1], y[i], y[i + 1]
    t = offset
    return float(b + 0.5 * t * (c - a) + 0.5 * t * t * (a - 2 * b + c))


def _half_width(x: NDArray, excursion: NDArray, i: int, half: float, lo: int = 0, hi: int | None = None) -> float:
    """Full width at ``half`` of a positive ``excursion`` around index ``i``.

    Walks outward to the first crossings and interpolates linearly.
    """
    hi = len(x) - 1 if hi is None else hi
    left = i
    while left > lo and excursion[left] >= half:
        left -= 1
    right = i
    while right < hi and excursion[right] >= half:
        right += 1
    return _crossing(x, excursion, right - 1, right, half) - _crossing(x, excursion, left, left + 1, half)


def _crossing(x: NDArray, y: NDArray, a: int, b: int, level: float) -> float:
    a = max(a, 0)
    b = min(b, len(x) - 1)
    if a == b or y[a] == y[b]:
        return float(x[a])
    t = (level - y[a]) / (y[b] - y[a])
    return float(x[a] + np.clip(t, 0.0, 1.0) * (x[b] - x[a]))


def _extrema(x: NDArray, y: NDArray, sign: int, prominence: float, baseline: float) -> list[DipFeature]:
    excursion = sign * (y - baseline)
    idx, _ = find_peaks(excursion, height=prominence, prominence=prominence)
    step = float(x[1] - x[0]) if len(x) > 1 else 0.0
    out = []
    for i in idx:
        offset, peak = _parabolic(excursion, int(i))
        width = _half_width(x, excursion, int(i), 0.5 * peak)
        out.append(DipFeature(float(x[i] + offset * step), peak, width, INTERFACE, sign, int(i)))
    return out


def find_features(
    positions: ArrayLike,
    values: ArrayLike,
    prominence: float = DEFAULT_PROMINENCE,
    baseline: float = 1.0,
) -> list[DipFeature]:
    """Dips and peaks of a normalized trace, classified by position.

    Dips deeper than ``prominence`` below ``baseline`` are interface
    candidates. A dip that sits within one grid step of the mean of two other
    dips, and any such peak, is a midpoint feature. Peaks that are not at a
    midpoint are dropped. Results are sorted by position.
    """
    x = np.asarray(positions, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size < 3:
        return []
    if np.any(np.diff(x) <= 0):
        raise ValueError("positions must be strictly increasing")
    step = float(np.median(np.diff(x)))
    dips = _extrema(x, y, -1, prominence, baseline)
    peaks = _extrema(x, y, +1, prominence, baseline)

    def at_midpoint(feature: DipFeature, anchors: Sequence[DipFeature]) -> bool:
        for a in anchors:
            for b in anchors:
                if a.position < feature.position < b.position:
                    if abs(feature.position - 0.5 * (a.position + b.position)) <= step:
                        return True
        return False

    interfaces, midpoints = [], []
    for d in dips:
        others = [o for o in dips if o is not d]
        if at_midpoint(d, others) and d.depth < min(o.depth for o in others):
            midpoints.append(d)
        else:
            interfaces.append(d)
    for p in peaks:
        if at_midpoint(p, interfaces):
            midpoints.append(p)
    features = [replace_kind(d, INTERFACE) for d in interfaces]
    features += [replace_kind(m, MIDPOINT) for m in midpoints]
    return sorted(features, key=lambda f: f.position)


def replace_kind(feature: DipFeature, kind: str) -> DipFeature:
    return DipFeature(feature.position, feature.depth, feature.width, kind, feature.sign, feature.index)


def find_dips(interferogram: Interferogram, prominence: float = DEFAULT_PROMINENCE) -> list[DipFeature]:
    """Interface dips and midpoint features of ``R_T``."""
    return find_features(interferogram.positions, interferogram.R_T, prominence)


def midpoint_width(
    positions: ArrayLike, values: ArrayLike, left: float, right: float, baseline: float = 1.0
) -> float:
    """Width of the cross-term feature between two interface dips.

    Uses the outermost half-maximum crossings of ``|R - baseline|`` inside the
    middle half of ``(left, right)``, so a chirped feature with internal
    oscillations is measured by its envelope.
    """
    x = np.asarray(positions, dtype=float)
    y = np.abs(np.asarray(values, dtype=float) - baseline)
    quarter = 0.25 * (right - left)
    inside = np.flatnonzero((x > left + quarter) & (x < right - quarter))
    if inside.size < 3:
        raise ValueError("too few samples between the two dips")
    seg = y[inside]
    half = 0.5 * seg.max()
    above = np.flatnonzero(seg >= half)
    first, last = inside[above[0]], inside[above[-1]]
    return _crossing(x, y, last, last + 1, half) - _crossing(x, y, first - 1, first, half)


# --- retardance -----------------------------------------------------------------


def delta_from_ratio(lambda_v: float, lambda_h: float, floor: float = 1e-12) -> float:
    """Principal retardance ``atan2(sqrt(Lambda_V), sqrt(Lambda_H))`` in ``[0, pi/2]``.

    Tiny negative inputs from quadrature noise are treated as zero.
    """
    lv, lh = float(lambda_v), float(lambda_h)
    if lv < -1e-6 or lh < -1e-6:
        raise ValueError(f"dip levels must be non-negative, got V={lv:.3g}, H={lh:.3g}")
    lv, lh = max(lv, 0.0), max(lh, 0.0)
    if not lv + lh > floor:
        raise DegenerateInputError("both H and V dip levels vanish; retardance undefined")
    return float(np.arctan2(np.sqrt(lv), np.sqrt(lh)))


def retardance_branches(principal: float, max_winding: int = 3) -> list[float]:
    """Every ``|delta|`` with the same V/H ratio: ``k pi +/- principal``, ``k <= max_winding``."""
    values = set()
    for k in range(max_winding + 1):
        for cand in (k * np.pi - principal, k * np.pi + principal):
            if cand >= 0:
                values.add(round(float(cand), 15))
    return sorted(values)


# --- nulling ----------------------------------------------------------------------


@dataclass(frozen=True)
class NullResult:
    theta: float
    phi: float
    rate: float
    coarse_theta: float
    coarse_phi: float
    iterations: int


def rate_model(model: CoincidenceModel, bs: BeamSplitter | None = None) -> ForwardModel:
    """Normalized coincidence rate as a function of the cascade angles.

    Returns ``f(theta, phi, tau)`` with ``tau`` the path delay (s); the
    coherency matrix at each requested delay is computed once and cached.
    """
    bs = bs or BeamSplitter()
    lam0 = model.lambda0()
    cache: dict[float, NDArray] = {}

    def forward(theta: NDArray, phi: NDArray, tau: float) -> NDArray:
        key = float(tau)
        if key not in cache:
            cache[key] = model.coherency(np.array([2.0 * key]))[0]
        v = cascade_states(theta, phi)
        lam = np.einsum("...i,ij,...j->...", np.conj(v), cache[key], v).real
        if lam0 <= 0:
            return np.zeros(np.shape(lam))
        return 1.0 - bs.visibility * lam / lam0

    return forward


def _line_max(f: Callable[[float], float], start: float, half_width: float) -> float:
    res = minimize_scalar(
        lambda t: -f(t), bounds=(start - half_width, start + half_width), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x) if -res.fun >= f(start) else start


def null_search(
    forward_model: ForwardModel,
    tau_star: float,
    coarse_step: float = np.deg2rad(1.0),
    tol: float = 1e-10,
    coordinate_sweeps: int = 20,
) -> NullResult:
    """Maximize ``forward_model(theta, phi, tau_star)`` over the cascade angles.

    A coarse grid over one period (``theta`` in ``[0, pi/2)``, ``phi`` in
    ``[0, pi)``) is followed by coordinate descent with bounded scalar
    searches and a Nelder-Mead polish. Ties on the grid go to the
    lexicographically smallest ``(theta, phi)``. ``forward_model`` must
    broadcast over angle arrays.
    """
    if coarse_step <= 0:
        raise ValueError("coarse_step must be positive")
    thetas = np.arange(0.0, np.pi / 2, coarse_step)
    phis = np.arange(0.0, np.pi, coarse_step)
    grid = np.asarray(forward_model(thetas[:, None], phis[None, :], tau_star), dtype=float)
    grid = np.broadcast_to(grid, (thetas.size, phis.size))
    top, bottom = float(grid.max()), float(grid.min())
    if top - bottom <= 1e-12 * max(1.0, abs(top)):
        raise DegenerateLandscapeError(
            "coincidence rate does not depend on the reference-arm angles "
            "(no reflected light or no polarization change)"
        )
    i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
    theta, phi = float(thetas[i]), float(phis[j])

    def rate(t: float, p: float) -> float:
        return float(forward_model(np.asarray(t), np.asarray(p), tau_star))

    sweeps = 0
    for sweeps in range(1, coordinate_sweeps + 1):
        new_theta = _line_max(lambda t: rate(t, phi), theta, coarse_step)
        new_phi = _line_max(lambda p: rate(new_theta, p), phi, coarse_step)
        moved = max(abs(new_theta - theta), abs(new_phi - phi))
        theta, phi = new_theta, new_phi
        if moved < tol:
            break
    # The null sits in a skewed valley (Hessian condition numbers near 1e3 are
    # common), where coordinate steps zigzag; a simplex polish finishes it.
    polish = minimize(
        lambda x: -rate(x[0], x[1]),
        np.array([theta, phi]),
        method="Nelder-Mead",
        options={
            "xatol": tol,
            "fatol": 0.0,
            "maxiter": 4000,
            "initial_simplex": np.array([[theta, phi], [theta + 1e-3, phi], [theta, phi + 1e-3]]),
        },
    )
    if -polish.fun >= rate(theta, phi):
        theta, phi = float(polish.x[0]), float(polish.x[1])
    best = rate(theta, phi)
    return NullResult(
        theta=float(np.mod(theta, np.pi / 2)),
        phi=float(np.mod(phi, np.pi)),
        rate=best,
        coarse_theta=float(thetas[i]),
        coarse_phi=float(phis[j]),
        iterations=sweeps,
    )


def _cascade_coefficients(theta: float, phi: float) -> tuple[complex, complex]:
    p = np.cos(2 * theta) - 1j * np.cos(2 * (phi - theta))
    q = np.sin(2 * theta) - 1j * np.sin(2 * (phi - theta))
    return complex(p), complex(q)


def orthonormality_residuals(theta: float, phi: float, alpha: float, delta: float) -> tuple[float, float]:
    """Real and imaginary parts of ``sqrt(2) F_1`` for the cascade arm.

    Both vanish when the reference state is orthogonal to the light returned
    by the buried interface.
    """
    p, q = _cascade_coefficients(theta, phi)
    value = np.cos(delta) * p + np.sin(delta) * q * np.exp(2j * alpha)
    return float(value.real), float(value.imag)


def alpha_from_null(theta_star: float, phi_star: float, delta: float) -> float:
    """Optical-axis angle in ``[0, pi)`` from a null and a known retardance.

    Solves both orthonormality conditions jointly in the least-squares sense
    for the unit phasor ``exp(2i alpha)``.
    """
    p, q = _cascade_coefficients(theta_star, phi_star)
    s, c = np.sin(delta), np.cos(delta)
    if abs(s * q) < ALPHA_COEFF_FLOOR:
        raise IndeterminateAlphaError(
            "the null does not depend on the axis angle (sin(delta) * q vanishes)"
        )
    target = -c * p * np.conj(q) / s
    if abs(target) < ALPHA_COEFF_FLOOR * abs(q) ** 2:
        raise IndeterminateAlphaError("retardance is a quarter wave; the null is independent of alpha")
    return float(np.mod(0.5 * np.angle(target), np.pi))


# --- reports ------------------------------------------------------------------------


@dataclass
class ExtractionReport:
    """Everything recovered from one interferogram (and optionally a null)."""

    interface_positions: list[float]
    separations: list[float]
    depths: list[float]
    reflectance_ratio: float | None
    delta_est: float | None
    delta_branches: list[float] = field(default_factory=list)
    lambda_h: float | None = None
    lambda_v: float | None = None
    target_interface: int | None = None
    alpha_est: float | None = None
    theta_star: float | None = None
    phi_star: float | None = None
    residuals: tuple[float, float] | None = None
    midpoints: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def layer_report(
    features: Sequence[DipFeature],
    interferogram: Interferogram | None = None,
    target: int = -1,
    max_winding: int = 3,
) -> ExtractionReport:
    """Assemble positions, separations, depth ratio and retardance.

    ``target`` selects which interface dip carries the retardance estimate
    (default: the deepest-buried one). Dip depths of ``R_T`` are proportional
    to ``|r_m|^2``, so the first two give ``|r_0 / r_1|^2``. The retardance
    needs ``interferogram`` for the H and V levels at the target dip.
    """
    dips = [f for f in features if f.kind == INTERFACE]
    mids = [f for f in features if f.kind == MIDPOINT]
    positions = [f.position for f in dips]
    depths = [f.depth for f in dips]
    report = ExtractionReport(
        interface_positions=positions,
        separations=[b - a for a, b in zip(positions, positions[1:])],
        depths=depths,
        reflectance_ratio=depths[0] / depths[1] if len(dips) >= 2 and depths[1] > 0 else None,
        delta_est=None,
        midpoints=[
            {"position": m.position, "height": m.sign * m.depth, "width": m.width} for m in mids
        ],
    )
    report.notes.append(
        "positions are c*tau/2 with tau the path delay; a separation equals c*beta1*z "
        "(the group path), which is nbar*z for dispersionless layers"
    )
    if not dips or interferogram is None:
        return report
    idx = target if target >= 0 else len(dips) + target
    dip = dips[idx]
    step = float(interferogram.positions[1] - interferogram.positions[0])
    offset = (dip.position - interferogram.positions[dip.index]) / step
    vis = interferogram.visibility
    r_h = _sample_at(interferogram.positions, interferogram.R_H, dip.index, offset)
    r_v = _sample_at(interferogram.positions, interferogram.R_V, dip.index, offset)
    report.lambda_h = (1.0 - r_h) / vis
    report.lambda_v = (1.0 - r_v) / vis
    report.target_interface = idx
    report.delta_est = delta_from_ratio(report.lambda_v, report.lambda_h)
    report.delta_branches = retardance_branches(report.delta_est, max_winding)
    report.notes.append(
        "delta is the principal value in [0, pi/2]; the V/H ratio cannot fix the sign "
        "or the branch, see delta_branches"
    )
    if len(dips) > 1 and idx == 0:
        report.notes.append("the front surface carries no retardance; choose a buried dip")
    return report


def extract_interferogram(
    interferogram: Interferogram, prominence: float = DEFAULT_PROMINENCE, max_winding: int = 3
) -> ExtractionReport:
    return layer_report(find_dips(interferogram, prominence), interferogram, max_winding=max_winding)


def projection_levels(model: CoincidenceModel, delay: float) -> tuple[float, float]:
    """``(Lambda_H, Lambda_V) / Lambda0`` at one path delay, from the coherency matrix."""
    lam0 = model.lambda0()
    if lam0 <= 0:
        raise DegenerateInputError("sample reflects no light")
    m = model.coherency(np.array([2.0 * delay]))[0]
    out = []
    for arm in (ReferenceArm.horizontal(), ReferenceArm.vertical()):
        v = reference_state(arm)
        out.append(float((np.conj(v) @ m @ v).real / lam0))
    return out[0], out[1]


def nulling_protocol(
    model: CoincidenceModel,
    ctau_star: float,
    bs: BeamSplitter | None = None,
    delta: float | None = None,
    coarse_step: float = np.deg2rad(1.0),
) -> ExtractionReport:
    """H, V and null measurements at one dip: retardance, null angles and axis angle.

    ``delta`` overrides the retardance estimate from the H/V levels.
    """
    tau = float(ctau_to_delay(ctau_star))
    lam_h, lam_v = projection_levels(model, tau)
    null = null_search(rate_model(model, bs), tau, coarse_step)
    principal = delta_from_ratio(lam_v, lam_h)
    used = principal if delta is None else float(delta)
    alpha = alpha_from_null(null.theta, null.phi, used)
    return ExtractionReport(
        interface_positions=[float(ctau_star)],
        separations=[],
        depths=[],
        reflectance_ratio=None,
        delta_est=principal,
        delta_branches=retardance_branches(principal),
        lambda_h=lam_h,
        lambda_v=lam_v,
        alpha_est=alpha,
        theta_star=null.theta,
        phi_star=null.phi,
        residuals=orthonormality_residuals(null.theta, null.phi, alpha, used),
        notes=[
            "alpha assumes the retardance used is the principal value with a positive sign; "
            "a negative retardance shifts alpha by pi/2"
        ],
    )
