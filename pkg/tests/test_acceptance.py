"""Acceptance criteria, one marked group per criterion, each at its stated tolerance."""

import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from psqoct import cli, jones
from psqoct import extract as X
from psqoct import interferometer as I
from psqoct import sample as S
from psqoct.errors import IndeterminateAlphaError
from psqoct.io import read_interferogram
from psqoct.materials import SPEED_OF_LIGHT, ConstantIndex

N_E, N_O = 1.54661, 1.53773  # constant quartz indices of the presets


def forward_delta(omega0, thickness):
    return omega0 * (N_O - N_E) * thickness / SPEED_OF_LIGHT


# --- 1 ------------------------------------------------------------------------------


@pytest.mark.criterion(1, "fig4 preset: one dip, V/H ratio = tan^2(delta) within 1%, R_T min <= 0.01, runtime < 10 s")
def test_fig4_reproduction(tmp_path, measured):
    prefix = tmp_path / "fig4"
    start = time.perf_counter()
    assert cli.main(["simulate", "--preset", "fig4", "-o", str(prefix)]) == 0
    elapsed = time.perf_counter() - start
    ig, meta = read_interferogram(prefix.with_suffix(".csv"))
    assert ig.positions.size == 1000 and meta["spectrum"]["points"] == 4096

    dips = [f for f in X.find_dips(ig) if f.kind == X.INTERFACE]
    assert len(dips) == 1
    rep = X.layer_report(dips, ig)
    delta = forward_delta(meta["source"]["omega0"], 120e-6)
    ratio = rep.lambda_v / rep.lambda_h
    measured(f"dips={len(dips)} at {dips[0].position * 1e6:.3f} um; delta={delta:.6f} rad")
    measured(f"Lambda_V/Lambda_H={ratio:.9f} vs tan^2(delta)={np.tan(delta) ** 2:.9f}")
    measured(f"min R_T={ig.R_T.min():.3g}; simulate wall time {elapsed:.2f} s")
    assert ratio == pytest.approx(np.tan(delta) ** 2, rel=0.01)
    assert ig.R_T.min() <= 0.01
    assert elapsed < 10.0


# --- 2 ------------------------------------------------------------------------------


@pytest.mark.criterion(2, "fig5 preset: separation 223.6 um +/-2%, depth ratio 1 +/-2%, midpoint within 1 step, no R_V dip at the front")
def test_fig5_reproduction(tmp_path, measured):
    prefix = tmp_path / "fig5"
    assert cli.main(["simulate", "--preset", "fig5", "-o", str(prefix)]) == 0
    ig, _ = read_interferogram(prefix.with_suffix(".csv"))
    feats = X.find_dips(ig)
    dips = [f for f in feats if f.kind == X.INTERFACE]
    mids = [f for f in feats if f.kind == X.MIDPOINT]
    assert len(dips) == 2 and len(mids) == 1
    nbar_l = 0.5 * (N_E + N_O) * 145e-6
    sep = dips[1].position - dips[0].position
    ratio = dips[0].depth / dips[1].depth
    centre = 0.5 * (dips[0].position + dips[1].position)
    step = ig.step
    x = ig.positions
    front = np.abs(x - dips[0].position) < 10e-6
    back = np.abs(x - dips[1].position) < 10e-6
    contrast = np.max(np.abs(1 - ig.R_V[front])) / np.max(np.abs(1 - ig.R_V[back]))
    measured(f"separation={sep * 1e6:.4f} um vs nbar*L={nbar_l * 1e6:.4f} um; depth ratio={ratio:.6f}")
    measured(f"midpoint {mids[0].position * 1e6:.4f} um, offset {abs(mids[0].position - centre) / step:.3f} steps; R_V front/back contrast={contrast:.2e}")
    assert sep == pytest.approx(nbar_l, rel=0.02)
    assert sep == pytest.approx(223.6e-6, rel=0.02)
    assert ratio == pytest.approx(1.0, rel=0.02)
    assert abs(mids[0].position - centre) <= step
    assert contrast < 0.01


# --- 3 ------------------------------------------------------------------------------

GVD_VALUES = [0.0, 5e-23, 1e-22, 2e-22, 3e-22]


def _half_max_band(spectrum):
    inside = spectrum.weights >= 0.5 * spectrum.weights.max()
    return float(np.max(np.abs(spectrum.offsets[inside])))


@pytest.mark.criterion(3, "dispersion cancellation: buried-reflector dip unchanged by beta'' (< 1e-9), midpoint FWHM grows >= 10%")
def test_single_reflector_ignores_gvd(preset_run, measured):
    run = preset_run("fig4")
    w0 = run.spectrum.omega0
    base = None
    worst = 0.0
    for gvd in GVD_VALUES:
        lay = S.Layer(120e-6, 0.0, ConstantIndex(N_O), ConstantIndex(N_E), extra_gvd=gvd, reference_omega=w0, freeze_retardance=True)
        ig = I.simulate(S.LayeredSample.build([0.0, 1.0], [lay]), run.spectrum, run.bs, run.positions)
        trace = np.concatenate([ig.R_H, ig.R_V, ig.R_T])
        if base is None:
            base = trace
            continue
        worst = max(worst, float(np.max(np.abs(trace - base)) / np.max(np.abs(base))))
    measured(f"single reflector: max relative sup-norm change {worst:.2e} for beta'' up to {GVD_VALUES[-1]:.1e} s^2/m")
    assert worst < 1e-9


@pytest.mark.criterion(3, "dispersion cancellation: buried-reflector dip unchanged by beta'' (< 1e-9), midpoint FWHM grows >= 10%")
def test_midpoint_broadens_with_gvd(preset_run, measured):
    run = preset_run("fig5")
    w0 = run.spectrum.omega0
    z = 145e-6
    band = _half_max_band(run.spectrum)
    widths = []
    for gvd in GVD_VALUES:
        lay = S.Layer(z, 0.0, ConstantIndex(N_O), ConstantIndex(N_E), extra_gvd=gvd, reference_omega=w0, freeze_retardance=True)
        ig = I.simulate(S.LayeredSample.build([0.5**0.5, 0.5**0.5], [lay]), run.spectrum, run.bs, run.positions)
        # strong chirp splits the cross term into lobes; the two deepest dips are the interfaces
        dips = sorted((f for f in X.find_dips(ig) if f.sign < 0), key=lambda f: f.depth)[-2:]
        left, right = sorted(f.position for f in dips)
        widths.append(X.midpoint_width(ig.positions, ig.R_T, left, right))
    span = GVD_VALUES[-1] * z * band**2  # quadratic phase of the cross term across the half-maximum band
    growth = widths[-1] / widths[0] - 1
    measured("midpoint FWHM (um): " + ", ".join(f"{g:.0e}->{w * 1e6:.2f}" for g, w in zip(GVD_VALUES, widths)))
    measured(f"growth {growth * 100:.1f}% ; quadratic phase span at largest beta'' {span:.2f} rad")
    assert span >= np.pi
    assert np.all(np.diff(widths) > 0)
    assert growth >= 0.10


# --- 4 ------------------------------------------------------------------------------


@pytest.mark.criterion(4, "closed-form two-layer oracle vs N-layer engine < 1e-9 relative (20 samples x 200 delays)")
def test_oracle_equivalence(bbo_spectrum, measured):
    rng = np.random.default_rng(4)
    w0 = bbo_spectrum.omega0
    worst = 0.0
    for _ in range(20):
        z = rng.uniform(10e-6, 300e-6)
        lay = S.Layer(
            z,
            rng.uniform(0, np.pi),
            ConstantIndex(rng.uniform(1.5, 1.7)),
            ConstantIndex(rng.uniform(1.5, 1.7)),
            extra_gvd=rng.uniform(0, 3e-23),
            reference_omega=w0,
            freeze_retardance=bool(rng.integers(2)),
        )
        r = rng.uniform(0.1, 1, 2) * np.exp(2j * np.pi * rng.uniform(size=2))
        smp = S.LayeredSample.build(list(r), [lay])
        arm = I.ReferenceArm(rng.uniform(0, np.pi), rng.uniform(0, np.pi)) if rng.integers(2) else I.ReferenceArm(rng.uniform(0, np.pi))
        group = 4 * S.dispersion_expansion(lay, w0).beta1 * z
        tau = rng.uniform(-0.2 * group, 1.2 * group, 200)
        model = I.CoincidenceModel(smp, bbo_spectrum)
        engine = model.lambda_varying(arm, tau)
        oracle = I.closed_form_two_layer(smp, bbo_spectrum, arm, tau)
        scale = model.lambda0()
        worst = max(worst, float(np.max(np.abs(engine - oracle)) / scale))
        assert I.closed_form_two_layer_constant(smp, bbo_spectrum) == pytest.approx(scale, rel=1e-9)
    measured(f"max |engine - oracle| / Lambda0 = {worst:.2e}")
    assert worst < 1e-9


# --- 5 ------------------------------------------------------------------------------


def _expm_taylor(a, terms=60):
    out = np.eye(2, dtype=complex)
    term = np.eye(2, dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


@pytest.mark.criterion(5, "algebra suite: Pauli identities, exp_pauli vs Taylor series, unitarity, all < 1e-12")
def test_algebra_suite(measured):
    rng = np.random.default_rng(5)
    eye = np.eye(2)
    sig = [jones.SIGMA1, jones.SIGMA2, jones.SIGMA3]
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1
    worst_pauli = 0.0
    for i in range(3):
        for j in range(3):
            expected = (i == j) * eye + 1j * sum(eps[i, j, k] * sig[k] for k in range(3))
            worst_pauli = max(worst_pauli, np.max(np.abs(sig[i] @ sig[j] - expected)))
        worst_pauli = max(worst_pauli, np.max(np.abs(sig[i] - sig[i].conj().T)))
    worst_exp = 0.0
    for gamma in rng.uniform(-3, 3, 20):
        for s in sig:
            worst_exp = max(worst_exp, np.max(np.abs(jones.exp_pauli(gamma, s) - _expm_taylor(-1j * gamma * s))))
    elements = [jones.quarter_wave_45()]
    for a, b in rng.uniform(-np.pi, np.pi, (20, 2)):
        elements += [jones.rotator(a), jones.retarder(b), jones.wave_plate(b, a), jones.half_wave(a), jones.quarter_wave(a)]
        elements += [I.reference_operator(I.ReferenceArm(a, b)), I.reference_operator(I.ReferenceArm(a))]
        lay = S.Layer(100e-6, a)
        elements += [S.layer_matrix(lay, 2.3e15), S.layer_matrix(lay, 2.3e15, tilde=True)]
    worst_unit = max(float(np.max(np.abs(m @ m.conj().T - eye))) for m in elements)
    measured(f"Pauli {worst_pauli:.1e}; exp_pauli vs Taylor {worst_exp:.1e}; unitarity {worst_unit:.1e} over {len(elements)} elements")
    assert worst_pauli < 1e-12 and worst_exp < 1e-12 and worst_unit < 1e-12


# --- 6 ------------------------------------------------------------------------------


def _layer_with_retardance(delta, alpha, omega0, thickness=100e-6, n_o=1.55):
    n_e = n_o - delta * SPEED_OF_LIGHT / (omega0 * thickness)
    return S.Layer(thickness, alpha, ConstantIndex(n_o), ConstantIndex(n_e), reference_omega=omega0, freeze_retardance=True)


@pytest.mark.criterion(6, "extraction round trip: 50 random (delta, alpha), delta and alpha within 1e-3 rad, residuals < 1e-6")
def test_round_trip(bbo_spectrum, measured):
    rng = np.random.default_rng(6)
    w0 = bbo_spectrum.omega0
    err_d = err_a = worst_res = 0.0
    for _ in range(50):
        delta, alpha = rng.uniform(0.1, 1.4), rng.uniform(0, np.pi)
        lay = _layer_with_retardance(delta, alpha, w0)
        model = I.CoincidenceModel(S.LayeredSample.build([0.0, 1.0], [lay]), bbo_spectrum)
        ctau = SPEED_OF_LIGHT * S.dispersion_expansion(lay, w0).beta1 * lay.thickness
        rep = X.nulling_protocol(model, ctau)
        err_d = max(err_d, abs(rep.delta_est - delta))
        err_a = max(err_a, abs(np.angle(np.exp(2j * (rep.alpha_est - alpha)))) / 2)
        worst_res = max(worst_res, float(np.hypot(*rep.residuals)))
    measured(f"max |delta error| {err_d:.1e} rad; max |alpha error| {err_a:.1e} rad; max residual {worst_res:.1e}")
    assert err_d < 1e-3 and err_a < 1e-3 and worst_res < 1e-6


@pytest.mark.criterion(6, "extraction round trip: 50 random (delta, alpha), delta and alpha within 1e-3 rad, residuals < 1e-6")
@pytest.mark.parametrize("delta", [0.0, 1e-9])
def test_round_trip_degenerate(bbo_spectrum, delta, measured):
    w0 = bbo_spectrum.omega0
    lay = _layer_with_retardance(delta, 0.7, w0)
    model = I.CoincidenceModel(S.LayeredSample.build([0.0, 1.0], [lay]), bbo_spectrum)
    ctau = SPEED_OF_LIGHT * S.dispersion_expansion(lay, w0).beta1 * lay.thickness
    with pytest.raises(IndeterminateAlphaError):
        X.nulling_protocol(model, ctau)
    measured(f"delta={delta:g}: IndeterminateAlphaError raised")


# --- 7 ------------------------------------------------------------------------------


@pytest.mark.criterion(7, "numerical hygiene: grid doubling < 1e-6, normalization invariance < 1e-12, byte-identical CLI reruns")
def test_grid_refinement(preset_run, measured):
    from psqoct import io

    worst = 0.0
    for name in ("fig4", "fig5"):
        run = preset_run(name)
        fine = io.source_from_dict({**run.config.source, "grid_points": 2 * run.config.source["grid_points"]}).spectrum
        ig = I.simulate(run.sample, fine, run.bs, run.positions)
        base = run.interferogram
        worst = max(worst, *(float(np.max(np.abs(getattr(ig, k) - getattr(base, k)))) for k in ("R_H", "R_V", "R_T")))
    measured(f"frequency-grid doubling: max sup-norm change {worst:.1e}")
    assert worst < 1e-6


@pytest.mark.criterion(7, "numerical hygiene: grid doubling < 1e-6, normalization invariance < 1e-12, byte-identical CLI reruns")
def test_normalization_invariance(preset_run, measured):
    run = preset_run("fig5")
    worst = 0.0
    for factor in (1e-6, 3.7, 1e4):
        ig = I.simulate(run.sample, run.spectrum.scaled(factor), run.bs, run.positions)
        worst = max(worst, *(float(np.max(np.abs(getattr(ig, k) - getattr(run.interferogram, k)))) for k in ("R_H", "R_V", "R_T")))
    measured(f"spectral weight rescaling: max change {worst:.1e}")
    assert worst < 1e-12


@pytest.mark.criterion(7, "numerical hygiene: grid doubling < 1e-6, normalization invariance < 1e-12, byte-identical CLI reruns")
def test_byte_identical_reruns(tmp_path, measured):
    outputs = []
    for threads in ("1", "3", "8"):
        work = tmp_path / f"threads{threads}"
        work.mkdir()
        env = os.environ | {"QOCT_THREADS": threads}
        for args in (["simulate", "--preset", "fig5", "-o", "fig5"], ["extract", "fig5.csv", "-o", "report.json"]):
            res = subprocess.run([sys.executable, "-m", "psqoct", *args], capture_output=True, env=env, cwd=work)
            assert res.returncode == 0, res.stderr
        outputs.append(b"".join((work / name).read_bytes() for name in ("fig5.csv", "fig5.json", "report.json")))
    measured(f"3 runs (QOCT_THREADS=1,3,8): {'identical' if len(set(outputs)) == 1 else 'DIFFERENT'} bytes")
    assert len(set(outputs)) == 1
