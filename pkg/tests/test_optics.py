"""Tests for pulse-train emission and AMZI demodulation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kstest

from qkdtx.optics import (
    TWO_PI,
    AmziConfig,
    DifferentialPhaseSequence,
    InjectionMode,
    InterferenceRecord,
    OpticalPulse,
    PulseTrain,
    SIGMA_PHI_REFERENCE_VISIBILITY,
    amzi_intensity,
    amzi_interfere,
    constellation_eye,
    dual_basis_demodulate,
    emit_pulse_train,
    fringe_scan,
    fringe_visibility,
    reduce_phase,
    sigma_phi_for_error_rate,
    sigma_phi_for_visibility,
)


def make_rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# types and phase arithmetic
# ---------------------------------------------------------------------------

@given(st.floats(min_value=-100.0, max_value=100.0))
def test_reduce_phase_range(phi):
    out = reduce_phase(phi)
    assert 0.0 <= out < TWO_PI


def test_reduce_phase_exact_two_pi_maps_to_zero():
    assert reduce_phase(TWO_PI) == 0.0
    assert reduce_phase(2 * TWO_PI) == 0.0


def test_optical_pulse_validation():
    p = OpticalPulse(3, 0.5, 7.0)
    assert p.phase == pytest.approx(7.0 - TWO_PI)
    with pytest.raises(ValueError):
        OpticalPulse(-1, 0.5, 0.0)
    with pytest.raises(ValueError):
        OpticalPulse(0, -0.5, 0.0)


def test_pulse_train_invariants():
    tr = PulseTrain([0.0, 1.0, 2.0], 0.5, 5e-10)
    assert tr.clock_hz == pytest.approx(2e9)
    assert [p.slot_index for p in tr.pulses] == [0, 1, 2]
    with pytest.raises(ValueError):
        PulseTrain([0.0], 0.5, 5e-10, clock_hz=3e9)
    with pytest.raises(ValueError):
        PulseTrain([], 0.5, 5e-10)
    with pytest.raises(ValueError):
        PulseTrain([0.0, 1.0], 0.5, 5e-10, diff_phases=[0.1, 0.2])


def test_sequence_grid_validation():
    DifferentialPhaseSequence([0.0, np.pi], 2)
    with pytest.raises(ValueError):
        DifferentialPhaseSequence([0.3], 2)
    with pytest.raises(ValueError):
        DifferentialPhaseSequence([0.0], 1)
    seq = DifferentialPhaseSequence.mpsk(4, [0, 1, 2, 3])
    assert seq.symbols[1].diff_phase == pytest.approx(np.pi / 2)


def test_injection_mode_validation():
    with pytest.raises(ValueError):
        InjectionMode("off", phase_sequence=DifferentialPhaseSequence([0.0], 2))
    with pytest.raises(ValueError):
        InjectionMode("modulated")
    with pytest.raises(ValueError):
        InjectionMode("cw", phase_noise_sigma=-0.1)
    with pytest.raises(ValueError):
        InjectionMode("squeezed")


def test_sigma_calibration_helpers():
    s = sigma_phi_for_visibility(0.983)
    assert s == pytest.approx(SIGMA_PHI_REFERENCE_VISIBILITY, abs=1e-12)
    assert np.exp(-s**2 / 2) == pytest.approx(0.983, abs=1e-12)
    assert sigma_phi_for_error_rate(0.0) == 0.0
    with pytest.raises(ValueError):
        sigma_phi_for_visibility(0.0)
    with pytest.raises(ValueError):
        sigma_phi_for_error_rate(0.6)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def test_cw_zero_drift_phases_equal():
    # on-resonance CW seeding with no noise freezes the phase
    tr = emit_pulse_train(3, 0.2, InjectionMode.cw(), make_rng(5))
    assert np.allclose(np.diff(tr.phases), 0.0, atol=1e-12)
    assert np.allclose(tr.differential_phases(), 0.0, atol=1e-12)


def test_modulated_pi_step():
    seq = DifferentialPhaseSequence([np.pi], 2)
    tr = emit_pulse_train(2, 0.2, InjectionMode.modulated(seq), make_rng(6))
    assert reduce_phase(tr.phases[1] - tr.phases[0]) == pytest.approx(np.pi)


def test_cw_drift_step():
    # omega_M * T = pi/2 per period
    period = 5e-10
    mode = InjectionMode.cw(master_angular_freq=(np.pi / 2) / period)
    tr = emit_pulse_train(4, 0.2, mode, make_rng(6), period_s=period)
    assert np.allclose(tr.differential_phases(), np.pi / 2, atol=1e-9)


def test_off_mode_differences_uniform():
    # oracle: differences of i.i.d. uniform phases are uniform mod 2*pi
    n = 1_000_000
    tr = emit_pulse_train(n, 0.2, InjectionMode.off(), make_rng(7))
    diffs = tr.differential_phases()
    stat = kstest(diffs / TWO_PI, "uniform").statistic
    assert stat < 2.0 / np.sqrt(n - 1)


def test_modulated_sequence_too_short():
    seq = DifferentialPhaseSequence([0.0, np.pi], 2)
    with pytest.raises(ValueError, match="sequence"):
        emit_pulse_train(5, 0.2, InjectionMode.modulated(seq), make_rng(0))


def test_pair_randomization_keeps_intra_pair_phase():
    # pairs (0,1), (2,3), ...: boundary symbols sit between pairs
    n_pairs = 2000
    diff = np.zeros(2 * n_pairs - 1)
    boundary = np.zeros(2 * n_pairs - 1, dtype=bool)
    diff[0::2] = np.pi          # within-pair steps
    boundary[1::2] = True       # between-pair steps
    seq = DifferentialPhaseSequence(diff, 2, pair_boundary=boundary)
    tr = emit_pulse_train(2 * n_pairs, 0.2,
                          InjectionMode.modulated(seq, pair_randomization=True),
                          make_rng(8))
    d = tr.differential_phases()
    intra = d[0::2]
    inter = d[1::2]
    assert np.allclose(intra, np.pi, atol=1e-9)
    # between-pair phases are re-randomized: uniform, not clustered at 0
    stat = kstest(inter / TWO_PI, "uniform").statistic
    assert stat < 2.0 / np.sqrt(inter.size)


def test_emission_noise_consumption_reproducible():
    seq = DifferentialPhaseSequence.mpsk(2, [0, 1, 0, 1])
    mode = InjectionMode.modulated(seq, phase_noise_sigma=0.1)
    t1 = emit_pulse_train(5, 0.2, mode, make_rng(9))
    t2 = emit_pulse_train(5, 0.2, mode, make_rng(9))
    assert np.array_equal(t1.phases, t2.phases)


# ---------------------------------------------------------------------------
# AMZI interference
# ---------------------------------------------------------------------------

def amplitude_oracle(phases, i_in, theta, port):
    """Independent route: complex field amplitudes through both couplers."""
    a = np.sqrt(i_in) * np.exp(1j * np.asarray(phases))
    delayed, direct = a[:-1], a[1:] * np.exp(1j * theta)
    if port == "bar":
        return np.abs(direct + delayed) ** 2 / 4.0
    return np.abs(direct - delayed) ** 2 / 4.0


def test_eq1_reference_points():
    cfg = AmziConfig(delay_s=5e-10)
    i_in = 0.8
    for dphi, expected in ((0.0, i_in), (np.pi, 0.0), (np.pi / 2, i_in / 2)):
        tr = PulseTrain([0.0, dphi], i_in, 5e-10)
        rec = amzi_interfere(tr, cfg)[0]
        assert rec.intensity_out == pytest.approx(expected, abs=1e-12)
        assert rec.input_intensity == i_in


def test_amzi_errors():
    tr = PulseTrain([0.0, 1.0], 0.5, 5e-10)
    with pytest.raises(ValueError, match="delay"):
        amzi_interfere(tr, AmziConfig(delay_s=6e-10))
    single = PulseTrain([0.0], 0.5, 5e-10)
    with pytest.raises(ValueError, match="2 pulses"):
        amzi_interfere(single, AmziConfig(delay_s=5e-10))
    with pytest.raises(ValueError):
        AmziConfig(delay_s=-1.0)
    with pytest.raises(ValueError):
        AmziConfig(delay_s=5e-10, output_port="diagonal")


def test_port_complementarity():
    rng = make_rng(11)
    tr = PulseTrain(rng.uniform(0, TWO_PI, 500), 0.7, 5e-10)
    theta = 0.3
    bar = amzi_interfere(tr, AmziConfig(5e-10, theta, "bar"))
    cross = amzi_interfere(tr, AmziConfig(5e-10, theta, "cross"))
    for b, c in zip(bar, cross):
        assert b.intensity_out + c.intensity_out == pytest.approx(0.7, rel=1e-12)
        assert 0.0 <= b.intensity_out <= 0.7


def test_amplitude_oracle_equivalence():
    # two independent routes: cosine formula vs complex amplitudes
    rng = make_rng(12)
    for _ in range(50):
        n = int(rng.integers(2, 101))
        phases = rng.uniform(0, TWO_PI, n)
        i_in = float(rng.uniform(0.1, 2.0))
        theta = float(rng.uniform(0, TWO_PI))
        tr = PulseTrain(phases, i_in, 5e-10)
        for port in ("bar", "cross"):
            got = [r.intensity_out for r in
                   amzi_interfere(tr, AmziConfig(5e-10, theta, port))]
            want = amplitude_oracle(tr.phases, i_in, theta, port)
            assert np.allclose(got, want, atol=1e-10)


def test_global_phase_invariance_bitwise():
    seq = DifferentialPhaseSequence.mpsk(8, make_rng(1).integers(0, 8, 499))
    mode = InjectionMode.modulated(seq, phase_noise_sigma=0.05)
    base = emit_pulse_train(500, 0.6, mode, make_rng(13))
    shifted = emit_pulse_train(500, 0.6, mode, make_rng(13),
                               global_phase_offset=1.2345)
    assert not np.allclose(base.phases, shifted.phases)
    cfg = AmziConfig(5e-10, 0.37, "bar")
    out_a = np.array([r.intensity_out for r in amzi_interfere(base, cfg)])
    out_b = np.array([r.intensity_out for r in amzi_interfere(shifted, cfg)])
    assert np.array_equal(out_a, out_b)


# ---------------------------------------------------------------------------
# dual-basis demodulation
# ---------------------------------------------------------------------------

def test_dual_basis_identity():
    tr = PulseTrain([0.3, 0.3], 0.9, 5e-10)
    pt = dual_basis_demodulate(tr)[0]
    assert pt.angle == pytest.approx(0.0, abs=1e-12)
    assert pt.radius == pytest.approx(0.9)


def test_dual_basis_8dpsk_symbol():
    # invert the two quadrature intensities analytically
    tr = PulseTrain([0.0, 3 * np.pi / 4], 1.0, 5e-10)
    pt = dual_basis_demodulate(tr)[0]
    assert pt.angle == pytest.approx(3 * np.pi / 4, abs=1e-9)


def test_dual_basis_recovers_all_programmed_phases():
    rng = make_rng(14)
    idx = rng.integers(0, 8, 300)
    seq = DifferentialPhaseSequence.mpsk(8, idx)
    tr = emit_pulse_train(301, 1.0, InjectionMode.modulated(seq), rng)
    points = dual_basis_demodulate(tr)
    want = idx * TWO_PI / 8
    got = np.array([p.angle for p in points])
    err = np.abs(reduce_phase(got - want + np.pi) - np.pi)
    assert np.max(err) < 1e-9


def test_dual_basis_noisy_recovery_within_3_sigma():
    sigma = 0.1
    rng = make_rng(15)
    n = 2000
    idx = rng.integers(0, 4, n)
    seq = DifferentialPhaseSequence.mpsk(4, idx)
    tr = emit_pulse_train(n + 1, 1.0,
                          InjectionMode.modulated(seq, phase_noise_sigma=sigma), rng)
    got = np.array([p.angle for p in dual_basis_demodulate(tr)])
    err = np.abs(reduce_phase(got - idx * TWO_PI / 4 + np.pi) - np.pi)
    # each symbol within 3 sigma with 99.7% probability
    assert np.mean(err < 3 * sigma) > 0.99


def test_phase_randomized_ring():
    tr = emit_pulse_train(100_000, 0.5, InjectionMode.off(), make_rng(16))
    pts = dual_basis_demodulate(tr)
    radii = np.array([p.radius for p in pts])
    angles = np.array([p.angle for p in pts])
    assert np.all(radii == 0.5)  # constant-radius ring
    stat = kstest(angles / TWO_PI, "uniform").statistic
    assert stat < 2.0 / np.sqrt(angles.size)


# ---------------------------------------------------------------------------
# visibility
# ---------------------------------------------------------------------------

def test_noiseless_visibility_is_one():
    grid = np.linspace(0, TWO_PI, 128, endpoint=False)
    recs = fringe_scan(InjectionMode.cw(), 1.0, grid, 100, make_rng(17))
    assert fringe_visibility(recs) == pytest.approx(1.0, abs=1e-12)


def test_visibility_law_across_sigmas():
    # Monte-Carlo fringe contrast vs V = exp(-sigma^2/2), 3 standard errors
    grid = np.linspace(0, TWO_PI, 128, endpoint=False)
    n_per = 2500
    for sigma in (0.0, 0.1, SIGMA_PHI_REFERENCE_VISIBILITY, 0.5):
        mode = InjectionMode.cw(phase_noise_sigma=sigma)
        recs = fringe_scan(mode, 1.0, grid, n_per, make_rng(18))
        v = fringe_visibility(recs)
        want = np.exp(-sigma**2 / 2)
        # extremum sampling noise: std of cos(delta) over the train mean
        var_cos = (1 + np.exp(-2 * sigma**2)) / 2 - np.exp(-sigma**2)
        se = 3 * np.sqrt(2 * var_cos / n_per) + 1e-4
        assert abs(v - want) < max(se, 1e-12)


def test_visibility_errors():
    with pytest.raises(ValueError):
        fringe_visibility([InterferenceRecord(0, 0.5, 1.0)])
    with pytest.raises(ValueError):
        fringe_visibility([InterferenceRecord(0, 0.0, 1.0),
                           InterferenceRecord(1, 0.0, 1.0)])


# ---------------------------------------------------------------------------
# constellation and eye
# ---------------------------------------------------------------------------

def test_eye_level_counts():
    rng = make_rng(19)
    r8 = constellation_eye(8, 0.0, 64, rng)
    assert r8.n_eye_levels == 5
    r2 = constellation_eye(2, 0.0, 16, rng)
    assert r2.n_eye_levels == 2
    assert np.allclose(r2.eye_levels, [0.0, 1.0])
    r4 = constellation_eye(4, 0.0, 16, rng)
    assert r4.n_eye_levels == 3
    assert np.allclose(r4.eye_levels, [0.0, 0.5, 1.0])


def test_eye_levels_odd_m_reported():
    r3 = constellation_eye(3, 0.0, 9, make_rng(20))
    assert r3.n_eye_levels == 2  # cos(0) and the degenerate pair cos(+-2pi/3)


def test_constellation_validation():
    with pytest.raises(ValueError):
        constellation_eye(1, 0.0, 8, make_rng(0))
    with pytest.raises(ValueError):
        constellation_eye(8, 0.0, 4, make_rng(0))


def test_constellation_clusters_on_grid():
    rng = make_rng(21)
    rep = constellation_eye(8, 0.0, 4096, rng)
    angles = np.array([p.angle for p in rep.points])
    k = np.rint(angles / (TWO_PI / 8)).astype(int) % 8
    err = np.abs(reduce_phase(angles - k * TWO_PI / 8 + np.pi) - np.pi)
    assert np.max(err) < 1e-9
    assert set(k) == set(range(8))
