"""Tests for protocol sessions, decoy bounds, and key-rate formulas."""

import numpy as np
import pytest

from qkdtx.linkmodel import ChannelModel, DetectorModel, detector_preset
from qkdtx.protocols import (
    BB84_DECOY,
    DPS,
    DecoyEstimates,
    ProtocolConfig,
    analytic_expectations,
    binary_entropy,
    decoy_estimate,
    run_bb84_session,
    run_dps_session,
    skr_bb84,
    skr_dps,
)


def make_rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def snspd(clock):
    return detector_preset("snspd", gate_rate_hz=clock)


# ---------------------------------------------------------------------------
# binary entropy
# ---------------------------------------------------------------------------

def test_binary_entropy_reference_points():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0, rel=1e-15)
    # frozen from a 50-digit evaluation of -x log2 x - (1-x) log2 (1-x)
    assert binary_entropy(0.025) == pytest.approx(0.16866093149667021, rel=1e-12)


def test_binary_entropy_domain():
    with pytest.raises(ValueError):
        binary_entropy(-0.1)
    with pytest.raises(ValueError):
        binary_entropy(1.1)
    out = binary_entropy(np.array([0.0, 0.25, 1.0]))
    assert out[0] == 0.0 and out[2] == 0.0


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        ProtocolConfig(kind=BB84_DECOY, clock_hz=1e9, p_signal=0.8,
                       p_decoy=0.05, p_vacuum=0.05)
    with pytest.raises(ValueError, match="mu_decoy"):
        ProtocolConfig(kind=BB84_DECOY, clock_hz=1e9, mu_decoy=0.6)
    with pytest.raises(ValueError, match="kind"):
        ProtocolConfig(kind="b92", clock_hz=1e9)
    with pytest.raises(ValueError, match="strategy"):
        ProtocolConfig(kind=DPS, clock_hz=2e9, dps_security="nonsense")


def test_default_configs():
    d = ProtocolConfig.dps_default()
    assert d.clock_hz == 2e9 and d.temporal_efficiency == 1.0
    assert d.mu_signal == 0.5 and d.f_ec == pytest.approx(1 / 0.9)
    b = ProtocolConfig.bb84_default()
    assert b.clock_hz == 1e9 and b.temporal_efficiency == 0.5
    assert b.p_signal == pytest.approx(14 / 16)
    assert b.basis_match_probability() == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# decoy bounds
# ---------------------------------------------------------------------------

def test_decoy_ideal_single_photon_channel_is_tight():
    # force a channel where only single photons ever click: Q_mu = mu eta e^-mu
    eta = 0.01
    mu, nu = 0.5, 0.125
    est = decoy_estimate(mu * eta * np.exp(-mu), nu * eta * np.exp(-nu), 0.0,
                         0.0, 0.0, 0.0, mu, nu)
    assert est.y1_lower == pytest.approx(eta, rel=1e-2)
    assert est.y1_lower == pytest.approx(eta, rel=1e-12)  # bound is exact here
    assert est.q1 == pytest.approx(eta * mu * np.exp(-mu), rel=1e-12)


def test_decoy_all_zero_gains():
    est = decoy_estimate(0, 0, 0, 0, 0, 0, 0.5, 0.125)
    assert est.y0 == est.y1_lower == est.q1 == 0.0
    assert "no-detections" in est.flags


def test_decoy_e1_clamp():
    est = decoy_estimate(1e-3, 1e-6, 0.0, 0.025, 0.5, 0.0, 0.5, 0.125)
    assert est.e1_upper == 0.5
    assert "e1-clamped" in est.flags


def test_decoy_y1_clamp_on_infeasible_gains():
    est = decoy_estimate(0.9, 1e-9, 1e-9, 0.0, 0.0, 0.0, 0.5, 0.125)
    assert est.y1_lower == 0.0
    assert "y1-clamped" in est.flags


def test_decoy_validation():
    with pytest.raises(ValueError):
        decoy_estimate(0.5, 0.5, 0.0, 0, 0, 0, 0.125, 0.5)  # mu < nu
    with pytest.raises(ValueError):
        decoy_estimate(1.5, 0.5, 0.0, 0, 0, 0, 0.5, 0.125)


def test_poisson_expansion_oracle():
    # brute-force photon-number bookkeeping reproduces the closed-form gain
    from math import exp, factorial
    eta_sys = 0.008
    t_eff = 0.5
    p_dark = 9e-8
    for mu in (0.5, 0.125):
        q_closed = 1 - (1 - p_dark) ** 2 * exp(-mu * t_eff * eta_sys)
        q_brute = 0.0
        for n in range(0, 21):
            pois = exp(-mu) * mu ** n / factorial(n)
            p_no_click = (1 - t_eff * eta_sys) ** n * (1 - p_dark) ** 2
            q_brute += pois * (1 - p_no_click)
        assert q_brute == pytest.approx(q_closed, abs=1e-10)


def test_decoy_soundness_sampled():
    # MC bound stays below the true single-photon yield (3 SE allowance)
    cfg = ProtocolConfig.bb84_default()
    ch = ChannelModel(10.0)
    det = snspd(cfg.clock_hz)
    ok = 0
    trials = 20
    for seed in range(trials):
        s = run_bb84_session(cfg, ch, det, 200_000, make_rng(seed),
                             record_photon_truth=True)
        t = s.photon_truth
        true_y1 = t["clicked_n1"] / t["sent_n1"]
        if s.decoy.y1_lower <= true_y1 + 3 * s.decoy.y1_lower_se:
            ok += 1
    assert ok >= trials - 1


# ---------------------------------------------------------------------------
# key-rate formulas
# ---------------------------------------------------------------------------

def test_skr_dps_limits():
    cfg = ProtocolConfig.dps_default()
    # collision probability 1/2 at zero error: the full sifted rate survives
    assert skr_dps(1e6, 0.0, 0.5, cfg) == pytest.approx(1e6, rel=1e-12)
    assert skr_dps(0.0, 0.1, 0.5, cfg) == 0.0
    with pytest.raises(ValueError):
        skr_dps(1e6, 0.5, 0.5, cfg)
    # high error: clamped at zero
    assert skr_dps(1e6, 0.12, 0.5, cfg) == 0.0


def test_skr_bb84_limits():
    cfg = ProtocolConfig.bb84_default()
    est = DecoyEstimates(y0=0.0, y1_lower=0.0, e1_upper=0.0, q1=0.0)
    assert skr_bb84(est, 1e-3, 0.02, cfg) == 0.0
    # noiseless collapse: R = sift * clock * p_signal * Q1
    est = DecoyEstimates(y0=0.0, y1_lower=4e-3, e1_upper=0.0,
                         q1=4e-3 * 0.5 * np.exp(-0.5))
    want = 0.5 * cfg.clock_hz * cfg.p_signal * est.q1
    assert skr_bb84(est, 1e-3, 0.0, cfg) == pytest.approx(want, rel=1e-12)


# ---------------------------------------------------------------------------
# sessions
# ---------------------------------------------------------------------------

def test_dps_noiseless_limit():
    cfg = ProtocolConfig.dps_default(sigma_phi=0.0, receiver_loss_db=0.0)
    det = DetectorModel(efficiency=1.0, dark_rate_hz=0.0, gate_rate_hz=2e9)
    s = run_dps_session(cfg, ChannelModel(0.0), det, 100_000, make_rng(1))
    assert s.qber == 0.0
    assert s.sifted_bits == s.per_intensity["signal"].clicks
    assert s.skr_bps > 0


def test_dps_wrong_kind():
    cfg = ProtocolConfig.bb84_default()
    det = snspd(1e9)
    with pytest.raises(ValueError, match="dps"):
        run_dps_session(cfg, ChannelModel(0.0), det, 10_000, make_rng(0))
    cfg2 = ProtocolConfig.dps_default()
    with pytest.raises(ValueError, match="bb84"):
        run_bb84_session(cfg2, ChannelModel(0.0), snspd(2e9), 10_000, make_rng(0))


def test_dps_zero_detections_flagged():
    cfg = ProtocolConfig.dps_default()
    det = DetectorModel(efficiency=1e-6, dark_rate_hz=0.0, gate_rate_hz=2e9)
    s = run_dps_session(cfg, ChannelModel(60.0), det, 1_000, make_rng(2))
    assert s.skr_bps == 0.0
    assert "no-detections" in s.flags


def test_bb84_noiseless_limit_and_basis_match():
    cfg = ProtocolConfig.bb84_default(sigma_phi=0.0)
    det = DetectorModel(efficiency=1.0, dark_rate_hz=0.0, gate_rate_hz=1e9)
    n = 200_000
    s = run_bb84_session(cfg, ChannelModel(0.0), det, n, make_rng(3))
    assert s.qber == 0.0
    clicks = sum(t.clicks for t in s.per_intensity.values())
    # sifted fraction matches the basis-match probability within 3 sigma
    p = cfg.basis_match_probability()
    assert abs(s.sifted_bits - clicks * p) <= 3 * np.sqrt(clicks * p * (1 - p))


def test_bb84_vacuum_yield_matches_dark_rate():
    cfg = ProtocolConfig.bb84_default()
    det = DetectorModel(efficiency=0.8, dark_rate_hz=1e6, gate_rate_hz=1e9)
    n = 2_000_000
    s = run_bb84_session(cfg, ChannelModel(20.0), det, n, make_rng(4))
    t = s.per_intensity["vacuum"]
    p_dark_unit = 1 - (1 - det.p_dark) ** 2
    expect = t.sent * p_dark_unit
    assert abs(t.clicks - expect) <= 3 * np.sqrt(expect)


def test_bb84_qber_floor_dark_dominated():
    # vacuum detections carry no signal: their error rate sits at 1/2
    cfg = ProtocolConfig.bb84_default()
    det = DetectorModel(efficiency=0.8, dark_rate_hz=1e6, gate_rate_hz=1e9)
    s = run_bb84_session(cfg, ChannelModel(20.0), det, 2_000_000, make_rng(5))
    t = s.per_intensity["vacuum"]
    se = np.sqrt(0.25 / t.sifted)
    assert abs(t.errors / t.sifted - 0.5) <= 3 * se
    a = analytic_expectations(cfg, ChannelModel(20.0), det)
    assert a.error_rates["vacuum"] == pytest.approx(0.5, abs=1e-12)


def test_session_rng_determinism():
    cfg = ProtocolConfig.dps_default()
    det = snspd(2e9)
    r1 = run_dps_session(cfg, ChannelModel(10.0), det, 50_000, make_rng(6))
    r2 = run_dps_session(cfg, ChannelModel(10.0), det, 50_000, make_rng(6))
    assert r1.to_dict() == r2.to_dict()


def test_session_minimum_size():
    cfg = ProtocolConfig.dps_default()
    with pytest.raises(ValueError):
        run_dps_session(cfg, ChannelModel(0.0), snspd(2e9), 100, make_rng(0))


# ---------------------------------------------------------------------------
# analytic expectations and derived properties
# ---------------------------------------------------------------------------

def test_analytic_vacuum_limit():
    cfg = ProtocolConfig.bb84_default()
    det = snspd(1e9)
    a = analytic_expectations(cfg, ChannelModel(10.0), det)
    p_dark_unit = 1 - (1 - det.p_dark) ** 2
    assert a.gains["vacuum"] == pytest.approx(p_dark_unit, rel=1e-9)
    assert a.error_rates["vacuum"] == pytest.approx(0.5)


def test_analytic_noise_free_errors_vanish():
    for cfg in (ProtocolConfig.dps_default(sigma_phi=0.0),
                ProtocolConfig.bb84_default(sigma_phi=0.0)):
        det = DetectorModel(efficiency=0.8, dark_rate_hz=0.0,
                            gate_rate_hz=cfg.clock_hz)
        a = analytic_expectations(cfg, ChannelModel(10.0), det)
        for cls, e in a.error_rates.items():
            if a.gains[cls] > 0:
                assert e == pytest.approx(0.0, abs=1e-12)


def test_analytic_matches_mc_moderate_loss():
    cfg = ProtocolConfig.dps_default()
    ch = ChannelModel(10.0)
    det = snspd(2e9)
    a = analytic_expectations(cfg, ch, det)
    s = run_dps_session(cfg, ch, det, 2_000_000, make_rng(7))
    t = s.per_intensity["signal"]
    q = a.gains["signal"]
    assert abs(t.clicks - t.sent * q) <= 4 * np.sqrt(t.sent * q * (1 - q))
    e = a.error_rates["signal"]
    assert abs(t.errors - t.sifted * e) <= 4 * np.sqrt(t.sifted * e * (1 - e)) + 1


def test_skr_monotonicity_grids():
    det = snspd(2e9)
    detb = snspd(1e9)
    dps = ProtocolConfig.dps_default()
    bb = ProtocolConfig.bb84_default()

    def skr_of(cfg, d, loss):
        return analytic_expectations(cfg, ChannelModel(loss), d).skr_bps

    for cfg, d in ((dps, det), (bb, detb)):
        losses = [0, 5, 10, 15, 20, 25]
        vals = [skr_of(cfg, d, l) for l in losses]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

        darks = [0, 10, 100, 1e3, 1e4, 1e5]
        vals = [analytic_expectations(
            cfg, ChannelModel(20.0),
            DetectorModel(d.efficiency, dk, d.gate_rate_hz)).skr_bps
            for dk in darks]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

        sigmas = [0.0, 0.1, 0.2, 0.3, 0.35]
        vals = [analytic_expectations(
            type(cfg)(**{**cfg.__dict__, "sigma_phi": s}),
            ChannelModel(20.0), d).skr_bps for s in sigmas]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

        fecs = [1.0, 1.05, 1.11, 1.2, 1.4]
        vals = [analytic_expectations(
            type(cfg)(**{**cfg.__dict__, "f_ec": f}),
            ChannelModel(20.0), d).skr_bps for f in fecs]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_zero_key_cutoff_analytic_vs_mc():
    # elevated darks pull the cutoff to moderate loss; MC agrees within 1 dB
    det = DetectorModel(efficiency=0.8, dark_rate_hz=2e5, gate_rate_hz=2e9,
                        label="noisy")
    cfg = ProtocolConfig.dps_default()
    losses = np.arange(10.0, 30.0, 1.0)
    analytic = np.array([
        analytic_expectations(cfg, ChannelModel(l), det).skr_bps for l in losses])
    assert analytic[0] > 0 and analytic[-1] == 0.0
    cut_analytic = losses[np.argmax(analytic == 0.0)]
    mc = []
    for i, l in enumerate(losses):
        s = run_dps_session(cfg, ChannelModel(l), det, 3_000_000, make_rng(100 + i))
        mc.append(s.skr_bps)
    mc = np.array(mc)
    cut_mc = losses[np.argmax(mc == 0.0)]
    assert abs(cut_mc - cut_analytic) <= 1.0


def test_session_result_serializes():
    cfg = ProtocolConfig.bb84_default()
    s = run_bb84_session(cfg, ChannelModel(5.0), snspd(1e9), 20_000, make_rng(8))
    d = s.to_dict()
    assert set(d["per_intensity"]) == {"vacuum", "decoy", "signal"}
    assert d["qber"] == s.qber
    assert isinstance(d["decoy"]["y1_lower"], float)
