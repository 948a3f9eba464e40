"""End-to-end DPS and decoy-state BB84 sessions with asymptotic key rates.

Sessions are deterministic functions of (config, channel, detector, seed).
The Monte-Carlo path draws per-slot clicks from the same threshold-detector
model as the closed-form expectations, so tallies agree with
:func:`analytic_expectations` to binomial noise at any loss.

Intensity convention: ``mu_signal``/``mu_decoy`` are mean photon numbers per
encoded unit (one pulse for DPS, one pulse pair for BB84). The decoy-state
Poisson bookkeeping uses the same numbers, which keeps the gain formulas and
the yield bounds mutually consistent.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linkmodel import ChannelModel, DetectorModel, transmittance
from .optics import sigma_phi_for_error_rate

DPS = "dps"
BB84_DECOY = "bb84-decoy"

INTENSITY_CLASSES = ("vacuum", "decoy", "signal")

#: Phase-noise levels reproducing the reference 20 dB error rates (2.5% DPS,
#: 2.2% BB84 within tolerance) through e_opt = (1 - exp(-sigma^2/2)) / 2.
DPS_SIGMA_PHI_CALIBRATED = sigma_phi_for_error_rate(0.025)
BB84_SIGMA_PHI_CALIBRATED = sigma_phi_for_error_rate(0.023)

#: Receiver-side insertion loss calibrated once against the reference DPS
#: absolute rates (the receiver chip and detector coupling are not lossless);
#: the BB84 analysis needs no extra loss to land on its reference rates.
DPS_RECEIVER_LOSS_DB_CALIBRATED = 8.5

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(64)
_GH_WEIGHTS = _GH_WEIGHTS / np.sqrt(2.0 * np.pi)

_CHUNK = 2_000_000


def binary_entropy(x):
    """Shannon entropy of a binary variable, -x log2 x - (1-x) log2 (1-x).

    Defined on [0, 1] with 0 log 0 := 0.
    """
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("binary_entropy is defined on [0, 1]")
    inner = (arr > 0) & (arr < 1)
    out = np.zeros_like(arr)
    a = arr[inner]
    out[inner] = -a * np.log2(a) - (1 - a) * np.log2(1 - a)
    return float(out) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------

@dataclass
class ProtocolConfig:
    """Protocol parameters; defaults follow the reference transmitter."""

    kind: str
    clock_hz: float
    mu_signal: float = 0.5
    mu_decoy: float = 0.125
    mu_vacuum: float = 0.0
    p_signal: float = 14 / 16
    p_decoy: float = 1 / 16
    p_vacuum: float = 1 / 16
    basis_prob_x: float = 0.5
    f_ec: float = 1 / 0.9
    sigma_phi: float = 0.0
    temporal_efficiency: float = 1.0
    receiver_loss_db: float = 0.0
    visibility_floor: float = 1.0
    detectors_per_unit: int = 2
    dps_security: str = "waks-individual"

    def __post_init__(self):
        if self.kind not in (DPS, BB84_DECOY):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if self.clock_hz <= 0:
            raise ValueError("clock_hz must be > 0")
        probs = self.p_vacuum + self.p_decoy + self.p_signal
        if abs(probs - 1.0) > 1e-12:
            raise ValueError("intensity probabilities must sum to 1")
        if self.mu_vacuum != 0.0:
            raise ValueError("mu_vacuum must be 0")
        if not 0.0 <= self.mu_decoy < self.mu_signal:
            raise ValueError("need 0 <= mu_decoy < mu_signal")
        if not 0.0 < self.basis_prob_x < 1.0:
            raise ValueError("basis_prob_x must be in (0, 1)")
        if self.f_ec < 1.0:
            raise ValueError("f_ec must be >= 1")
        if self.sigma_phi < 0:
            raise ValueError("sigma_phi must be >= 0")
        if not 0.0 < self.temporal_efficiency <= 1.0:
            raise ValueError("temporal_efficiency must be in (0, 1]")
        if self.receiver_loss_db < 0:
            raise ValueError("receiver_loss_db must be >= 0")
        if not 0.0 < self.visibility_floor <= 1.0:
            raise ValueError("visibility_floor must be in (0, 1]")
        if self.detectors_per_unit not in (1, 2):
            raise ValueError("detectors_per_unit must be 1 or 2")
        if self.dps_security not in DPS_SECURITY_STRATEGIES:
            known = ", ".join(sorted(DPS_SECURITY_STRATEGIES))
            raise ValueError(
                f"unknown DPS security strategy {self.dps_security!r}; known: {known}")

    @classmethod
    def dps_default(cls, **overrides) -> "ProtocolConfig":
        """2 GHz DPS with the calibrated phase noise and receiver loss."""
        kw = dict(kind=DPS, clock_hz=2e9,
                  sigma_phi=DPS_SIGMA_PHI_CALIBRATED,
                  temporal_efficiency=1.0,
                  receiver_loss_db=DPS_RECEIVER_LOSS_DB_CALIBRATED)
        kw.update(overrides)
        return cls(**kw)

    @classmethod
    def bb84_default(cls, **overrides) -> "ProtocolConfig":
        """1 GHz pulse-pair decoy BB84 with calibrated phase noise."""
        kw = dict(kind=BB84_DECOY, clock_hz=1e9,
                  sigma_phi=BB84_SIGMA_PHI_CALIBRATED,
                  temporal_efficiency=0.5)
        kw.update(overrides)
        return cls(**kw)

    def basis_match_probability(self) -> float:
        p = self.basis_prob_x
        return p * p + (1 - p) * (1 - p)

    def class_probabilities(self) -> np.ndarray:
        return np.array([self.p_vacuum, self.p_decoy, self.p_signal])

    def class_intensities(self) -> np.ndarray:
        return np.array([self.mu_vacuum, self.mu_decoy, self.mu_signal])


@dataclass
class IntensityTally:
    """Counts for one intensity class."""

    sent: int = 0
    clicks: int = 0
    sifted: int = 0
    errors: int = 0


@dataclass
class SessionResult:
    """Outcome of one protocol session.

    ``qber`` is errors/sifted over the key-bearing tallies (all detections
    for DPS; basis-matched signal detections for BB84).
    """

    protocol: str
    pulses_sent: int
    per_intensity: dict
    sifted_bits: int
    errors: int
    qber: float
    raw_rate_hz: float
    sifted_rate_hz: float
    skr_bps: float
    flags: list = field(default_factory=list)
    decoy: Optional["DecoyEstimates"] = None
    photon_truth: Optional[dict] = None

    def to_dict(self) -> dict:
        d = {
            "protocol": self.protocol,
            "pulses_sent": self.pulses_sent,
            "per_intensity": {
                k: dataclasses.asdict(v) for k, v in self.per_intensity.items()
            },
            "sifted_bits": self.sifted_bits,
            "errors": self.errors,
            "qber": self.qber,
            "raw_rate_hz": self.raw_rate_hz,
            "sifted_rate_hz": self.sifted_rate_hz,
            "skr_bps": self.skr_bps,
            "flags": list(self.flags),
        }
        if self.decoy is not None:
            d["decoy"] = dataclasses.asdict(self.decoy)
        if self.photon_truth is not None:
            d["photon_truth"] = dict(self.photon_truth)
        return d


# ---------------------------------------------------------------------------
# decoy-state bounds and key rates
# ---------------------------------------------------------------------------

@dataclass
class DecoyEstimates:
    """Single-photon bounds from the vacuum + weak-decoy method."""

    y0: float
    y1_lower: float
    e1_upper: float
    q1: float
    y1_lower_se: float = 0.0
    flags: list = field(default_factory=list)


def decoy_estimate(q_signal, q_decoy, q_vacuum, e_signal, e_decoy, e_vacuum,
                   mu_signal, mu_decoy, sent_counts=None) -> DecoyEstimates:
    """Bound the single-photon yield and error from two-intensity statistics.

    Vacuum + weak-decoy analytic bounds: with signal intensity mu, decoy
    intensity nu < mu and vacuum yield Y0 = Q_vacuum,

        Y1 >= mu/(mu nu - nu^2) * [Q_d e^nu - Q_s e^mu nu^2/mu^2
                                   - (mu^2 - nu^2)/mu^2 * Y0]
        e1 <= (E_d Q_d e^nu - Y0/2) / (nu * Y1)
        Q1  = Y1 * mu * e^(-mu)

    Infeasible bounds are clamped ([0,1] for Y1, [0,0.5] for e1) and flagged.
    sent_counts, when given as (n_signal, n_decoy, n_vacuum), adds a binomial
    standard error for the Y1 bound.
    """
    mu, nu = mu_signal, mu_decoy
    if not 0.0 < nu < mu:
        raise ValueError("need 0 < mu_decoy < mu_signal")
    for name, q in (("q_signal", q_signal), ("q_decoy", q_decoy),
                    ("q_vacuum", q_vacuum)):
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")

    flags = []
    y0 = q_vacuum
    if q_signal == 0.0 and q_decoy == 0.0 and q_vacuum == 0.0:
        return DecoyEstimates(0.0, 0.0, 0.0, 0.0, 0.0, ["no-detections"])

    denom = mu * nu - nu * nu
    c_d = np.exp(nu)
    c_s = np.exp(mu) * nu * nu / (mu * mu)
    c_v = (mu * mu - nu * nu) / (mu * mu)
    y1 = (mu / denom) * (q_decoy * c_d - q_signal * c_s - c_v * y0)
    if y1 < 0.0:
        y1 = 0.0
        flags.append("y1-clamped")
    elif y1 > 1.0:
        y1 = 1.0
        flags.append("y1-clamped")

    se = 0.0
    if sent_counts is not None:
        n_s, n_d, n_v = sent_counts
        var = 0.0
        for q, n, c in ((q_decoy, n_d, c_d), (q_signal, n_s, c_s),
                        (q_vacuum, n_v, c_v)):
            if n > 0:
                var += (mu / denom * c) ** 2 * q * (1 - q) / n
        se = float(np.sqrt(var))

    if y1 > 0.0:
        e1 = (e_decoy * q_decoy * c_d - 0.5 * y0) / (nu * y1)
        if e1 < 0.0:
            e1 = 0.0
            flags.append("e1-clamped")
        elif e1 > 0.5:
            e1 = 0.5
            flags.append("e1-clamped")
    else:
        e1 = 0.5
        flags.append("e1-clamped")

    q1 = y1 * mu * np.exp(-mu)
    return DecoyEstimates(float(y0), float(y1), float(e1), float(q1), se, flags)


def _waks_collision_probability(e: float) -> float:
    # individual-attack collision bound: p_c = 1 - e^2 - (1 - 6e)^2 / 2,
    # derived for e <= 1/6; beyond that the bound is void (no secure bits)
    if e > 1.0 / 6.0:
        return 1.0
    return 1.0 - e * e - (1.0 - 6.0 * e) ** 2 / 2.0


#: Named, swappable asymptotic DPS security bounds mapping the measured
#: error rate to Eve's collision probability per sifted bit.
DPS_SECURITY_STRATEGIES: dict[str, Callable[[float], float]] = {
    "waks-individual": _waks_collision_probability,
}


def skr_dps(sifted_rate_hz, error_rate, mu, cfg: ProtocolConfig) -> float:
    """Asymptotic DPS secure key rate.

    R = sifted_rate * [ -log2 p_c(e) - f_ec * h2(e) ], clamped at zero, with
    p_c from the configured security strategy (p_c(0) = 1/2, so a noiseless
    session keeps its full sifted rate).
    """
    if not 0.0 <= error_rate < 0.5:
        raise ValueError("error_rate must lie in [0, 0.5)")
    if sifted_rate_hz <= 0.0:
        return 0.0
    p_c = DPS_SECURITY_STRATEGIES[cfg.dps_security](error_rate)
    if p_c <= 0.0:
        return 0.0
    fraction = -np.log2(p_c) - cfg.f_ec * binary_entropy(error_rate)
    return float(max(sifted_rate_hz * fraction, 0.0))


def skr_bb84(estimates: DecoyEstimates, q_signal, e_signal,
             cfg: ProtocolConfig) -> float:
    """Asymptotic decoy-BB84 secure key rate (GLLP form).

    R = sift * clock * p_signal * [ Q1 (1 - h2(e1)) - f_ec Q_s h2(E_s) ],
    clamped at zero; sift is the basis-match probability.
    """
    sift = cfg.basis_match_probability()
    gain_term = estimates.q1 * (1.0 - binary_entropy(estimates.e1_upper))
    ec_term = cfg.f_ec * q_signal * binary_entropy(min(max(e_signal, 0.0), 1.0))
    rate = sift * cfg.clock_hz * cfg.p_signal * (gain_term - ec_term)
    return float(max(rate, 0.0))


# ---------------------------------------------------------------------------
# shared click model
# ---------------------------------------------------------------------------

def _system_efficiency(cfg: ProtocolConfig, channel: ChannelModel,
                       det: DetectorModel) -> float:
    return (transmittance(channel)
            * 10.0 ** (-cfg.receiver_loss_db / 10.0)
            * det.efficiency)


def _gh_error_numerator(flux, sigma, v_floor, p_dark):
    """E_delta[ P(wrong-port click) + P(double)/2 ] by Gauss-Hermite quadrature.

    flux is the usable mean photon number of the unit after all efficiencies;
    the two complementary ports see flux*(1 +/- V cos(delta))/2.
    """
    if sigma > 0:
        cos_d = v_floor * np.cos(_GH_NODES * sigma)
        w = _GH_WEIGHTS
    else:
        cos_d = np.array([v_floor])
        w = np.array([1.0])
    b = 1.0 - (1.0 - p_dark) * np.exp(-0.5 * flux * (1.0 + cos_d))
    c = 1.0 - (1.0 - p_dark) * np.exp(-0.5 * flux * (1.0 - cos_d))
    return float(np.sum(w * (c * (1.0 - b) + 0.5 * b * c)))


def _unit_gain(flux, p_dark, n_det) -> float:
    return float(1.0 - (1.0 - p_dark) ** n_det * np.exp(-flux))


# ---------------------------------------------------------------------------
# analytic expectations
# ---------------------------------------------------------------------------

@dataclass
class AnalyticExpectations:
    """Closed-form per-intensity gains/errors plus rates for a loss point."""

    gains: dict
    error_rates: dict
    raw_rate_hz: float
    sifted_rate_hz: float
    qber: float
    skr_bps: float
    decoy: Optional[DecoyEstimates] = None


def analytic_expectations(cfg: ProtocolConfig, channel: ChannelModel,
                          det: DetectorModel) -> AnalyticExpectations:
    """Expected gains, error rates and key rate without Monte-Carlo noise.

    Gains are exact, Q = 1 - (1-p_dark)^n * exp(-mu_eff), with mu_eff the
    usable unit flux mu * temporal_efficiency * eta_sys. Error rates average
    the per-port click probabilities over the Gaussian phase noise by
    quadrature; to leading order this is the familiar
    E = [e_opt (Q - Q_dark) + Q_dark/2] / Q with
    e_opt = (1 - exp(-sigma^2/2) * V_floor) / 2, but the quadrature keeps the
    expectation exact in the high-flux regime too. The same key-rate
    formulas as the Monte-Carlo path are applied to the expected tallies.
    """
    eta = _system_efficiency(cfg, channel, det)
    p_dark = det.p_dark
    n_det = cfg.detectors_per_unit

    if cfg.kind == DPS:
        flux = cfg.mu_signal * cfg.temporal_efficiency * eta
        q = _unit_gain(flux, p_dark, n_det)
        err = _gh_error_numerator(flux, cfg.sigma_phi, cfg.visibility_floor,
                                  p_dark)
        e = err / q if q > 0 else 0.5
        sifted = cfg.clock_hz * q
        skr = skr_dps(sifted, min(e, 0.5 - 1e-15), cfg.mu_signal, cfg)
        return AnalyticExpectations(
            gains={"signal": q}, error_rates={"signal": e},
            raw_rate_hz=sifted, sifted_rate_hz=sifted, qber=e, skr_bps=skr)

    gains, errors = {}, {}
    for name, mu in zip(INTENSITY_CLASSES, cfg.class_intensities()):
        flux = mu * cfg.temporal_efficiency * eta
        q = _unit_gain(flux, p_dark, n_det)
        err = _gh_error_numerator(flux, cfg.sigma_phi, cfg.visibility_floor,
                                  p_dark)
        gains[name] = q
        errors[name] = err / q if q > 0 else 0.5
    p_cls = cfg.class_probabilities()
    q_mean = float(np.dot(p_cls, [gains[c] for c in INTENSITY_CLASSES]))
    raw = cfg.clock_hz * q_mean
    sifted = raw * cfg.basis_match_probability()
    est = decoy_estimate(gains["signal"], gains["decoy"], gains["vacuum"],
                         errors["signal"], errors["decoy"], errors["vacuum"],
                         cfg.mu_signal, cfg.mu_decoy)
    skr = skr_bb84(est, gains["signal"], errors["signal"], cfg)
    return AnalyticExpectations(
        gains=gains, error_rates=errors, raw_rate_hz=raw,
        sifted_rate_hz=sifted, qber=errors["signal"], skr_bps=skr, decoy=est)


# ---------------------------------------------------------------------------
# Monte-Carlo sessions
# ---------------------------------------------------------------------------

def run_dps_session(cfg: ProtocolConfig, channel: ChannelModel,
                    det: DetectorModel, n_pulses, rng) -> SessionResult:
    """Monte-Carlo DPS session.

    Key bits set the differential phase of consecutive pulses to 0 or pi
    (constructive events decode as '1'); phase noise, channel and both
    detector ports are applied per interference slot and every detection is
    sifted. Double clicks resolve to a random bit.
    """
    if cfg.kind != DPS:
        raise ValueError(f"run_dps_session needs a {DPS!r} config")
    if n_pulses < 1_000:
        raise ValueError("n_pulses must be >= 1e3")

    eta = _system_efficiency(cfg, channel, det)
    flux = cfg.mu_signal * cfg.temporal_efficiency * eta
    p_dark = det.p_dark
    v = cfg.visibility_floor
    n_slots = int(n_pulses) - 1

    clicks = errors = 0
    done = 0
    while done < n_slots:
        m = min(_CHUNK, n_slots - done)
        bits = rng.integers(0, 2, m)
        delta = rng.normal(0.0, cfg.sigma_phi, m) if cfg.sigma_phi > 0 else 0.0
        # bit 1 -> dphi = 0 (constructive at theta_A = 0), bit 0 -> dphi = pi
        cos_phi = v * np.cos(np.pi * (1 - bits) + delta)
        p_bar = 1.0 - (1.0 - p_dark) * np.exp(-0.5 * flux * (1.0 + cos_phi))
        p_cross = 1.0 - (1.0 - p_dark) * np.exp(-0.5 * flux * (1.0 - cos_phi))
        bar = rng.random(m) < p_bar
        cross = rng.random(m) < p_cross
        single_bar = bar & ~cross
        single_cross = cross & ~bar
        double = bar & cross
        decoded_one = single_bar.copy()
        if double.any():
            decoded_one[double] = rng.random(int(double.sum())) < 0.5
        clicked = bar | cross
        clicks += int(clicked.sum())
        errors += int((decoded_one[clicked] != (bits[clicked] == 1)).sum())
        done += m

    flags = []
    if clicks == 0:
        flags.append("no-detections")
        qber = 0.0
    else:
        qber = errors / clicks
        if qber >= 0.5:
            qber = 0.5
            flags.append("qber-clamped")
    sifted_rate = cfg.clock_hz * clicks / n_slots if n_slots else 0.0
    skr = skr_dps(sifted_rate, min(qber, 0.5 - 1e-15), cfg.mu_signal, cfg)
    tally = IntensityTally(sent=n_slots, clicks=clicks, sifted=clicks,
                           errors=errors)
    return SessionResult(
        protocol=DPS, pulses_sent=int(n_pulses),
        per_intensity={"signal": tally}, sifted_bits=clicks, errors=errors,
        qber=qber, raw_rate_hz=sifted_rate, sifted_rate_hz=sifted_rate,
        skr_bps=skr, flags=flags)


def run_bb84_session(cfg: ProtocolConfig, channel: ChannelModel,
                     det: DetectorModel, n_pairs, rng,
                     record_photon_truth=False) -> SessionResult:
    """Monte-Carlo decoy-state BB84 session over pulse pairs.

    Per pair: an intensity class is drawn, basis and bit are encoded in the
    within-pair differential phase (global phase re-randomized between
    pairs), the receiver measures in a random basis, and clicks follow the
    photon-number-exact model (Poisson photons, binomial routing to the two
    ports of the central time bin, independent dark counts). Sifting keeps
    basis matches; per-intensity gains and errors feed the decoy bounds.
    """
    if cfg.kind != BB84_DECOY:
        raise ValueError(f"run_bb84_session needs a {BB84_DECOY!r} config")
    if n_pairs < 1_000:
        raise ValueError("n_pairs must be >= 1e3")

    eta = _system_efficiency(cfg, channel, det)
    q_unit = cfg.temporal_efficiency * eta  # per-photon usable-detection prob
    p_dark = det.p_dark
    v = cfg.visibility_floor
    p_cls = cfg.class_probabilities()
    mus = cfg.class_intensities()
    cum = np.cumsum(p_cls)

    tallies = {name: IntensityTally() for name in INTENSITY_CLASSES}
    truth = {"sent_n0": 0, "clicked_n0": 0, "sent_n1": 0, "clicked_n1": 0,
             "sifted_n1": 0, "errors_n1": 0}

    done = 0
    n_pairs = int(n_pairs)
    while done < n_pairs:
        m = min(_CHUNK, n_pairs - done)
        cls = np.searchsorted(cum, rng.random(m), side="right")
        cls = np.minimum(cls, 2)
        basis_a = rng.random(m) < cfg.basis_prob_x      # True -> X
        bits = rng.integers(0, 2, m)
        basis_b = rng.random(m) < cfg.basis_prob_x
        delta = rng.normal(0.0, cfg.sigma_phi, m) if cfg.sigma_phi > 0 else np.zeros(m)

        # X: dphi in {0, pi} read at theta_A = 0; Z: {pi/2, 3pi/2} at -pi/2
        dphi = np.pi * bits + np.where(basis_a, 0.0, np.pi / 2.0)
        theta_b = np.where(basis_b, 0.0, -np.pi / 2.0)
        cos_phi = v * np.cos(dphi + theta_b + delta)

        q_bar = 0.5 * q_unit * (1.0 + cos_phi)
        q_cross = 0.5 * q_unit * (1.0 - cos_phi)
        n_photons = rng.poisson(mus[cls])
        n_bar = rng.binomial(n_photons, q_bar)
        rest = n_photons - n_bar
        with np.errstate(divide="ignore", invalid="ignore"):
            q_cond = np.where(q_bar < 1.0, q_cross / (1.0 - q_bar), 0.0)
        n_cross = rng.binomial(rest, np.clip(q_cond, 0.0, 1.0))

        bar = (n_bar > 0) | (rng.random(m) < p_dark)
        cross = (n_cross > 0) | (rng.random(m) < p_dark)
        clicked = bar | cross
        matched = basis_a == basis_b
        sifted = clicked & matched

        decoded_one = cross & ~bar      # bar -> 0, cross -> 1
        double = bar & cross
        if double.any():
            decoded_one[double] = rng.random(int(double.sum())) < 0.5
        err = sifted & (decoded_one != (bits == 1))

        for i, name in enumerate(INTENSITY_CLASSES):
            sel = cls == i
            t = tallies[name]
            t.sent += int(sel.sum())
            t.clicks += int(clicked[sel].sum())
            t.sifted += int(sifted[sel].sum())
            t.errors += int(err[sel].sum())

        if record_photon_truth:
            n0 = n_photons == 0
            n1 = n_photons == 1
            truth["sent_n0"] += int(n0.sum())
            truth["clicked_n0"] += int(clicked[n0].sum())
            truth["sent_n1"] += int(n1.sum())
            truth["clicked_n1"] += int(clicked[n1].sum())
            truth["sifted_n1"] += int(sifted[n1].sum())
            truth["errors_n1"] += int(err[n1].sum())
        done += m

    flags = []
    gains, errs = {}, {}
    for name in INTENSITY_CLASSES:
        t = tallies[name]
        gains[name] = t.clicks / t.sent if t.sent else 0.0
        errs[name] = t.errors / t.sifted if t.sifted else 0.5
    sig = tallies["signal"]
    if sig.sifted == 0:
        flags.append("no-detections")
        qber = 0.0
    else:
        qber = sig.errors / sig.sifted
        if qber >= 0.5:
            qber = 0.5
            flags.append("qber-clamped")

    est = decoy_estimate(
        gains["signal"], gains["decoy"], gains["vacuum"],
        errs["signal"], errs["decoy"], errs["vacuum"],
        cfg.mu_signal, cfg.mu_decoy,
        sent_counts=(sig.sent, tallies["decoy"].sent, tallies["vacuum"].sent))
    flags.extend(est.flags)
    skr = skr_bb84(est, gains["signal"], errs["signal"], cfg)

    total_clicks = sum(t.clicks for t in tallies.values())
    total_sifted = sum(t.sifted for t in tallies.values())
    return SessionResult(
        protocol=BB84_DECOY, pulses_sent=n_pairs, per_intensity=tallies,
        sifted_bits=total_sifted, errors=sig.errors, qber=qber,
        raw_rate_hz=cfg.clock_hz * total_clicks / n_pairs,
        sifted_rate_hz=cfg.clock_hz * total_sifted / n_pairs,
        skr_bps=skr, flags=flags, decoy=est,
        photon_truth=truth if record_photon_truth else None)
