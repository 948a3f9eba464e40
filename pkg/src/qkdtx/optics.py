"""Phase-encoded pulse trains and their AMZI demodulation.

Models the three injection regimes of a gain-switched slave laser seeded by a
master laser (no injection, CW injection, directly modulated injection) and
the delay-line interferometer that converts differential phase into intensity.
Each pulse is a point event carrying a mean photon number and an optical
phase; pulse shape, chirp and jitter are below the abstraction level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi

#: Differential-phase noise (rad) that reproduces a 98.3% fringe visibility
#: through the Gaussian visibility law V = exp(-sigma^2 / 2).
SIGMA_PHI_REFERENCE_VISIBILITY = 0.1851818502714049


def reduce_phase(phi):
    """Reduce phase(s) into [0, 2*pi); values equal to 2*pi map to 0."""
    out = np.mod(phi, TWO_PI)
    # np.mod can round tiny negatives up to exactly 2*pi
    if np.ndim(out) == 0:
        return 0.0 if out == TWO_PI else float(out)
    out[out == TWO_PI] = 0.0
    return out


def sigma_phi_for_visibility(visibility: float) -> float:
    """Gaussian differential-phase noise that yields a given fringe visibility.

    Inverts V = exp(-sigma^2 / 2), the mean-contrast law for Gaussian
    differential-phase noise.
    """
    if not 0.0 < visibility <= 1.0:
        raise ValueError(f"visibility must be in (0, 1], got {visibility}")
    return float(np.sqrt(-2.0 * np.log(visibility)))


def sigma_phi_for_error_rate(e_opt: float) -> float:
    """Gaussian phase noise that yields a given optical error fraction.

    The wrong-port flux fraction under noise is e = (1 - exp(-sigma^2/2)) / 2,
    so this is sigma_phi_for_visibility(1 - 2 e).
    """
    if not 0.0 <= e_opt < 0.5:
        raise ValueError(f"optical error fraction must be in [0, 0.5), got {e_opt}")
    return sigma_phi_for_visibility(1.0 - 2.0 * e_opt)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OpticalPulse:
    """One gain-switched pulse: slot index, mean photon number, phase."""

    slot_index: int
    mean_photons: float
    phase: float

    def __post_init__(self):
        if self.slot_index < 0:
            raise ValueError("slot_index must be >= 0")
        if self.mean_photons < 0:
            raise ValueError("mean_photons must be >= 0")
        object.__setattr__(self, "phase", reduce_phase(self.phase))


class PulseTrain:
    """Equal-intensity pulse sequence with per-slot phases.

    Phases are stored as a numpy array (reduced mod 2*pi). When the train was
    produced by :func:`emit_pulse_train`, the emission-time differential
    phases are kept alongside, so demodulation is exactly invariant under a
    global phase shift of the whole train.

    Parameters
    ----------
    phases : array_like
        Optical phase of each pulse, radians.
    mean_photons : float
        Mean photon number per pulse (equal for all pulses).
    period_s : float
        Slot period T in seconds.
    clock_hz : float, optional
        Repetition rate; defaults to 1/period_s and must satisfy
        period_s * clock_hz == 1 within 1e-12 relative.
    diff_phases : array_like, optional
        Differential phases phase[k+1] - phase[k] as emitted (length n-1).
    """

    def __init__(self, phases, mean_photons, period_s, clock_hz=None,
                 diff_phases=None):
        phases = np.atleast_1d(np.asarray(phases, dtype=float))
        if phases.ndim != 1 or phases.size == 0:
            raise ValueError("phases must be a non-empty 1-d array")
        if mean_photons < 0:
            raise ValueError("mean_photons must be >= 0")
        if period_s <= 0:
            raise ValueError("period_s must be > 0")
        if clock_hz is None:
            clock_hz = 1.0 / period_s
        elif abs(period_s * clock_hz - 1.0) > 1e-12:
            raise ValueError("period_s * clock_hz must equal 1 within 1e-12")
        self.phases = reduce_phase(phases)
        self.mean_photons = float(mean_photons)
        self.period_s = float(period_s)
        self.clock_hz = float(clock_hz)
        if diff_phases is not None:
            diff_phases = np.asarray(diff_phases, dtype=float)
            if diff_phases.shape != (phases.size - 1,):
                raise ValueError("diff_phases must have length n_pulses - 1")
        self._diff_phases = diff_phases

    @property
    def n_pulses(self) -> int:
        return self.phases.size

    @property
    def pulses(self) -> list[OpticalPulse]:
        """Materialize the pulse list (slot indices 0..n-1)."""
        mu = self.mean_photons
        return [OpticalPulse(i, mu, p) for i, p in enumerate(self.phases)]

    def differential_phases(self) -> np.ndarray:
        """Phase increments between consecutive pulses, mod 2*pi."""
        if self._diff_phases is not None:
            return reduce_phase(self._diff_phases)
        return reduce_phase(np.diff(self.phases))

    def __len__(self) -> int:
        return self.n_pulses


@dataclass(frozen=True)
class DifferentialPhaseSymbol:
    """One protocol symbol: the phase step to the next pulse."""

    diff_phase: float
    pair_boundary: bool = False
    meta: Optional[dict] = None


class DifferentialPhaseSequence:
    """Protocol-level differential phases, array-backed.

    ``diff_phases[k]`` is the phase step from pulse k to pulse k+1;
    ``pair_boundary[k]`` marks steps across which global-phase coherence is
    deliberately broken (pulse-pair randomization). ``modulation_levels`` is
    the M of the M-ary phase format; every phase must sit on the
    2*pi*k/M grid.
    """

    def __init__(self, diff_phases, modulation_levels, pair_boundary=None,
                 meta=None):
        diff_phases = np.atleast_1d(np.asarray(diff_phases, dtype=float))
        if modulation_levels < 2:
            raise ValueError("modulation_levels must be >= 2")
        dp = reduce_phase(diff_phases)
        k = np.rint(dp * modulation_levels / TWO_PI)
        on_grid = np.abs(dp - k * TWO_PI / modulation_levels)
        on_grid = np.minimum(on_grid, TWO_PI - on_grid)
        if np.any(on_grid > 1e-9):
            raise ValueError(
                f"differential phases must lie on the 2*pi*k/{modulation_levels} grid")
        if pair_boundary is None:
            pair_boundary = np.zeros(dp.size, dtype=bool)
        else:
            pair_boundary = np.asarray(pair_boundary, dtype=bool)
            if pair_boundary.shape != dp.shape:
                raise ValueError("pair_boundary must match diff_phases in length")
        self.diff_phases = dp
        self.pair_boundary = pair_boundary
        self.modulation_levels = int(modulation_levels)
        self.meta = meta if meta is not None else {}

    @classmethod
    def mpsk(cls, levels: int, symbol_indices) -> "DifferentialPhaseSequence":
        """Build an M-ary sequence from integer symbols in [0, levels)."""
        idx = np.asarray(symbol_indices, dtype=np.int64)
        if np.any((idx < 0) | (idx >= levels)):
            raise ValueError("symbol indices must lie in [0, levels)")
        return cls(idx * (TWO_PI / levels), levels)

    @property
    def symbols(self) -> list[DifferentialPhaseSymbol]:
        metas = self.meta.get("per_symbol")
        return [
            DifferentialPhaseSymbol(
                float(d), bool(b), None if metas is None else metas[i])
            for i, (d, b) in enumerate(zip(self.diff_phases, self.pair_boundary))
        ]

    def __len__(self) -> int:
        return self.diff_phases.size


@dataclass
class InjectionMode:
    """Seeding regime of the slave laser.

    variant is one of "off", "cw", "modulated". For "cw" the differential
    phase per slot is master_angular_freq * period (the free evolution of the
    master wave over one repetition period); for "modulated" it follows
    phase_sequence. phase_noise_sigma is the standard deviation of Gaussian
    differential-phase noise modeling imperfect locking; pair_randomization
    re-draws the absolute phase at every pair boundary.
    """

    variant: str
    master_angular_freq: float = 0.0
    phase_sequence: Optional[DifferentialPhaseSequence] = None
    phase_noise_sigma: float = 0.0
    pair_randomization: bool = False

    def __post_init__(self):
        if self.variant not in ("off", "cw", "modulated"):
            raise ValueError(f"unknown injection variant {self.variant!r}")
        if self.phase_noise_sigma < 0:
            raise ValueError("phase_noise_sigma must be >= 0")
        if self.variant == "off" and self.phase_sequence is not None:
            raise ValueError("no phase sequence is allowed with injection off")
        if self.variant == "modulated" and self.phase_sequence is None:
            raise ValueError("modulated injection requires a phase sequence")

    @classmethod
    def off(cls) -> "InjectionMode":
        return cls("off")

    @classmethod
    def cw(cls, master_angular_freq=0.0, phase_noise_sigma=0.0) -> "InjectionMode":
        return cls("cw", master_angular_freq=master_angular_freq,
                   phase_noise_sigma=phase_noise_sigma)

    @classmethod
    def modulated(cls, phase_sequence, phase_noise_sigma=0.0,
                  pair_randomization=False) -> "InjectionMode":
        return cls("modulated", phase_sequence=phase_sequence,
                   phase_noise_sigma=phase_noise_sigma,
                   pair_randomization=pair_randomization)


@dataclass(frozen=True)
class AmziConfig:
    """Asymmetric Mach-Zehnder demodulator: one-slot delay plus phase trim.

    delay_s must match the train period; phase_offset is the relative phase
    theta_A between long and short arm; output_port selects which
    complementary port is read out.
    """

    delay_s: float
    phase_offset: float = 0.0
    output_port: str = "bar"

    def __post_init__(self):
        if self.delay_s <= 0:
            raise ValueError("delay_s must be > 0")
        if self.output_port not in ("bar", "cross"):
            raise ValueError("output_port must be 'bar' or 'cross'")


@dataclass(frozen=True)
class InterferenceRecord:
    """Intensity leaving one AMZI port for one interference slot."""

    slot_index: int
    intensity_out: float
    input_intensity: float


@dataclass(frozen=True)
class IqPoint:
    """Demodulated symbol as a vector (radius, angle) in the complex plane."""

    radius: float
    angle: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")
        object.__setattr__(self, "angle", reduce_phase(self.angle))


@dataclass
class ConstellationReport:
    """Demodulated M-ary constellation plus its noiseless eye levels."""

    modulation_levels: int
    points: list[IqPoint]
    eye_levels: np.ndarray

    @property
    def n_eye_levels(self) -> int:
        return int(self.eye_levels.size)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def emit_pulse_train(n_pulses, mean_photons, mode, rng, period_s=5e-10,
                     global_phase_offset=0.0):
    """Emit a gain-switched pulse train under a given injection regime.

    Random-stream consumption is fixed per regime so that runs with the same
    seed are reproducible: one uniform draw for the start phase, n-1 Gaussian
    noise draws (cw/modulated), then one uniform draw per randomized pair
    boundary.

    Parameters
    ----------
    n_pulses : int
        Number of pulses, >= 1.
    mean_photons : float
        Mean photon number per pulse.
    mode : InjectionMode
        Seeding regime.
    rng : numpy.random.Generator
        Seeded random stream.
    period_s : float
        Slot period (default 500 ps, a 2 GHz train).
    global_phase_offset : float
        Constant added to every absolute phase; the emitted differential
        phases are unaffected, which makes demodulation bitwise invariant
        under this offset.

    Returns
    -------
    PulseTrain
    """
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    if mean_photons < 0:
        raise ValueError("mean_photons must be >= 0")

    if mode.variant == "off":
        raw = rng.uniform(0.0, TWO_PI, n_pulses)
        diffs = reduce_phase(np.diff(raw)) if n_pulses > 1 else None
        return PulseTrain(reduce_phase(raw + global_phase_offset), mean_photons,
                          period_s, diff_phases=diffs)

    start = rng.uniform(0.0, TWO_PI)
    if n_pulses == 1:
        return PulseTrain([start + global_phase_offset], mean_photons, period_s)

    sigma = mode.phase_noise_sigma
    noise = rng.normal(0.0, sigma, n_pulses - 1) if sigma > 0 else np.zeros(n_pulses - 1)

    if mode.variant == "cw":
        drift = reduce_phase(mode.master_angular_freq * period_s)
        steps = drift + noise
        unwrapped = start + np.concatenate(([0.0], np.cumsum(steps)))
    else:
        seq = mode.phase_sequence
        if len(seq) < n_pulses - 1:
            raise ValueError(
                f"phase sequence has {len(seq)} symbols; need >= {n_pulses - 1}")
        steps = seq.diff_phases[:n_pulses - 1] + noise
        base = start + np.concatenate(([0.0], np.cumsum(steps)))
        if mode.pair_randomization:
            boundaries = np.flatnonzero(seq.pair_boundary[:n_pulses - 1])
            if boundaries.size:
                redraws = rng.uniform(0.0, TWO_PI, boundaries.size)
                # pulse p+1 restarts at a fresh absolute phase; later pulses
                # keep accumulating the programmed steps from there
                seg_offsets = np.concatenate(([0.0], redraws - base[boundaries + 1]))
                seg_of = np.searchsorted(boundaries + 1, np.arange(n_pulses),
                                         side="right")
                unwrapped = base + seg_offsets[seg_of]
            else:
                unwrapped = base
        else:
            unwrapped = base

    diffs = reduce_phase(np.diff(unwrapped))
    phases = reduce_phase(unwrapped + global_phase_offset)
    return PulseTrain(phases, mean_photons, period_s, diff_phases=diffs)


# ---------------------------------------------------------------------------
# demodulation
# ---------------------------------------------------------------------------

def amzi_intensity(diff_phases, input_intensity, phase_offset=0.0, port="bar"):
    """Port intensity for given differential phases (vectorized core).

    Implements I_out = I_in/2 * [1 +/- cos(dphi + theta_A)] for the bar (+)
    and cross (-) port of a balanced one-slot-delay interferometer.
    """
    c = np.cos(np.asarray(diff_phases, dtype=float) + phase_offset)
    half = 0.5 * input_intensity
    return half * (1.0 + c) if port == "bar" else half * (1.0 - c)


def amzi_interfere(train: PulseTrain, cfg: AmziConfig) -> list[InterferenceRecord]:
    """Interfere consecutive pulses in the AMZI.

    Record k (k >= 1) holds the intensity of the overlap between pulse k and
    the delayed pulse k-1 at the configured port.
    """
    if train.n_pulses < 2:
        raise ValueError("train must contain at least 2 pulses")
    if abs(cfg.delay_s - train.period_s) > 1e-9 * train.period_s:
        raise ValueError(
            f"AMZI delay {cfg.delay_s} s does not match train period "
            f"{train.period_s} s")
    i_in = train.mean_photons
    out = amzi_intensity(train.differential_phases(), i_in,
                         cfg.phase_offset, cfg.output_port)
    return [InterferenceRecord(k + 1, float(v), i_in) for k, v in enumerate(out)]


def dual_basis_demodulate(train: PulseTrain) -> list[IqPoint]:
    """Recover (radius, differential phase) for every consecutive pulse pair.

    Uses two demodulators, one reading the {0, pi} quadrature (theta_A = 0)
    and one the {pi/2, 3pi/2} quadrature (theta_A = -pi/2); the angle is the
    two-argument arctangent of the normalized port intensities.
    """
    if train.n_pulses < 2:
        raise ValueError("train must contain at least 2 pulses")
    diffs = train.differential_phases()
    i_in = train.mean_photons
    if i_in == 0.0:
        return [IqPoint(0.0, 0.0) for _ in diffs]
    i_i = amzi_intensity(diffs, i_in, 0.0, "bar")
    i_q = amzi_intensity(diffs, i_in, -np.pi / 2.0, "bar")
    theta = np.arctan2(2.0 * i_q / i_in - 1.0, 2.0 * i_i / i_in - 1.0)
    return [IqPoint(i_in, t) for t in reduce_phase(theta)]


def fringe_scan(mode, mean_photons, theta_grid, pulses_per_point, rng,
                period_s=5e-10) -> list[InterferenceRecord]:
    """Sweep the demodulator phase and record the mean bar-port intensity.

    Emits a fresh train per grid point (the slow thermal sweep of the real
    receiver), so each returned record carries the mean intensity at one
    fringe position.
    """
    theta_grid = np.asarray(theta_grid, dtype=float)
    if theta_grid.size < 2:
        raise ValueError("theta_grid needs at least 2 points")
    if pulses_per_point < 2:
        raise ValueError("pulses_per_point must be >= 2")
    records = []
    for j, theta in enumerate(theta_grid):
        train = emit_pulse_train(pulses_per_point, mean_photons, mode, rng,
                                 period_s=period_s)
        mean_i = float(np.mean(amzi_intensity(train.differential_phases(),
                                              mean_photons, theta, "bar")))
        records.append(InterferenceRecord(j, mean_i, mean_photons))
    return records


def fringe_visibility(records: Sequence[InterferenceRecord]) -> float:
    """Fringe contrast (I_max - I_min) / (I_max + I_min).

    The records must span at least one full fringe (demodulator phase swept
    over 2*pi, or differential phase covering its full range).
    """
    if len(records) < 2:
        raise ValueError("need at least 2 records to estimate a visibility")
    vals = np.array([r.intensity_out for r in records])
    hi, lo = float(vals.max()), float(vals.min())
    if hi + lo == 0.0:
        raise ValueError("all intensities are zero; visibility is undefined")
    return (hi - lo) / (hi + lo)


def constellation_eye(levels, sigma_phi, n_symbols, rng,
                      mean_photons=1.0) -> ConstellationReport:
    """Demodulate a random M-ary phase-keyed train; report IQ points and eye.

    The noiseless single-port eye levels are the distinct values of
    I_in/2 * (1 + cos(2*pi*k/M)); for even M there are exactly M/2 + 1 of
    them (for odd M the distinct-value count is reported as found).
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    if n_symbols < levels:
        raise ValueError("n_symbols must be >= levels")
    idx = rng.integers(0, levels, n_symbols)
    seq = DifferentialPhaseSequence.mpsk(levels, idx)
    mode = InjectionMode.modulated(seq, phase_noise_sigma=sigma_phi)
    train = emit_pulse_train(n_symbols + 1, mean_photons, mode, rng)
    points = dual_basis_demodulate(train)
    k = np.arange(levels)
    eye = amzi_intensity(k * TWO_PI / levels, mean_photons, 0.0, "bar")
    eye = np.unique(np.round(eye, 12))
    return ConstellationReport(int(levels), points, np.sort(eye))
