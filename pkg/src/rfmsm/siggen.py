"""Deterministic synthetic generator of pulsed radar I/Q frames with AWGN.

Five waveform families: coherent unmodulated pulse train, binary Barker-coded
pulse, polyphase Barker-coded pulse, Frank-coded pulse, and LFM chirp pulse.
Pulses have rectangular envelopes and unit peak amplitude; inter-pulse samples
are exactly zero. SNR is defined over pulse-active samples so task difficulty
is independent of duty cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .iqcore import DatasetMeta, IQFrame, SignalDataset

CLASS_NAMES = ("coherent_pulse", "barker", "polyphase_barker", "frank", "lfm")

CLASS_COHERENT = 0
CLASS_BARKER = 1
CLASS_POLY_BARKER = 2
CLASS_FRANK = 3
CLASS_LFM = 4

# Binary Barker codes (all known lengths).
BARKER_CODES = {
    2: (1, -1),
    3: (1, 1, -1),
    4: (1, 1, -1, 1),
    5: (1, 1, 1, -1, 1),
    7: (1, 1, 1, -1, -1, 1, -1),
    11: (1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1),
    13: (1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1),
}

# Generalized (polyphase) Barker phase codes, radians. Found by numerical
# search; every autocorrelation sidelobe has magnitude <= 1 (property-tested).
POLYPHASE_BARKER_PHASES = {
    2: (0.0, 1.0046536914),
    3: (0.0, 5.0580447850, 0.6967896651),
    4: (0.0, 1.5737161699, 4.9709088435, 3.9083928567),
    5: (0.0, 5.3523125725, 5.4768663651, 0.9667266991, 3.7951988620),
    7: (0.0, 2.0020959729, 2.1408319016, 4.3749175872, 2.4695345451,
        2.6595012786, 0.9861080009),
    11: (0.0, 3.6831929609, 1.7261033116, 5.2018813529, 2.2216258499,
         2.9555919411, 0.9357794386, 0.8857831272, 0.5305310921,
         1.9836910155, 3.3197836559),
    13: (0.0, 3.9094249920, 0.9038531499, 4.0132451442, 2.5019587362,
         2.8507019024, 4.0784319278, 3.2137836171, 3.3481730384,
         0.0458006593, 0.6798006009, 3.5110165971, 4.0876590429),
}

FRANK_M_CHOICES = (4, 6, 8)


@dataclass(frozen=True)
class WaveformSpec:
    """Parameters of one pulsed waveform realization."""

    class_id: int
    n_pulses: int
    pulse_width_us: float
    pri_us: float
    t0_us: float
    code_length: int = 0
    chirp_bw_hz: float = 0.0

    def __post_init__(self):
        if not 0 <= self.class_id < len(CLASS_NAMES):
            raise ValidationError(f"unknown class_id {self.class_id}")
        if self.n_pulses < 1:
            raise ValidationError("n_pulses must be >= 1")
        if self.pulse_width_us <= 0:
            raise ValidationError("pulse_width_us must be > 0")
        if self.n_pulses > 1 and self.pri_us <= self.pulse_width_us:
            raise ValidationError("pri_us must exceed pulse_width_us")
        if self.t0_us < 0:
            raise ValidationError("t0_us must be >= 0")
        if self.class_id in (CLASS_BARKER, CLASS_POLY_BARKER):
            if self.code_length not in BARKER_CODES:
                raise ValidationError(
                    f"code_length {self.code_length} not in {sorted(BARKER_CODES)}"
                )
        if self.class_id == CLASS_FRANK:
            m = math.isqrt(self.code_length)
            if m * m != self.code_length or m < 2:
                raise ValidationError("Frank code_length must be a perfect square >= 4")
        if self.class_id == CLASS_LFM and self.chirp_bw_hz <= 0:
            raise ValidationError("LFM requires chirp_bw_hz > 0")

    def extent_us(self) -> float:
        return self.t0_us + (self.n_pulses - 1) * self.pri_us + self.pulse_width_us


def _chip_phases(spec: WaveformSpec) -> np.ndarray | None:
    """Per-chip phase sequence for coded classes, None for uncoded ones."""
    if spec.class_id == CLASS_BARKER:
        code = BARKER_CODES[spec.code_length]
        return np.where(np.asarray(code) > 0, 0.0, np.pi)
    if spec.class_id == CLASS_POLY_BARKER:
        return np.asarray(POLYPHASE_BARKER_PHASES[spec.code_length])
    if spec.class_id == CLASS_FRANK:
        m = math.isqrt(spec.code_length)
        i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        return (2.0 * np.pi * (i * j) / m).reshape(-1)
    return None


def generate_clean(spec: WaveformSpec, frame_len: int, t_res_us: float) -> IQFrame:
    """Synthesize the noiseless waveform on a sample grid of frame_len points."""
    frame_dur = frame_len * t_res_us
    if spec.extent_us() > frame_dur + 1e-9:
        raise ValidationError(
            f"pulse train exceeds frame: extent {spec.extent_us():.2f} us "
            f"> frame {frame_dur:.2f} us"
        )
    width_n = max(1, int(round(spec.pulse_width_us / t_res_us)))
    chips = _chip_phases(spec)
    i_out = np.zeros(frame_len)
    q_out = np.zeros(frame_len)

    # Phase is evaluated at the center of each sample within the pulse.
    frac = (np.arange(width_n) + 0.5) / width_n
    if spec.class_id == CLASS_LFM:
        pw_s = spec.pulse_width_us * 1e-6
        tau = frac * pw_s
        phase = np.pi * spec.chirp_bw_hz * (tau * tau / pw_s - tau)
    elif chips is not None:
        idx = np.minimum((frac * len(chips)).astype(int), len(chips) - 1)
        phase = chips[idx]
    else:
        phase = np.zeros(width_n)
    pulse_i = np.cos(phase)
    pulse_q = np.sin(phase)

    for k in range(spec.n_pulses):
        start = int(round((spec.t0_us + k * spec.pri_us) / t_res_us))
        stop = start + width_n
        if stop > frame_len:
            raise ValidationError("pulse train exceeds frame: pulse past last sample")
        i_out[start:stop] = pulse_i
        q_out[start:stop] = pulse_q
    return IQFrame(i_out, q_out)


def active_signal_power(frame: IQFrame) -> float:
    """Mean complex-sample power over nonzero (pulse-active) samples."""
    power = frame.i.astype(np.float64) ** 2 + frame.q.astype(np.float64) ** 2
    active = power > 0
    if not active.any():
        raise ValidationError("undefined SNR: frame has no nonzero samples")
    return float(power[active].mean())


def noise_sigma(frame: IQFrame, snr_db: int) -> float:
    """Per-channel noise std dev achieving the target active-region SNR."""
    p_sig = active_signal_power(frame)
    p_noise = p_sig * 10.0 ** (-snr_db / 10.0)
    return math.sqrt(p_noise / 2.0)


def add_awgn(frame: IQFrame, snr_db: int, rng_seed) -> IQFrame:
    """Add white Gaussian noise calibrated against pulse-active signal power.

    ``rng_seed`` may be an int or an existing ``np.random.Generator`` (the
    latter lets corpus generation keep one stream per frame).
    """
    rng = (
        rng_seed
        if isinstance(rng_seed, np.random.Generator)
        else np.random.default_rng(rng_seed)
    )
    sigma = noise_sigma(frame, snr_db)
    n = len(frame)
    noise_i = rng.normal(0.0, sigma, n)
    noise_q = rng.normal(0.0, sigma, n)
    dtype = frame.i.dtype
    return IQFrame(
        (frame.i + noise_i).astype(dtype, copy=False),
        (frame.q + noise_q).astype(dtype, copy=False),
    )


@dataclass(frozen=True)
class ParamRanges:
    """Uniform sampling ranges for waveform parameters."""

    n_pulses: tuple[int, int] = (2, 6)
    pulse_width_us: tuple[float, float] = (10.0, 16.0)
    pri_us: tuple[float, float] = (17.0, 23.0)
    barker_lengths: tuple[int, ...] = (2, 3, 4, 5, 7, 11, 13)
    frank_m: tuple[int, ...] = FRANK_M_CHOICES
    chirp_bw_hz: tuple[float, float] = (0.5e6, 1.5e6)

    def to_dict(self) -> dict:
        return {
            "n_pulses": list(self.n_pulses),
            "pulse_width_us": list(self.pulse_width_us),
            "pri_us": list(self.pri_us),
            "barker_lengths": list(self.barker_lengths),
            "frank_m": list(self.frank_m),
            "chirp_bw_hz": list(self.chirp_bw_hz),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamRanges":
        kwargs = {}
        for key in d:
            if key not in cls.__dataclass_fields__:
                raise ValidationError(f"unknown generator range key: {key}")
            kwargs[key] = tuple(d[key])
        return cls(**kwargs)


def sample_spec(
    class_id: int,
    rng: np.random.Generator,
    frame_len: int,
    t_res_us: float,
    ranges: ParamRanges,
) -> WaveformSpec:
    """Draw one waveform parameterization that fits inside the frame."""
    n_pulses = int(rng.integers(ranges.n_pulses[0], ranges.n_pulses[1] + 1))
    pw = float(rng.uniform(*ranges.pulse_width_us))
    pri_lo = max(ranges.pri_us[0], pw + t_res_us)
    pri = float(rng.uniform(pri_lo, max(ranges.pri_us[1], pri_lo)))
    code_length = 0
    chirp_bw = 0.0
    if class_id in (CLASS_BARKER, CLASS_POLY_BARKER):
        code_length = int(rng.choice(ranges.barker_lengths))
    elif class_id == CLASS_FRANK:
        m = int(rng.choice(ranges.frank_m))
        code_length = m * m
    elif class_id == CLASS_LFM:
        chirp_bw = float(rng.uniform(*ranges.chirp_bw_hz))
    extent = (n_pulses - 1) * pri + pw
    frame_dur = frame_len * t_res_us
    slack = frame_dur - extent
    if slack < 0:
        raise ValidationError(
            f"parameter ranges do not fit frame: extent {extent:.2f} us "
            f"> frame {frame_dur:.2f} us"
        )
    t0 = float(rng.uniform(0.0, slack))
    return WaveformSpec(
        class_id=class_id,
        n_pulses=n_pulses,
        pulse_width_us=pw,
        pri_us=pri,
        t0_us=t0,
        code_length=code_length,
        chirp_bw_hz=chirp_bw,
    )


def generate_corpus(
    n_frames_per_cell: int,
    snr_grid,
    seed: int,
    frame_len: int = 512,
    t_res_us: float = 0.3,
    ranges: ParamRanges = ParamRanges(),
    name: str = "synth",
    class_ids=None,
) -> SignalDataset:
    """Balanced corpus: n_frames_per_cell frames for every (class, snr) cell.

    Each frame derives its own substream from (seed, frame_index), so output
    is byte-identical regardless of generation schedule. ``class_ids``
    restricts the generated classes (metadata keeps the full inventory).
    """
    if n_frames_per_cell < 1:
        raise ValidationError("n_frames_per_cell must be >= 1")
    snr_grid = tuple(int(s) for s in snr_grid)
    class_ids = tuple(range(len(CLASS_NAMES))) if class_ids is None else tuple(class_ids)
    meta = DatasetMeta(
        name=name,
        n_cls=len(CLASS_NAMES),
        t_res_us=t_res_us,
        frame_len=frame_len,
        snr_grid=snr_grid,
        class_names=CLASS_NAMES,
    )
    n_total = len(class_ids) * len(snr_grid) * n_frames_per_cell
    x = np.empty((n_total, 2, frame_len), dtype=np.float32)
    labels = np.empty((n_total, 2), dtype=np.int16)
    idx = 0
    for class_id in class_ids:
        for snr in snr_grid:
            for _ in range(n_frames_per_cell):
                rng = np.random.default_rng((seed, idx))
                spec = sample_spec(class_id, rng, frame_len, t_res_us, ranges)
                clean = generate_clean(spec, frame_len, t_res_us)
                noisy = add_awgn(clean, snr, rng)
                x[idx, 0] = noisy.i
                x[idx, 1] = noisy.q
                labels[idx] = (class_id, snr)
                idx += 1
    return SignalDataset(x, labels, meta)
