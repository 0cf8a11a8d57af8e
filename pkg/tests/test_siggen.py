import numpy as np
import pytest

from rfmsm import iqcore, siggen
from rfmsm.errors import ValidationError
from rfmsm.siggen import (
    BARKER_CODES,
    POLYPHASE_BARKER_PHASES,
    WaveformSpec,
    add_awgn,
    generate_clean,
    generate_corpus,
    noise_sigma,
)


def _runs(mask):
    """Contiguous True runs as (start, stop) pairs."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    stops = np.concatenate([idx[breaks] + 1, [idx[-1] + 1]])
    return list(zip(starts, stops))


def autocorr_psl(phases):
    """Peak autocorrelation sidelobe magnitude (brute force)."""
    c = np.exp(1j * np.asarray(phases, dtype=np.float64))
    return max(abs(np.vdot(c[:-k], c[k:])) for k in range(1, len(c)))


class TestGenerateClean:
    def test_coherent_two_pulses(self):
        spec = WaveformSpec(0, n_pulses=2, pulse_width_us=12.0, pri_us=20.0, t0_us=5.0)
        frame = generate_clean(spec, 512, 0.3)
        power = frame.i**2 + frame.q**2
        runs = _runs(power > 0)
        assert len(runs) == 2
        for start, stop in runs:
            phases = np.arctan2(frame.q[start:stop], frame.i[start:stop])
            assert np.allclose(phases, phases[0])

    def test_frank_phase_matrix_oracle(self):
        spec = WaveformSpec(
            siggen.CLASS_FRANK, n_pulses=1, pulse_width_us=16.0, pri_us=20.0,
            t0_us=0.0, code_length=16,
        )
        frame = generate_clean(spec, 512, 0.3)
        active = (frame.i**2 + frame.q**2) > 0
        phases = np.arctan2(frame.q[active], frame.i[active])
        # brute-force Frank matrix for M=4
        m = 4
        expected = np.array([2 * np.pi * i * j / m for i in range(m) for j in range(m)])
        width = int(active.sum())
        frac = (np.arange(width) + 0.5) / width
        chip = np.minimum((frac * 16).astype(int), 15)
        want = expected[chip]
        diff = np.angle(np.exp(1j * (phases - want)))
        assert np.max(np.abs(diff)) < 1e-9

    def test_lfm_instantaneous_frequency_increases(self):
        spec = WaveformSpec(
            siggen.CLASS_LFM, n_pulses=1, pulse_width_us=30.0, pri_us=40.0,
            t0_us=10.0, chirp_bw_hz=1.0e6,
        )
        t_res = 0.3
        frame = generate_clean(spec, 512, t_res)
        active = (frame.i**2 + frame.q**2) > 0
        phase = np.unwrap(np.arctan2(frame.q[active], frame.i[active]))
        freq = np.diff(phase) / (2 * np.pi * t_res * 1e-6)
        slopes = np.diff(freq)
        # frequency rises linearly: first differences of freq are positive, constant
        assert np.all(freq[1:] > freq[:-1])
        assert np.std(slopes) / np.mean(slopes) < 0.05
        # sweep covers roughly the configured bandwidth
        assert freq[-1] - freq[0] == pytest.approx(1.0e6, rel=0.1)

    def test_barker_codes_are_barker(self):
        for length, code in BARKER_CODES.items():
            assert len(code) == length
            assert autocorr_psl(np.where(np.asarray(code) > 0, 0.0, np.pi)) <= 1 + 1e-9

    def test_polyphase_codes_are_generalized_barker(self):
        for length, phases in POLYPHASE_BARKER_PHASES.items():
            assert len(phases) == length
            assert autocorr_psl(phases) <= 1 + 1e-9
            # genuinely polyphase: not all multiples of pi
            assert not np.allclose(np.abs(np.sin(phases)), 0, atol=1e-6)

    def test_pulse_train_exceeds_frame(self):
        spec = WaveformSpec(0, n_pulses=6, pulse_width_us=16.0, pri_us=23.0, t0_us=40.0)
        with pytest.raises(ValidationError, match="exceeds frame"):
            generate_clean(spec, 512, 0.3)

    def test_interpulse_exactly_zero(self):
        spec = WaveformSpec(
            siggen.CLASS_BARKER, n_pulses=3, pulse_width_us=10.0, pri_us=20.0,
            t0_us=2.0, code_length=13,
        )
        frame = generate_clean(spec, 512, 0.3)
        power = frame.i**2 + frame.q**2
        runs = _runs(power > 0)
        assert len(runs) == 3
        covered = np.zeros(512, dtype=bool)
        for start, stop in runs:
            covered[start:stop] = True
        assert np.all(frame.i[~covered] == 0.0)
        assert np.all(frame.q[~covered] == 0.0)


class TestAWGN:
    def _frame(self):
        spec = WaveformSpec(0, n_pulses=2, pulse_width_us=12.0, pri_us=20.0, t0_us=5.0)
        return generate_clean(spec, 512, 0.3)

    def test_zero_db_noise_power_equals_signal_power(self):
        frame = self._frame()
        sigma = noise_sigma(frame, 0)
        power = frame.i**2 + frame.q**2
        active_power = power[power > 0].mean()
        assert 2 * sigma**2 == pytest.approx(active_power, rel=1e-12)

    def test_measured_snr(self):
        frame = self._frame()
        clean = frame.stacked()
        p_sig = siggen.active_signal_power(frame)
        noise_power = 0.0
        n_frames = 300
        for k in range(n_frames):
            noisy = add_awgn(frame, 20, rng_seed=(99, k))
            delta = noisy.stacked() - clean
            noise_power += float((delta**2).sum(axis=0).mean())
        measured = 10 * np.log10(p_sig / (noise_power / n_frames))
        assert abs(measured - 20.0) < 0.5

    def test_deterministic(self):
        frame = self._frame()
        a = add_awgn(frame, 5, rng_seed=42)
        b = add_awgn(frame, 5, rng_seed=42)
        np.testing.assert_array_equal(a.i, b.i)
        np.testing.assert_array_equal(a.q, b.q)

    def test_all_zero_frame_rejected(self):
        frame = siggen.IQFrame(np.zeros(16), np.zeros(16))
        with pytest.raises(ValidationError, match="undefined SNR"):
            add_awgn(frame, 0, rng_seed=0)

    def test_noise_is_white(self):
        # residual autocorrelation at nonzero lags stays inside a 5-sigma band
        frame = self._frame()
        clean = frame.stacked()
        lags = range(1, 6)
        acc = {lag: 0.0 for lag in lags}
        total = 0
        n_frames = 1000
        for k in range(n_frames):
            noisy = add_awgn(frame, 0, rng_seed=(7, k))
            resid = (noisy.stacked() - clean).ravel()
            resid = resid / resid.std()
            for lag in lags:
                acc[lag] += float((resid[:-lag] * resid[lag:]).sum())
            total += resid.size
        for lag in lags:
            rho = acc[lag] / (total - lag * n_frames)
            assert abs(rho) < 5.0 / np.sqrt(total)


class TestCorpus:
    def test_205_frames(self):
        ds = generate_corpus(1, range(-20, 21), seed=1)
        assert len(ds) == 205
        assert ds.meta.n_cls == 5 and len(ds.meta.snr_grid) == 41

    def test_single_cell_labels(self):
        ds = generate_corpus(3, [0], seed=1, class_ids=(2,))
        assert len(ds) == 3
        assert np.all(ds.class_ids() == 2)
        assert np.all(ds.snr_dbs() == 0)

    def test_uniform_histogram(self):
        ds = generate_corpus(4, [-10, 0, 10], seed=5)
        counts = {}
        for c, s in ds.labels:
            counts[(int(c), int(s))] = counts.get((int(c), int(s)), 0) + 1
        assert len(counts) == 15
        assert set(counts.values()) == {4}

    def test_reproducible_canonical_bytes(self, tmp_path):
        a = generate_corpus(2, [-5, 5], seed=77)
        b = generate_corpus(2, [-5, 5], seed=77)
        pa, pb = tmp_path / "a.rfm", tmp_path / "b.rfm"
        iqcore.write_canonical(a, pa)
        iqcore.write_canonical(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_clean_energy_confined_to_pulses(self):
        # every generated frame derives from a spec whose pulses tile the
        # active set exactly; verified indirectly: regenerate the clean frame
        rng = np.random.default_rng((31, 0))
        spec = siggen.sample_spec(0, rng, 512, 0.3, siggen.ParamRanges())
        frame = generate_clean(spec, 512, 0.3)
        power = frame.i**2 + frame.q**2
        assert len(_runs(power > 0)) == spec.n_pulses
