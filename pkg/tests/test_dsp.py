import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from myodecode import dsp

finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def df2t_cascade(sos: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Brute-force transposed direct-form-II biquad cascade, one section at a time."""
    y = np.array(x, dtype=float)
    for b0, b1, b2, a0, a1, a2 in sos:
        s0 = s1 = 0.0
        out = np.empty_like(y)
        for i, xi in enumerate(y):
            yi = b0 * xi + s0
            s0 = b1 * xi - a1 * yi + s1
            s1 = b2 * xi - a2 * yi
            out[i] = yi
        y = out
    return y


def tone_gain(variant: str, freq_hz: float, cycles_exact_len: int = 3000) -> float:
    """Steady-state amplitude gain measured by driving the filter with a tone."""
    filt = dsp.make_filter(variant, n_channels=1)
    n = 1000 + cycles_exact_len  # 1 s settling + an exact number of cycles
    t = np.arange(n) / 1000.0
    x = np.sin(2 * np.pi * freq_hz * t)
    y = filt.process_block(x[:, None])[:, 0]
    seg = slice(1000, n)
    lockin = np.exp(-2j * np.pi * freq_hz * t[seg])
    return float(2.0 * np.abs(np.mean(y[seg] * lockin)))


class TestExpandChannels:
    def test_counting_example(self):
        out = dsp.expand_channels(np.array([1.0, 2, 3, 4, 5, 6]))
        assert out.shape == (21,)
        assert np.array_equal(out[:6], [1, 2, 3, 4, 5, 6])
        assert out[6] == -1.0  # pair (0, 1)
        assert out[20] == -1.0  # pair (4, 5)

    def test_constant_input_cancels_pairs(self):
        out = dsp.expand_channels(np.full(6, 3.7))
        assert np.all(out[6:] == 0.0)

    def test_wrong_electrode_count_rejected(self):
        with pytest.raises(ValueError):
            dsp.expand_channels(np.zeros(5))
        with pytest.raises(ValueError):
            dsp.expand_batch(np.zeros((10, 7)))

    @given(
        samples=hnp.arrays(np.float64, 6, elements=finite_floats),
        common=finite_floats,
    )
    @settings(max_examples=100)
    def test_common_mode_rejection_machine_precision(self, samples, common):
        base = dsp.expand_channels(samples)
        shifted = dsp.expand_channels(samples + common)
        # exact in real arithmetic; in floats the error is bounded by
        # rounding at the scale of the operands
        tol = 4 * np.finfo(float).eps * (np.abs(samples).max() + abs(common))
        assert np.max(np.abs(base[6:] - shifted[6:])) <= tol

    @given(samples=hnp.arrays(np.float64, (7, 6), elements=finite_floats))
    @settings(max_examples=50)
    def test_batch_matches_single(self, samples):
        batch = dsp.expand_batch(samples)
        rows = np.array([dsp.expand_channels(s) for s in samples])
        assert np.array_equal(batch, rows)

    def test_pair_order_lexicographic(self):
        assert dsp.PAIR_INDICES[0] == (0, 1)
        assert dsp.PAIR_INDICES[4] == (0, 5)
        assert dsp.PAIR_INDICES[5] == (1, 2)
        assert dsp.PAIR_INDICES[-1] == (4, 5)
        assert len(dsp.PAIR_INDICES) == 15


class TestFilters:
    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            dsp.make_filter("boutique")

    @pytest.mark.parametrize("variant", dsp.FILTER_VARIANTS)
    def test_sections_stable(self, variant):
        assert dsp.make_filter(variant).is_stable()

    def test_low_cost_rejects_dc(self):
        filt = dsp.make_filter(dsp.LOW_COST, n_channels=1)
        y = filt.process_block(np.ones((3000, 1)))[:, 0]
        steady = np.abs(y[-1000:]).max()
        assert steady < 10 ** (-40 / 20)  # >= 40 dB down

    @pytest.mark.parametrize("freq", [60.0, 120.0, 180.0])
    def test_research_grade_notches(self, freq):
        gain = tone_gain(dsp.RESEARCH_GRADE, freq)
        assert gain < 10 ** (-20 / 20)  # >= 20 dB down

    def test_research_grade_passband_at_100hz(self):
        gain = tone_gain(dsp.RESEARCH_GRADE, 100.0)
        assert 10 ** (-3 / 20) < gain < 10 ** (3 / 20)

    def test_impulse_matches_difference_equation(self):
        for variant in dsp.FILTER_VARIANTS:
            filt = dsp.make_filter(variant, n_channels=1)
            impulse = np.zeros(400)
            impulse[0] = 1.0
            ours = filt.process_block(impulse[:, None])[:, 0]
            oracle = df2t_cascade(filt.sos, impulse)
            assert np.array_equal(ours, oracle)

    def test_zero_input_zero_output(self):
        filt = dsp.make_filter(dsp.LOW_COST)
        out = filt.process_block(np.zeros((500, 21)))
        assert np.all(out == 0.0)

    def test_linearity_in_scale(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((800, 21))
        f1 = dsp.make_filter(dsp.RESEARCH_GRADE)
        f2 = dsp.make_filter(dsp.RESEARCH_GRADE)
        y1 = f1.process_block(3.5 * x)
        y2 = 3.5 * f2.process_block(x)
        assert np.allclose(y1, y2, rtol=1e-12, atol=1e-12)

    def test_blockwise_equals_batch(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((1000, 21))
        full = dsp.make_filter(dsp.RESEARCH_GRADE).process_block(x)
        stream = dsp.make_filter(dsp.RESEARCH_GRADE)
        blocks = [stream.process_block(x[i : i + 40]) for i in range(0, 1000, 40)]
        assert np.array_equal(np.vstack(blocks), full)

    def test_state_reset_reproduces_output(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((200, 21))
        filt = dsp.make_filter(dsp.LOW_COST)
        first = filt.process_block(x)
        filt.reset()
        second = filt.process_block(x)
        assert np.array_equal(first, second)

    def test_channel_count_mismatch_rejected(self):
        filt = dsp.make_filter(dsp.LOW_COST)
        with pytest.raises(ValueError):
            filt.process_block(np.zeros((10, 20)))

    def test_bounded_input_bounded_state_10m_samples(self):
        rng = np.random.default_rng(6)
        x = rng.uniform(-1.0, 1.0, size=(10_000_000, 1))
        for variant in dsp.FILTER_VARIANTS:
            y = dsp.make_filter(variant, n_channels=1).process_block(x)
            assert np.all(np.isfinite(y))
            assert np.abs(y).max() < 100.0

    def test_filter_frame_wrapper(self):
        filt = dsp.make_filter(dsp.LOW_COST)
        frame = dsp.ChannelFrame(t=0, channels=np.ones(21))
        out = dsp.filter_frame(filt, frame)
        assert out.t == 0
        assert out.channels.shape == (21,)

    def test_export_coefficients_round_trip(self):
        filt = dsp.make_filter(dsp.RESEARCH_GRADE)
        text = filt.export_coefficients()
        assert "filter variant: research-grade" in text
        rows = [l for l in text.splitlines() if l.startswith("section")]
        assert len(rows) == 2 * filt.sos.shape[0]
        b0 = np.array([float(v) for v in rows[0].split(":")[1].split()])
        assert np.allclose(b0, filt.sos[0, :3], rtol=1e-11)


def brute_force_mav(x: np.ndarray) -> np.ndarray:
    """Windowed rectified mean computed the slow, obvious way."""
    n, nch = x.shape
    out = []
    for j in range(1, n // 40 + 1):
        end = 40 * j
        row = []
        for c in range(nch):
            acc = 0.0
            for i in range(max(0, end - 300), end):
                acc += abs(x[i, c])
            row.append(acc / 300.0)
        out.append(row)
    return np.array(out) if out else np.zeros((0, nch))


class TestMav:
    def test_constant_input_reaches_abs_value(self):
        x = np.full((400, 2), -2.5)
        mav = dsp.mav_batch(x)
        assert mav.shape == (10, 2)
        assert np.allclose(mav[-1], 2.5)  # window fully warmed past 300 samples

    def test_alternating_sign_same_mav(self):
        x = np.tile([[1.5], [-1.5]], (300, 1))
        mav = dsp.mav_batch(x)
        assert np.allclose(mav[-1], 1.5)

    def test_cadence_example_10s(self):
        x = np.zeros((10_000, 21))
        assert dsp.mav_batch(x).shape[0] == 250

    @given(n=st.integers(min_value=0, max_value=500))
    @settings(max_examples=30, deadline=None)
    def test_cadence_is_floor_n_over_40(self, n):
        x = np.ones((n, 1))
        assert dsp.mav_batch(x).shape[0] == n // 40

    def test_stream_equals_batch_bit_identical(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((1003, 21)) * 50
        batch = dsp.mav_batch(x)
        windower = dsp.MavWindower()
        stream = [m for sample in x if (m := windower.push(sample)) is not None]
        assert np.array_equal(np.array(stream), batch)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((700, 3)) * 100
        assert np.max(np.abs(dsp.mav_batch(x) - brute_force_mav(x))) < 1e-9

    def test_warmup_zero_padding(self):
        x = np.ones((40, 1))
        mav = dsp.mav_batch(x)
        assert np.isclose(mav[0, 0], 40.0 / 300.0)

    def test_mav_stream_timestamps(self):
        frames = [dsp.ChannelFrame(t=i, channels=np.ones(21)) for i in range(120)]
        feats = dsp.mav_stream(frames)
        assert [f.t for f in feats] == [40, 80, 120]
        assert feats[0].window_ms == 300 and feats[0].hop_ms == 40


class TestBaseline:
    def test_mean_over_rest_frames(self):
        feats = np.array([[0.2] * 21, [0.4] * 21, [9.0] * 21])
        rest = np.array([True, True, False])
        assert np.allclose(dsp.estimate_baseline(feats, rest), 0.3)

    def test_constant_rest(self):
        feats = np.full((5, 21), 0.5)
        assert np.allclose(dsp.estimate_baseline(feats, np.ones(5, bool)), 0.5)

    def test_empty_rest_mask_rejected(self):
        with pytest.raises(ValueError, match="rest mask"):
            dsp.estimate_baseline(np.ones((5, 21)), np.zeros(5, bool))

    def test_subtract_identity_and_zero(self):
        mav = np.linspace(0, 2, 21)
        assert np.all(dsp.subtract_baseline(mav, mav) == 0.0)
        assert np.array_equal(dsp.subtract_baseline(mav, np.zeros(21)), mav)

    def test_subtract_arithmetic(self):
        out = dsp.subtract_baseline(np.full(21, 1.0), np.full(21, 0.3))
        assert np.allclose(out, 0.7)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            dsp.subtract_baseline(np.ones(21), np.ones(20))
