from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from myodecode import datastore, dsp, runtime, synth
from myodecode.errors import SchemaError

FIXTURE = Path(__file__).parent / "data" / "conformance_session.csv"

BYTES_PER_MIN_BUDGET = 32e9 / 108_000  # 32 GB over ~108,000 minutes


def small_log(n: int = 5, seed: int = 3) -> datastore.SessionLog:
    rng = np.random.default_rng(seed)
    kin = datastore.quantize_kin(rng.uniform(-1, 1, size=(n, 6)))
    labels = [synth.REST_LABEL if i % 2 else "D2-flex/ext" for i in range(n)]
    return datastore.SessionLog(
        session_id="unit",
        seed=seed,
        filter_variant=dsp.LOW_COST,
        dof_labels=datastore.DOF_LABELS,
        t_ms=40 * np.arange(1, n + 1),
        raw=rng.integers(0, 1024, size=(n, 6)),
        mav=rng.integers(0, 10_000, size=(n, 21)),
        kin=kin,
        labels=labels,
    )


class TestRoundTrip:
    def test_write_read_identity(self, tmp_path):
        log = small_log()
        path = tmp_path / "s.csv"
        n_bytes = datastore.write_session(log, path)
        assert n_bytes == path.stat().st_size
        back = datastore.read_session(path)
        assert back.equals(log)

    def test_reread_is_byte_identical(self, tmp_path):
        log = small_log()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        datastore.write_session(log, p1)
        datastore.write_session(datastore.read_session(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_session_is_header_only(self, tmp_path):
        log = small_log(0)
        path = tmp_path / "empty.csv"
        datastore.write_session(log, path)
        text = path.read_text()
        assert text.endswith(datastore.HEADER_LINE + "\n")
        back = datastore.read_session(path)
        assert back.n_frames == 0

    @given(n=st.integers(min_value=0, max_value=30), seed=st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=40, deadline=None)
    def test_round_trip_property(self, tmp_path_factory, n, seed):
        log = small_log(n, seed)
        path = tmp_path_factory.mktemp("rt") / "s.csv"
        datastore.write_session(log, path)
        assert datastore.read_session(path).equals(log)


class TestConformanceFixture:
    def test_fixture_parses(self):
        log = datastore.read_session(FIXTURE)
        assert log.session_id == "conformance-v1"
        assert log.n_frames == 3
        assert log.labels == ["rest", "D1-flex", "D1-flex/ext"]
        assert log.raw[2, 0] == 1023
        assert log.mav[2, 0] == 9999
        assert log.kin[2, 0] == -1.0
        assert log.kin[2, 5] == 0.9999

    def test_fixture_rewrites_byte_identically(self, tmp_path):
        log = datastore.read_session(FIXTURE)
        out = tmp_path / "copy.csv"
        datastore.write_session(log, out)
        assert out.read_bytes() == FIXTURE.read_bytes()


def _mutate_line(path: Path, out: Path, lineno: int, fn) -> Path:
    lines = path.read_text().split("\n")
    lines[lineno - 1] = fn(lines[lineno - 1])
    out.write_text("\n".join(lines))
    return out


class TestSchemaEnforcement:
    def test_dropped_column_names_the_line(self, tmp_path):
        bad = _mutate_line(FIXTURE, tmp_path / "bad.csv", 9, lambda l: l.rsplit(",", 1)[0])
        with pytest.raises(SchemaError, match="line 9"):
            datastore.read_session(bad)

    def test_backwards_timestamp_rejected(self, tmp_path):
        bad = _mutate_line(FIXTURE, tmp_path / "bad.csv", 10, lambda l: "40" + l[3:])
        with pytest.raises(SchemaError, match="40 ms"):
            datastore.read_session(bad)

    def test_raw_out_of_range_rejected(self, tmp_path):
        bad = _mutate_line(FIXTURE, tmp_path / "bad.csv", 8, lambda l: l.replace(",512,", ",1024,", 1))
        with pytest.raises(SchemaError, match="raw"):
            datastore.read_session(bad)

    def test_nan_kin_rejected(self, tmp_path):
        bad = _mutate_line(FIXTURE, tmp_path / "bad.csv", 8, lambda l: l.replace("0.0000", "nanana", 1))
        with pytest.raises(SchemaError, match="kin0"):
            datastore.read_session(bad)

    def test_non_canonical_int_rejected(self, tmp_path):
        bad = _mutate_line(FIXTURE, tmp_path / "bad.csv", 8, lambda l: l.replace(",512,", ",0512,", 1))
        with pytest.raises(SchemaError, match="canonical"):
            datastore.read_session(bad)

    def test_unknown_label_rejected(self, tmp_path):
        bad = _mutate_line(FIXTURE, tmp_path / "bad.csv", 8, lambda l: l.replace("rest", "bork"))
        with pytest.raises(SchemaError, match="label"):
            datastore.read_session(bad)

    def test_five_decimal_kin_rejected(self, tmp_path):
        bad = _mutate_line(
            FIXTURE, tmp_path / "bad.csv", 8, lambda l: l.replace("0.0000", "0.00000", 1)
        )
        with pytest.raises(SchemaError):
            datastore.read_session(bad)

    def test_missing_magic_rejected(self, tmp_path):
        bad = _mutate_line(FIXTURE, tmp_path / "bad.csv", 1, lambda l: "# other-format")
        with pytest.raises(SchemaError, match="magic"):
            datastore.read_session(bad)

    def test_wrong_header_line_rejected(self, tmp_path):
        bad = _mutate_line(FIXTURE, tmp_path / "bad.csv", 7, lambda l: l.replace("t_ms", "time"))
        with pytest.raises(SchemaError, match="header"):
            datastore.read_session(bad)

    def test_validate_rejects_bad_arrays(self):
        log = small_log()
        log.raw[0, 0] = -3
        with pytest.raises(ValueError):
            log.validate()


class TestStorageBudget:
    def test_worst_row_width_sums_to_195(self):
        assert datastore.WORST_ROW_BYTES == 195

    def test_worst_width_rows_render_at_declared_width(self, tmp_path):
        log = datastore.worst_width_session(minutes=4 / 60.0)  # 100 rows
        path = tmp_path / "w.csv"
        datastore.write_session(log, path)
        rows = path.read_text().split("\n")[7:-1]
        assert len(rows) == 100
        # +1 for the LF the width accounting includes
        assert max(len(r) + 1 for r in rows) == datastore.WORST_ROW_BYTES

    def test_one_minute_worst_session_fits_budget(self, tmp_path):
        log = datastore.worst_width_session(minutes=1.0)
        n_bytes = datastore.write_session(log, tmp_path / "m.csv")
        assert n_bytes <= BYTES_PER_MIN_BUDGET

    def test_estimate_zero_minutes_is_header_only(self):
        assert datastore.storage_estimate(0) == datastore.header_bytes()

    def test_estimate_linear(self):
        header = datastore.header_bytes()
        one = datastore.storage_estimate(7)
        two = datastore.storage_estimate(14)
        assert two - one == one - header

    def test_sd_card_claim(self):
        assert datastore.storage_estimate(108_000) <= 32e9

    def test_estimate_dominates_actual_bytes(self, tmp_path):
        log = datastore.worst_width_session(minutes=0.5)
        actual = datastore.write_session(log, tmp_path / "h.csv")
        assert actual <= datastore.storage_estimate(0.5)

    def test_negative_minutes_rejected(self):
        with pytest.raises(ValueError):
            datastore.storage_estimate(-1)


class TestSidecar:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        adc = rng.integers(0, 1024, size=(400, 6))
        path = tmp_path / "x.emgraw"
        datastore.write_sidecar(path, adc)
        assert np.array_equal(datastore.read_sidecar(path), adc)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "x.emgraw"
        path.write_bytes(b"NOTRAW1\n")
        with pytest.raises(SchemaError):
            datastore.read_sidecar(path)

    def test_size_mismatch_rejected(self, tmp_path):
        path = tmp_path / "x.emgraw"
        datastore.write_sidecar(path, np.zeros((10, 6), dtype=int))
        blob = path.read_bytes()
        path.write_bytes(blob[:-4])
        with pytest.raises(SchemaError, match="size"):
            datastore.read_sidecar(path)

    def test_out_of_range_samples_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            datastore.write_sidecar(tmp_path / "x.emgraw", np.full((5, 6), 2000))

    def test_path_convention(self):
        assert datastore.sidecar_path("a/b/session.csv") == Path("a/b/session.emgraw")


class TestQuantize:
    def test_negative_zero_normalized(self):
        q = datastore.quantize_kin(np.array([-1e-9]))
        assert q[0] == 0.0
        assert not np.signbit(q[0])

    def test_idempotent(self):
        v = np.random.default_rng(0).uniform(-1, 1, size=50)
        once = datastore.quantize_kin(v)
        assert np.array_equal(datastore.quantize_kin(once), once)

    def test_grid_resolution(self):
        q = datastore.quantize_kin(np.array([0.123449, 0.123451]))
        assert np.allclose(q, [0.1234, 0.1235], atol=1e-12)
