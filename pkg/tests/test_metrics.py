import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from torusmem import manifold as M
from torusmem import memory as Mem
from torusmem import metrics as Met
from torusmem import resonance as Res

R = M.make_rotation()


# -- accounting ---------------------------------------------------------------


def test_accounting_blind_walk_335():
    fp = Met.memory_footprint(335, 0, 192_000)
    assert fp.baseline_bytes == 64_320_000
    assert fp.signal_bytes == 336 * 64
    assert fp.signal_to_state_ratio > 2900
    assert fp.net_compression == pytest.approx(3000, rel=0.03)


def test_accounting_222_tokens_65_anchors():
    fp = Met.memory_footprint(222, 65, 192_000)
    assert fp.baseline_bytes / Met.MB == pytest.approx(42.624)
    assert fp.sparse_anchor_bytes / Met.MB == pytest.approx(12.48)
    assert fp.net_compression == pytest.approx(3.41, rel=0.01)
    assert fp.signal_to_state_ratio is None


def test_accounting_20k_stream():
    fp = Met.memory_footprint(20_000, 4_539, 192_000)
    assert fp.baseline_bytes == 3_840_000_000
    assert fp.sparse_anchor_bytes / Met.MB == pytest.approx(871.488)
    assert fp.signal_bytes / Met.MB == pytest.approx(1.280064)
    assert fp.net_compression == pytest.approx(4.4, rel=0.01)


def test_kib_convention_also_within_tolerance():
    # 192 * 1024 bytes per token, as a second reading of the per-token figure
    assert Met.memory_footprint(222, 65, 192 * 1024).net_compression == pytest.approx(3.41, rel=0.03)


@given(st.integers(1, 10**6), st.data())
def test_accounting_identities(n, data):
    a = data.draw(st.integers(0, n))
    fp = Met.memory_footprint(n, a)
    assert fp.baseline_bytes == n * Met.DEFAULT_KV_BYTES_PER_TOKEN
    assert fp.sparse_anchor_bytes == a * Met.DEFAULT_KV_BYTES_PER_TOKEN
    assert fp.signal_bytes == (n + 1) * 64


# -- classification and audit -------------------------------------------------


def test_classify(table):
    assert Met.classify("The", "the", False, table) is Met.ErrorClass.EXACT
    assert Met.classify("The", "the", True, table) is not Met.ErrorClass.EXACT
    assert Met.classify("there", "their", False, table) is Met.ErrorClass.HOMOPHONE
    assert Met.classify("cat", "<aba?>", False, table) is Met.ErrorClass.UNKNOWN_MARKER
    assert Met.classify(",", "lighthouse", False, table) is Met.ErrorClass.OTHER


def test_classify_thresholds(table):
    a, b = table.fingerprint("cat")[0], table.fingerprint("cap")[0]
    cos = float(np.dot(a, b))
    expected = (Met.ErrorClass.HOMOPHONE if cos >= 0.999 else
                Met.ErrorClass.PHONETIC_DRIFT if cos >= 0.8 else Met.ErrorClass.OTHER)
    assert Met.classify("cat", "cap", False, table) is expected


def test_audit_report(table, vocab, lighthouse_text):
    toks = Mem.tokenize(lighthouse_text)[:80]
    flags = [i % 4 == 0 for i in range(len(toks))]
    trace = Mem.encode(toks, R, table, flags)
    recon, _ = Res.reconstruct(trace, vocab, Res.UniformPrior())
    rep = Met.audit(toks, recon, trace, table, window_size=30)
    assert rep.exact_matches <= rep.token_count == 80
    assert rep.accuracy == rep.exact_matches / 80
    assert rep.drop_rate == pytest.approx(1 - 20 / 80)
    assert rep.exact_matches + sum(rep.errors.values()) == rep.token_count
    assert len(rep.window_accuracies) == 3
    d = rep.to_dict()
    assert d["schema_version"] == Met.REPORT_SCHEMA_VERSION
    text = Met.render_text_report(d)
    assert "MEMORY FOOTPRINT BREAKDOWN" in text and f"({rep.exact_matches}/80 tokens correct)" in text


def test_audit_length_mismatch(table):
    trace = Mem.encode(["a", "b"], R, table)
    with pytest.raises(ValueError):
        Met.audit(["a", "b"], ["a"], trace, table)


def test_report_renders_footprint_block():
    rep = {
        "token_count": 335, "anchor_count": 0, "exact_matches": 280, "accuracy": 280 / 335, "drop_rate": 1.0,
        "memory": Met.memory_footprint(335, 0).to_dict(),
        "errors": {"homophone": 1, "phonetic_drift": 0, "unknown_marker": 0, "other": 0},
        "examples": {"homophone": [["there", "their"]]},
    }
    text = Met.render_text_report(rep)
    assert "Baseline Memory (Dense KV): 64.32 MB" in text
    assert "0 anchors retained" in text and "there->their" in text


# -- windows ------------------------------------------------------------------


def test_windowed_accuracy():
    assert Met.windowed_accuracy([True] * 10, 5) == [1.0, 1.0]
    assert Met.windowed_accuracy([True, False] * 4, 2) == [0.5] * 4
    assert Met.windowed_accuracy([True, True, False], 2) == [1.0, 0.0]
    assert Met.windowed_accuracy([], 3) == []
    with pytest.raises(ValueError):
        Met.windowed_accuracy([True], 0)


@given(st.lists(st.booleans(), min_size=1, max_size=200), st.integers(1, 50))
def test_windows_average_back(matches, w):
    wins = Met.windowed_accuracy(matches, w)
    sizes = [min(w, len(matches) - i) for i in range(0, len(matches), w)]
    assert sum(a * s for a, s in zip(wins, sizes)) == pytest.approx(sum(matches))


# -- calculators --------------------------------------------------------------


def test_collision_reference_values():
    res = Met.collision_probability(0.1, 1e6, 16)
    assert res["v_spot"] == pytest.approx(2.35e-17, rel=0.01)
    assert res["p_collision"] == pytest.approx(1.175e-5, rel=0.01)
    # oracle: closed-form volume of a 16-ball
    assert res["v_spot"] == pytest.approx(math.pi**8 / 40320 * 1e-16, rel=1e-12)


def test_collision_edges():
    assert Met.collision_probability(0.1, 0)["p_collision"] == 0
    with pytest.raises(ValueError):
        Met.collision_probability(0.1, 10, 15)
    with pytest.raises(ValueError):
        Met.collision_probability(0.5, 10)


@given(st.floats(0.01, 0.4), st.floats(0.01, 0.4), st.floats(1, 1e9), st.floats(1, 1e9))
def test_collision_monotone(e1, e2, n1, n2):
    lo_e, hi_e = sorted((e1, e2))
    lo_n, hi_n = sorted((n1, n2))
    assert Met.collision_probability(lo_e, lo_n)["p_collision"] <= Met.collision_probability(hi_e, lo_n)["p_collision"]
    assert Met.collision_probability(lo_e, lo_n)["p_collision"] <= Met.collision_probability(lo_e, hi_n)["p_collision"]


def test_drift_bound():
    assert Met.drift_bound(1e6, 1.19e-7) == pytest.approx(1.19e-4)
    assert Met.drift_bound(0) == 0
    assert Met.drift_bound(1, 1.19e-7) == 1.19e-7
    with pytest.raises(ValueError):
        Met.drift_bound(-1)


def test_cycle_bound():
    assert Met.cycle_length_bound(24, 8) == 2**192
    assert str(Met.cycle_length_bound(24, 8)).startswith("6277")
    assert Met.cycle_length_bound(1, 1) == 2
    assert Met.cycle_length_bound(24, 1) == 2**24
    with pytest.raises(ValueError):
        Met.cycle_length_bound(0, 8)


# -- latency ------------------------------------------------------------------


def test_latency_bench_with_fake_clock(table, vocab):
    trace = Mem.encode(["the", "sea", "was", "calm"], R, table)
    ticks = iter(range(10**6))
    rep = Met.latency_bench(trace, vocab, [1, 4], repetitions=3, clock=lambda: next(ticks))
    assert set(rep.decode) == {1, 4}
    assert rep.depth_ratio == 1.0
    assert rep.encode_step_median_s == 1


def test_latency_bench_errors(table, vocab):
    trace = Mem.encode(["the"], R, table)
    with pytest.raises(ValueError):
        Met.latency_bench(trace, vocab, [1], repetitions=0)
    with pytest.raises(ValueError):
        Met.latency_bench(trace, vocab, [2], repetitions=1)


def test_csv():
    assert Met.rows_to_csv(["a", "b"], [(1, 2)]) == "a,b\n1,2\n"
