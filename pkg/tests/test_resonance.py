import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from torusmem import manifold as M
from torusmem import memory as Mem
from torusmem import resonance as Res
from torusmem.phonetics import nearest

R = M.make_rotation()


# -- signal_probs -------------------------------------------------------------


def _step(table, word, prev=None):
    prev = prev or M.TorusState.zero()
    return prev, M.evolve(R, prev, table.fingerprint(word)[0])


def test_single_candidate_is_certain(table):
    prev, cur = _step(table, "cat")
    p = Res.signal_probs(R, prev, cur, [table.fingerprint("dog")[0]], 25.0)
    assert p.tolist() == [1.0]


def test_true_token_wins(table):
    prev, cur = _step(table, "sun", M.TorusState.from_coords(np.full(16, 0.3)))
    fps = [table.fingerprint(w)[0] for w in ("cat", "sun", "moon", "dog")]
    p = Res.signal_probs(R, prev, cur, fps, 25.0)
    assert int(np.argmax(p)) == 1
    assert abs(p.sum() - 1) < 1e-12
    landed = M.evolve(R, prev, fps[1])
    assert M.torus_distance(landed, cur) < 1e-5


def test_gamma_zero_is_uniform(table):
    prev, cur = _step(table, "cat")
    p = Res.signal_probs(R, prev, cur, [table.fingerprint(w)[0] for w in ("a", "b", "c")], 0.0)
    assert np.allclose(p, 1 / 3)


def test_signal_probs_matches_per_candidate_evolve(table):
    prev, cur = _step(table, "moon", M.TorusState.from_coords(np.linspace(0, 0.9, 16)))
    words = ("moon", "noon", "spoon", "man")
    fps = [table.fingerprint(w)[0] for w in words]
    d = np.array([M.torus_distance(M.evolve(R, prev, f), cur) for f in fps])
    oracle = np.exp(-25 * d) / np.exp(-25 * d).sum()
    assert np.allclose(Res.signal_probs(R, prev, cur, fps, 25.0), oracle, atol=1e-12)


def test_lift_force():
    v = np.array([0.999999, 0.5, 0.0, 0.99])
    assert Res.lift_force(v).tolist() == pytest.approx([-1e-6, 0.5, 0.0, 0.99])


# -- priors -------------------------------------------------------------------


def test_ngram_counts():
    prior = Res.NgramPrior(["a", "b", "a", "b"])
    p = prior.score(["a"], ["b", "c"])
    assert p[0] > p[1]
    assert abs(p.sum() - 1) < 1e-12
    # add-k oracle: P(b|a) = (2 + 0.1) / (2 + 0.1 * 3)
    assert prior.prob("b", "a") == pytest.approx(2.1 / 2.3)


def test_ngram_empty_context_uses_unigrams():
    prior = Res.NgramPrior(["x", "y", "y"])
    p = prior.score([], ["x", "y", "z"])
    assert p[1] > p[0] > p[2]


def test_ngram_empty_corpus(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("")
    with pytest.raises(ValueError):
        Res.ngram_train(f)


def test_ngram_train_uses_tokenizer(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("The cat sat. The cat ran.")
    prior = Res.ngram_train(f)
    assert prior.unigrams["the"] == 2 and prior.unigrams["."] == 2


@given(st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=30),
       st.lists(st.sampled_from(["a", "b", "x", "y"]), min_size=1, max_size=6, unique=True))
def test_prior_contract(corpus, candidates):
    p = Res.NgramPrior(corpus).score(corpus[-1:], candidates)
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-9


class _Service:
    """Local stand-in for a scoring service."""

    def __init__(self, respond):
        self.respond = respond
        self.requests = []
        service = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                service.requests.append(body)
                status, payload = service.respond(body)
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_port}/score"
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def service():
    created = []

    def make(respond):
        s = _Service(respond)
        created.append(s)
        return s

    yield make
    for s in created:
        s.close()


def test_remote_equal_logprobs_is_uniform(service):
    s = service(lambda b: (200, {"logprobs": [-1.0] * len(b["candidates"])}))
    p = Res.RemotePrior(s.url).score(["the"], ["cat", "dog", "eel"])
    assert np.allclose(p, 1 / 3)
    assert s.requests == [{"context": ["the"], "candidates": ["cat", "dog", "eel"]}]


def test_remote_softmax(service):
    s = service(lambda b: (200, {"logprobs": [0.0, np.log(3.0)]}))
    assert np.allclose(Res.RemotePrior(s.url).score([], ["a", "b"]), [0.25, 0.75])


def test_remote_misaligned_is_malformed(service):
    s = service(lambda b: (200, {"logprobs": [0.0]}))
    with pytest.raises(Res.PriorUnavailable, match="malformed"):
        Res.RemotePrior(s.url).score([], ["a", "b"])


def test_remote_non_200_retries_once(service):
    s = service(lambda b: (503, {"error": "busy"}))
    prior = Res.RemotePrior(s.url, timeout=2)
    with pytest.raises(Res.PriorUnavailable):
        prior.score([], ["a"])
    assert len(s.requests) == 2


def test_remote_unreachable():
    with pytest.raises(Res.PriorUnavailable):
        Res.RemotePrior("http://127.0.0.1:9/none", timeout=0.5).score([], ["a"])


def test_remote_env_override(monkeypatch):
    monkeypatch.setenv(Res.ENDPOINT_ENV, "http://example.invalid/env")
    assert Res.remote_prior("http://example.invalid/cfg").endpoint == "http://example.invalid/env"
    monkeypatch.delenv(Res.ENDPOINT_ENV)
    assert Res.remote_prior("http://example.invalid/cfg").endpoint == "http://example.invalid/cfg"
    with pytest.raises(ValueError):
        Res.remote_prior(None)


def test_remote_handles_concurrent_requests(service):
    s = service(lambda b: (200, {"logprobs": [0.0] * len(b["candidates"])}))
    prior = Res.RemotePrior(s.url)
    out = []
    threads = [threading.Thread(target=lambda: out.append(prior.score([], ["a", "b"]))) for _ in range(6)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len(out) == 6 and all(np.allclose(p, 0.5) for p in out)


# -- decoding -----------------------------------------------------------------


@pytest.fixture(scope="module")
def lighthouse_trace(table, lighthouse_text):
    toks = Mem.tokenize(lighthouse_text)
    return toks, Mem.encode(toks, R, table)


def test_config_validation():
    with pytest.raises(ValueError):
        Res.DecoderConfig(alpha=1.5)
    with pytest.raises(ValueError):
        Res.DecoderConfig(top_k=0)
    with pytest.raises(ValueError):
        Res.DecoderConfig(gamma=-1)


def test_anchor_hit(table, vocab):
    trace = Mem.encode(["In", "November", "rain"], R, table, [False, True, False])
    surface, log = Res.decode_position(trace, 2, vocab, Res.UniformPrior(), Res.DecoderConfig())
    assert surface == "November" and log.outcome is Res.Outcome.ANCHOR_HIT
    assert log.candidates[0].p_total == 1.0


def test_position_out_of_range(table, vocab):
    trace = Mem.encode(["cat"], R, table)
    for t in (0, 2):
        with pytest.raises(IndexError):
            Res.decode_position(trace, t, vocab, Res.UniformPrior(), Res.DecoderConfig())


def test_unique_bridge_decodes_exactly(table, vocab):
    # "lighthouse" has no perfect homophone in the index
    fp = table.fingerprint("lighthouse")[0]
    hits = dict(nearest(vocab, fp, 8))
    assert sum(c >= 1 - 1e-6 for c in hits.values()) == 1
    trace = Mem.encode(["the", "lighthouse"], R, table)
    surface, log = Res.decode_position(trace, 2, vocab, Res.UniformPrior(), Res.DecoderConfig())
    assert surface == "lighthouse"


def test_oov_bridge_never_crashes(table, vocab):
    trace = Mem.encode(["the", "Zorbaxqel", "tomb"], R, table)
    surface, log = Res.decode_position(trace, 2, vocab, Res.UniformPrior(), Res.DecoderConfig())
    assert surface == "<aba?>" or surface in vocab
    assert log.outcome in (Res.Outcome.UNKNOWN, Res.Outcome.SIGNAL_LED, Res.Outcome.CONSENSUS, Res.Outcome.PRIOR_LED)


def test_unknown_marker_below_threshold(table, vocab):
    trace = Mem.encode(["Zorbaxqel"], R, table)
    cfg = Res.DecoderConfig(unknown_threshold=1.0)
    surface, log = Res.decode_position(trace, 1, vocab, Res.UniformPrior(), cfg)
    assert surface == "<aba?>" and log.outcome is Res.Outcome.UNKNOWN


def test_all_anchor_reconstruction_is_identity(table, vocab, lighthouse_text):
    toks = Mem.tokenize(lighthouse_text)
    trace = Mem.encode(toks, R, table, [True] * len(toks))
    recon, logs = Res.reconstruct(trace, vocab, Res.UniformPrior())
    assert recon == toks
    assert all(log.outcome is Res.Outcome.ANCHOR_HIT for log in logs)


def test_anchor_transparency(table, vocab, lighthouse_text):
    toks = Mem.tokenize(lighthouse_text)[:60]
    flags = [i % 3 == 0 for i in range(len(toks))]
    trace = Mem.encode(toks, R, table, flags)
    recon, _ = Res.reconstruct(trace, vocab, Res.NgramPrior(toks))
    assert all(recon[i] == toks[i] for i in range(len(toks)) if flags[i])


def test_consensus_algebra_on_logs(lighthouse_trace, vocab):
    toks, trace = lighthouse_trace
    for alpha in (0.4, 0.75):
        cfg = Res.DecoderConfig(alpha=alpha)
        _, logs = Res.reconstruct(trace, vocab, Res.NgramPrior(toks), cfg)
        for log in logs:
            for c in log.candidates:
                assert abs(c.p_total - (alpha * c.p_prior + (1 - alpha) * c.p_signal)) <= 1e-9


def test_degenerate_alphas(lighthouse_trace, vocab):
    toks, trace = lighthouse_trace
    prior = Res.NgramPrior(toks)
    for alpha, field in ((1.0, "p_prior"), (0.0, "p_signal")):
        _, logs = Res.reconstruct(trace, vocab, prior, Res.DecoderConfig(alpha=alpha))
        for log in logs[:120]:
            values = np.array([getattr(c, field) for c in log.candidates])
            surfaces = [c.surface for c in log.candidates]
            assert log.chosen == surfaces[Res._argmax_lex(values, surfaces)]


def test_uniform_prior_follows_signal(lighthouse_trace, vocab):
    _, trace = lighthouse_trace
    _, logs = Res.reconstruct(trace, vocab, Res.UniformPrior())
    for log in logs:
        ps = np.array([c.p_signal for c in log.candidates])
        surfaces = [c.surface for c in log.candidates]
        assert log.chosen == surfaces[Res._argmax_lex(ps, surfaces)]


def test_equidistant_candidates_follow_prior(table, vocab):
    # gamma = 0 makes every candidate equally likely under the signal
    trace = Mem.encode(["the", "sea"], R, table)
    prior = Res.NgramPrior(["the", "see", "the", "see", "the", "sea"])
    cfg = Res.DecoderConfig(gamma=0.0)
    _, log = Res.decode_position(trace, 2, vocab, prior, cfg, context=["the"])
    pp = np.array([c.p_prior for c in log.candidates])
    surfaces = [c.surface for c in log.candidates]
    assert log.chosen == surfaces[Res._argmax_lex(pp, surfaces)] == "see"


class _BrokenPrior:
    def score(self, context, candidates):
        raise Res.PriorUnavailable("offline")


def test_prior_failure_falls_back_to_signal(table, vocab):
    trace = Mem.encode(["the", "lighthouse"], R, table)
    surface, log = Res.decode_position(trace, 2, vocab, _BrokenPrior(), Res.DecoderConfig())
    assert surface == "lighthouse"
    assert log.prior_fallback and log.alpha == 0.0
    for c in log.candidates:
        assert c.p_total == pytest.approx(c.p_signal, abs=1e-12)


def test_remote_outage_degrades_softly(table, vocab, service):
    calls = {"n": 0}

    def flaky(body):
        calls["n"] += 1
        return (500, {}) if calls["n"] <= 2 else (200, {"logprobs": [0.0] * len(body["candidates"])})

    s = service(flaky)
    trace = Mem.encode(["the", "lighthouse", "stood"], R, table)
    recon, logs = Res.reconstruct(trace, vocab, Res.RemotePrior(s.url, timeout=2))
    assert recon[1:] == ["lighthouse", "stood"]
    assert [log.prior_fallback for log in logs] == [True, False, False]


def test_homophone_tie_break(table, vocab):
    trace = Mem.encode(["where"], R, table)
    surface, log = Res.decode_position(trace, 1, vocab, Res.UniformPrior(), Res.DecoderConfig())
    exact = sorted(c.surface for c in log.candidates if c.cosine >= 1 - 1e-6)
    assert "where" in exact
    assert surface == exact[0]
    # a prior that knows the word breaks the tie the other way
    prior = Res.NgramPrior(["where"] * 5)
    surface, _ = Res.decode_position(trace, 1, vocab, prior, Res.DecoderConfig())
    assert surface == "where"


def test_version_mismatch(table, vocab):
    trace = Mem.encode(["cat"], R, table)
    trace.synth_version = 999
    with pytest.raises(Res.VersionMismatch):
        Res.reconstruct(trace, vocab, Res.UniformPrior())


def test_reconstruct_deterministic(lighthouse_trace, vocab):
    toks, trace = lighthouse_trace
    a, _ = Res.reconstruct(trace, vocab, Res.NgramPrior(toks))
    b, _ = Res.reconstruct(trace, vocab, Res.NgramPrior(toks))
    assert a == b


def test_position_log_serializes(lighthouse_trace, vocab):
    _, trace = lighthouse_trace
    _, log = Res.decode_position(trace, 5, vocab, Res.UniformPrior(), Res.DecoderConfig())
    d = json.loads(json.dumps(log.to_dict()))
    assert d["position"] == 4 and len(d["candidates"]) == 32
