from torusmem import corpus
from torusmem.memory import tokenize


def test_exact_length_and_determinism():
    a = corpus.synthetic_tokens(1234, seed=5)
    assert len(a) == 1234
    assert a == corpus.synthetic_tokens(1234, seed=5)
    assert a != corpus.synthetic_tokens(1234, seed=6)


def test_text_tokenizes_back():
    toks = corpus.synthetic_tokens(500, seed=3)
    assert tokenize(corpus.synthetic_text(500, seed=3)) == toks


def test_in_dictionary(table):
    toks = corpus.synthetic_tokens(3000, seed=0)
    missing = {t for t in toks if len(t) > 1 and t not in table}
    assert not missing
