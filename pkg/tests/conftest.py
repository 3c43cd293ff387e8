import hashlib
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from torusmem import phonetics as P
from torusmem.synth_constants import SYNTH_VERSION

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def table():
    return P.load_dictionary(P.default_dictionary_path())


@pytest.fixture(scope="session")
def vocab(table, request):
    """Full dictionary index; building takes ~20 s on one core, so it is cached across sessions."""
    digest = hashlib.sha256(P.default_dictionary_path().read_bytes()).hexdigest()[:16]
    cache = request.config.cache.mkdir("torusmem")
    path = cache / f"vocab-{digest}-s{SYNTH_VERSION}.ptmv"
    if path.exists():
        try:
            return P.VocabIndex.load(path)
        except P.VocabFormatError:
            path.unlink()
    index = P.build_vocab_index(table)
    index.save(path)
    return index


@pytest.fixture(scope="session")
def vocab_path(vocab, request):
    digest = hashlib.sha256(P.default_dictionary_path().read_bytes()).hexdigest()[:16]
    return request.config.cache.mkdir("torusmem") / f"vocab-{digest}-s{SYNTH_VERSION}.ptmv"


@pytest.fixture(scope="session")
def lighthouse_text():
    return (FIXTURES / "lighthouse.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def lighthouse_path():
    return FIXTURES / "lighthouse.txt"


def pytest_terminal_summary(terminalreporter):
    from tests.test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
