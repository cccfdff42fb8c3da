import numpy as np
import pytest
from hypothesis import settings

from semibsl.rng import SeedTree

SUITE_SEED = 20240611

# derandomized so full-suite reruns are bitwise stable
settings.register_profile("suite", derandomize=True, deadline=None, max_examples=60)
settings.load_profile("suite")


@pytest.fixture
def tree(request):
    """A stream unique to the requesting test, rooted at the suite seed."""
    key = int.from_bytes(request.node.nodeid.encode()[-8:].rjust(8, b"\0"), "little") % (1 << 31)
    return SeedTree(SUITE_SEED, (key,))


@pytest.fixture
def gen(tree):
    return tree.generator()


def pytest_report_header(config):
    return f"suite seed: {SUITE_SEED}"


def rel_close(a, b, rtol):
    return np.all(np.abs(np.asarray(a) - np.asarray(b)) <= rtol * np.abs(np.asarray(b)))


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record a one-line PASS/FAIL for an acceptance check, then assert it."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(label, ok, detail, info=False):
        tag = "INFO" if info else ("PASS" if ok else "FAIL")
        lines.append(f"{tag} {label}: {detail}")
        if not info:
            assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
