import numpy as np
import pytest

_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def verdict(request):
    """Record one acceptance verdict line; the test still asserts on ``ok`` itself."""
    store = request.config.stash.setdefault(_VERDICTS, {})

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        store[number] = line + (f"  [{detail}]" if detail else "")
        print(store[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_VERDICTS, {})
    if store:
        terminalreporter.section("acceptance")
        for number in sorted(store):
            terminalreporter.write_line(store[number])
