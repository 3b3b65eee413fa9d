import pytest

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """record(n, part, ok, detail): log one part of an acceptance criterion for the summary."""
    store = request.config.stash.setdefault(_RESULTS, {})

    def record(n, part, ok, detail):
        store.setdefault(n, {})[part] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_RESULTS, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        parts = store[n]
        ok = all(p[0] for p in parts.values())
        detail = "; ".join(f"{k}: {'ok' if p[0] else 'FAIL'} {p[1]}" if len(parts) > 1 else p[1] for k, p in sorted(parts.items()))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
