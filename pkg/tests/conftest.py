import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def report(request):
    """``report(criterion, passed, detail)`` records one acceptance outcome."""
    results = request.config.stash[_RESULTS]

    def record(criterion, passed, detail=""):
        results.setdefault(criterion, []).append((bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    merged = {}
    for criterion, entries in results.items():
        key = int(criterion.rstrip("abc"))
        merged.setdefault(key, []).extend((criterion, ok, d) for ok, d in entries)
    for key in sorted(merged):
        parts = merged[key]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{c}: {'ok' if p else 'FAIL'} {d}".strip() for c, p, d in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key:2d}  {detail}")
