import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line (plus detail lines) for the terminal summary."""
    lines = request.config.stash[_KEY]

    def record(number, title, ok, details=()):
        head = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}"
        block = [head] + [f"        {d}" for d in details]
        print("\n".join(block), flush=True)
        lines.append(block)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    blocks = config.stash.get(_KEY, [])
    if not blocks:
        return
    terminalreporter.section("acceptance criteria")
    for block in sorted(blocks, key=lambda b: b[0].split("criterion ")[1]):
        for line in block:
            terminalreporter.write_line(line)
