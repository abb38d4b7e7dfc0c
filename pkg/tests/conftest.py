from collections import OrderedDict

import pytest

from hexcover.interference import fit_bounds

ACCEPTANCE: "OrderedDict[str, list[tuple[str, bool, str]]]" = OrderedDict()


def record(criterion: str, check: str, ok: bool, detail: str) -> None:
    """Store one acceptance sub-check; the summary prints one line per criterion."""
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE, key=lambda c: int(c)):
        checks = ACCEPTANCE[criterion]
        status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        details = "; ".join(f"{name}: {'ok' if ok else 'FAILED'} ({detail})" for name, ok, detail in checks)
        terminalreporter.write_line(f"criterion {criterion}: {status} -- {details}")


@pytest.fixture(scope="session")
def bounds4():
    return fit_bounds(4.0)


@pytest.fixture(scope="session")
def bounds3():
    return fit_bounds(3.0)
