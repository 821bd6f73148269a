import pytest

_RESULTS = {}


class AcceptanceLog:
    """Collects one verdict per criterion; several checks may feed one criterion."""

    def record(self, number, label, ok, detail=""):
        entry = _RESULTS.setdefault(number, {"label": label, "ok": True, "details": []})
        entry["ok"] &= bool(ok)
        if detail:
            entry["details"].append(detail)
        return bool(ok)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        r = _RESULTS[number]
        verdict = "PASS" if r["ok"] else "FAIL"
        terminalreporter.write_line(
            f"[{verdict}] {number:>2}. {r['label']}: {'; '.join(r['details'])}")
