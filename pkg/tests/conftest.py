from collections import OrderedDict

import pytest

# criterion number -> list of (part, passed, detail)
_RESULTS: "OrderedDict[int, list]" = OrderedDict()


class CriterionLog:
    def record(self, number: int, part: str, passed: bool, detail: str):
        _RESULTS.setdefault(number, []).append((part, bool(passed), detail))
        print(f"criterion {number} [{part}]: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed


@pytest.fixture(scope="session")
def criteria():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        parts = _RESULTS[number]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {'ok' if good else 'FAIL'} ({d})" for name, good, d in parts)
        tr.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
