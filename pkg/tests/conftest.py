import os

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
_verdicts: dict[int, tuple[str, str, str]] = {}


def data_dir() -> str:
    return os.environ.get("WBGBRT_DATA", os.path.join(ROOT, "data"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    number, title = marker.args
    if rep.passed:
        _verdicts.setdefault(number, ("PASS", title, ""))
    else:
        reason = str(getattr(rep.longrepr, "reprcrash", None) and rep.longrepr.reprcrash.message or rep.longrepr)
        _verdicts[number] = ("FAIL", title, reason.splitlines()[0] if reason else "")


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        verdict, title, reason = _verdicts[number]
        line = f"criterion {number}: {verdict}  {title}"
        terminalreporter.write_line(line + (f"  ({reason})" if verdict == "FAIL" and reason else ""))
