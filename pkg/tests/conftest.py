import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    key, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else detail
    _CRITERIA[key] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (int(k.rstrip("abc")), k)):
        title, verdict, detail = _CRITERIA[key]
        line = f"criterion {key:<3} {verdict}  {title}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
