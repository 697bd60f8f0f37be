import pytest

_criteria: dict[int, tuple[str, list[bool], list[str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, (title, [], []))
    entry[1].append(rep.passed)
    notes = [v for k, v in item.user_properties if k == "detail"]
    entry[2].extend(notes)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, results, notes = _criteria[number]
        status = "PASS" if all(results) else "FAIL"
        line = f"criterion {number:2d} {status}  {title}"
        if notes:
            line += "  [" + "; ".join(notes) + "]"
        terminalreporter.write_line(line)
