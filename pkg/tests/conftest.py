import pytest

_config = None


def pytest_configure(config):
    global _config
    _config = config


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    criterion = getattr(getattr(item, "function", None), "_criterion", None)
    if criterion is not None and report.when == "call":
        report._criterion = criterion


def pytest_runtest_logreport(report):
    criterion = getattr(report, "_criterion", None)
    if criterion is None or report.when != "call" or _config is None:
        return
    terminal = _config.pluginmanager.get_plugin("terminalreporter")
    if terminal is None:
        return
    number, label = criterion
    verdict = "PASS" if report.passed else "FAIL"
    terminal.write_line(f"criterion {number:2d} {verdict}  {label}")
