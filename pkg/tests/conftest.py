import pytest

from addkit import coshlog, gaussian, poisson

BUILTINS = {"gaussian": gaussian, "poisson": poisson, "coshlog": coshlog}


@pytest.fixture(params=sorted(BUILTINS))
def builtin(request):
    return BUILTINS[request.param]()


@pytest.fixture
def gauss():
    return gaussian()


@pytest.fixture
def cauchy():
    return poisson()


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record and print a one-line verdict; returns the pass flag."""

    def record(label, passed, detail=""):
        line = f"{label}: {'PASS' if passed else 'FAIL'}" + (f" ({detail})" if detail else "")
        _VERDICTS.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
