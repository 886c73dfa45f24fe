import contextlib

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("default")

_ACCEPTANCE: dict[int, str] = {}


class _Outcome:
    detail = ""


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion's verdict for the summary."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        out = _Outcome()
        try:
            yield out
        except BaseException as exc:
            reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            _ACCEPTANCE[number] = f"criterion {number:2d} FAIL  {title}: {out.detail or reason}"
            raise
        _ACCEPTANCE[number] = f"criterion {number:2d} PASS  {title}: {out.detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
