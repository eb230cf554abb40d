import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

# test_acceptance.py appends (number, title, passed, detail) here
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
