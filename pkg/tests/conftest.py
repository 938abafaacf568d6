import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        title, ok, detail, elapsed, limit = mod.RESULTS[num]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"criterion {num:2d} {verdict}: {title} | {detail} | {elapsed:.1f}s (limit {limit}s)"
        )
