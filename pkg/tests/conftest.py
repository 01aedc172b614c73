import os

from hypothesis import HealthCheck, settings

# compiled kernels make the first example slow; cap examples to keep the suite short
settings.register_profile(
    "lab",
    deadline=None,
    max_examples=int(os.environ.get("TRAPLAB_HYPOTHESIS_EXAMPLES", "40")),
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("lab")

# acceptance criteria append (number, title, passed, detail) here
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title}: {detail}")
