import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(acceptance_log.LABELS):
        label = acceptance_log.LABELS[criterion]
        if criterion in acceptance_log.RESULTS:
            verdict = "PASS" if acceptance_log.RESULTS[criterion] else "FAIL"
        else:
            verdict = "NOT RUN"
        terminalreporter.write_line(f"criterion {criterion} ({label}): {verdict}")
