import sys
from pathlib import Path

# helpers shared by the test modules (oracles, generators)
sys.path.insert(0, str(Path(__file__).parent))
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, printed after the run whatever the outcome
    from acceptance_log import LINES
    if not LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(LINES):
        terminalreporter.write_line(LINES[key])
