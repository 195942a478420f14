"""Shared pytest hooks: collect acceptance lines and echo them at the end."""

ACCEPTANCE_LINES = []


def acceptance_line(text):
    ACCEPTANCE_LINES.append(text)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
