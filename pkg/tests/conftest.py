import os
import sys

# single-threaded BLAS keeps float reductions in a fixed order
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

sys.path.insert(0, os.path.dirname(__file__))

from attrval.types import AVPair  # noqa: E402

HEADPHONE_WORDS = ["boat", "rockerz", "255", "pro", "raging", "red", "bluetooth", "neckband"]


def headphone_labeled():
    return [AVPair("brand", (0,)), AVPair("model name", (1, 2, 3)), AVPair("color", (4, 5))]


def headphone_full():
    return headphone_labeled() + [AVPair("connectivity", (6,)), AVPair("headphone type", (7,))]


# one line per acceptance criterion, printed after the run whatever the outcome
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
