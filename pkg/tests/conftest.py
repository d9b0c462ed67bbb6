import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stochseize.evaluation import EvalConfig, WindowedDataset, make_folds  # noqa: E402
from stochseize.presets import TRIPLE_EVAL, preset_config  # noqa: E402
from stochseize.signal_io import synthesize_recording  # noqa: E402


@pytest.fixture(scope="session")
def planted_rec():
    return synthesize_recording(preset_config("planted"), seed=1)


@pytest.fixture(scope="session")
def planted_data(planted_rec):
    return WindowedDataset(planted_rec, EvalConfig())


@pytest.fixture(scope="session")
def planted_plan(planted_data):
    return make_folds(planted_data.windows, 5, seed=0)


@pytest.fixture(scope="session")
def triple_data():
    return WindowedDataset(synthesize_recording(preset_config("triple"), seed=0), TRIPLE_EVAL)


# --- acceptance reporting ----------------------------------------------------

_ACCEPTANCE_LINES: list = []


@pytest.fixture
def criterion():
    """Run one acceptance check, enforce its runtime limit and print a PASS/FAIL line.

    ``check`` returns a short string of measured values for the report line.
    """
    import time

    def run(number, title, check, limit_s=None):
        t0 = time.perf_counter()
        try:
            detail = check()
            elapsed = time.perf_counter() - t0
            if limit_s is not None and elapsed > limit_s:
                raise AssertionError(f"runtime {elapsed:.1f}s exceeds {limit_s}s")
            ok = True
        except AssertionError as exc:
            elapsed = time.perf_counter() - t0
            ok, detail = False, str(exc).splitlines()[0] if str(exc) else "assertion failed"
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({elapsed:.2f}s) {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        if not ok:
            pytest.fail(line, pytrace=False)

    return run


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
