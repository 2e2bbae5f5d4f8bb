import sys

import pytest

from beanscope.dataset import snapshot_beans
from beanscope.store import load_profiles
from beanscope.synth import render_dataset

DATASET_SEED = 7


@pytest.fixture(scope="session")
def profiles():
    return load_profiles()


@pytest.fixture(scope="session")
def site1_beans(profiles):
    """300 qualified + 300 defective site-1 beans, recovered by segmentation."""
    sites, defects = profiles
    snaps = render_dataset([sites["default1"]], defects["default"], {"site1": (300, 300)},
                           DATASET_SEED)
    return snapshot_beans(snaps)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, name, detail = results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  AC{number:<2} {name}: {detail}")
