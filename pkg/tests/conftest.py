"""Shared fixtures: small deterministic scenes and models.

Also collects the outcome of every test marked ``acceptance(n, label)``
and prints a one-line verdict per criterion at the end of the run.
"""

import numpy as np
import pytest

from seco.pairs import BoundingBox

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(n, label): numbered end-to-end acceptance check",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    n, label = marker.args
    if report.when == "call":
        _ACCEPTANCE[n] = ("PASS" if report.passed else "FAIL", label)
    elif report.when == "setup" and not report.passed:
        _ACCEPTANCE[n] = ("FAIL", label)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        verdict, label = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} [{verdict}] {label}")


@pytest.fixture
def tiny_scene():
    """A 64x80 image with two bright rectangles on a dark gradient."""
    rng = np.random.default_rng(7)
    img = (rng.uniform(20, 60, size=(64, 80, 3))).astype(np.uint8)
    gt = [BoundingBox(10, 8, 12, 10), BoundingBox(50, 40, 14, 12)]
    for b in gt:
        img[b.y : b.y + b.h, b.x : b.x + b.w] = [220, 40, 40]
    return img, gt


@pytest.fixture(scope="session")
def tiny_model():
    from seco.model import init_model

    return init_model(arch="tiny", h=16, k=8, seed=0, context_size=32, target_size=16)
