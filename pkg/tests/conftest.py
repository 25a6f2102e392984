"""Shared fixtures: small synthetic grids and the shipped example scene."""

from __future__ import annotations

import os
import sys

import numpy as np
import pytest

from quadriclens import SyntheticSpec, generate_synthetic_volume

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SHIPPED_SCENE = os.path.join(REPO_ROOT, "scenes", "shell.qscene")
SHIPPED_VOLUME = os.path.join(REPO_ROOT, "scenes", "shell.qvol")


def _ensure_shipped_volume():
    """The scene file is committed; its 2 MB volume is regenerated on demand."""
    if not os.path.exists(SHIPPED_VOLUME):
        from quadriclens import save_qvol

        grid = generate_synthetic_volume(
            SyntheticSpec(
                kind="sphere_shell",
                center=(0.5, 0.5, 0.5),
                radius=0.3,
                width=0.05,
                amplitude=1.0,
                background=0.0,
            ),
            (128, 128, 128),
        )
        save_qvol(grid, SHIPPED_VOLUME, dtype="u8")
    return SHIPPED_VOLUME


@pytest.fixture(scope="session")
def shipped_scene_path():
    _ensure_shipped_volume()
    return SHIPPED_SCENE


@pytest.fixture(scope="session")
def shell_grid():
    """64-cubed Gaussian shell, the workhorse non-trivial field."""
    return generate_synthetic_volume(
        SyntheticSpec(
            kind="sphere_shell",
            center=(0.5, 0.5, 0.5),
            radius=0.3,
            width=0.05,
            amplitude=1.0,
            background=0.0,
        ),
        (64, 64, 64),
    )


@pytest.fixture(scope="session")
def linear_x_grid():
    return generate_synthetic_volume(SyntheticSpec(kind="axis_linear", axis="x"), (32, 32, 32))


@pytest.fixture(scope="session")
def constant_grid():
    return generate_synthetic_volume(SyntheticSpec(kind="constant", value=0.5), (16, 16, 16))


@pytest.fixture()
def rng():
    return np.random.default_rng(20260816)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance verdict lines after the run (prints are captured
    per-test and would otherwise only surface on failures)."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICT_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
