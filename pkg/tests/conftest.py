"""Shared fixtures: the two reference instances, built once per session."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from enoc.config import build_setup, load_config

CONFIG_DIR = Path(__file__).parent.parent / "configs"


def load_raw(name: str) -> dict:
    return load_config(CONFIG_DIR / name)


@pytest.fixture(scope="session")
def scalar_lq_setup():
    return build_setup(load_raw("scalar_lq.toml"))


@pytest.fixture(scope="session")
def s6_setup():
    return build_setup(load_raw("s6_toy.toml"))
