"""Shared fixtures and optional line-coverage collection.

Setting SHINE_LINECOV=<report.json> traces line execution of the installed
package during the run and writes a coverage summary on exit (used by the
acceptance suite; there is no third-party coverage tool in this
environment).
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import pytest
from hypothesis import settings

import shine
from shine.scenario.compiler import CompiledScenario, compile_scenario
from shine.scenario.parser import parse_scenario
from shine.storage.drivers import MemoryDriver

settings.register_profile("default", max_examples=50, deadline=None)
settings.register_profile("coverage", max_examples=10, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

PACKAGE_ROOT = Path(shine.__file__).resolve().parent
DEMO_SCENARIO_PATH = PACKAGE_ROOT / "scenarios" / "demo-apartment.scenario.json"

_collector = None


def pytest_configure(config):
    global _collector
    target = os.environ.get("SHINE_LINECOV")
    if target:
        from tests.linecov import LineCollector

        _collector = LineCollector(str(PACKAGE_ROOT), target)
        _collector.start()


def pytest_unconfigure(config):
    if _collector is not None:
        _collector.stop_and_write()


@pytest.fixture(scope="session")
def demo_text() -> bytes:
    return DEMO_SCENARIO_PATH.read_bytes()


@pytest.fixture(scope="session")
def demo_doc(demo_text) -> dict:
    return json.loads(demo_text)


@pytest.fixture(scope="session")
def demo_spec(demo_text):
    return parse_scenario(demo_text)


@pytest.fixture(scope="session")
def demo_compiled(demo_spec) -> CompiledScenario:
    return compile_scenario(demo_spec)


@pytest.fixture()
def storage() -> MemoryDriver:
    return MemoryDriver()
