import logging

import numpy as np
import pytest

from latticeqc.harness import build_mesh, build_model, load_config, resolve_bcs

logging.getLogger("latticeqc").setLevel(logging.ERROR)

STATIC_PRESETS = ("square-stretch-iss", "tri-tension-fs-24", "tri-bending-fs-24")
FRACTURE_PRESETS = ("three-point-bending-iss", "notched-tension-iss")

# acceptance id -> (ok, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


class Case:
    def __init__(self, name):
        self.name = name
        self.config = load_config(name)
        self.model, self.tips = build_model(self.config)
        self.mesh = build_mesh(self.config, self.model)
        self.fixed, self.loaded = resolve_bcs(self.config, self.model)

    @property
    def bcs(self):
        return self.fixed + ([self.loaded] if self.loaded is not None else [])


_CASES = {}


def get_case(name) -> Case:
    if name not in _CASES:
        _CASES[name] = Case(name)
    return _CASES[name]


@pytest.fixture(params=STATIC_PRESETS)
def static_case(request):
    return get_case(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
