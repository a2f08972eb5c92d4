import json
import os

import hypothesis
import numpy as np
import pytest

from tdsrobust.sysmodel import PerturbationStructure, SectorKind, TdsSystem, sector_preset

hypothesis.settings.register_profile("default", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=100, deadline=None)
hypothesis.settings.register_profile("debugger", max_examples=10, deadline=None, report_multiple_bugs=False)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EXAMPLE_A0 = [[0.0, 1.0], [-1.0, -2.0]]
EXAMPLE_A1 = [[0.0, 0.0], [-1.0, 1.0]]


@pytest.fixture
def example_system():
    return TdsSystem(EXAMPLE_A0, EXAMPLE_A1, 1.0)


@pytest.fixture
def unstructured():
    eye = np.eye(2)
    return PerturbationStructure(eye, eye, eye)


@pytest.fixture
def second_component():
    """Perturbations that only act on the second state."""
    eye = np.eye(2)
    return PerturbationStructure([0.0, 1.0], eye, eye)


@pytest.fixture
def delay_free_scalar():
    """x' = -x with a norm bounded perturbation of the current state only."""
    system = TdsSystem([[-1.0]], [[0.0]], 1.0)
    ps = PerturbationStructure([[1.0]], np.zeros((0, 1)), [[1.0]])
    return system, ps


@pytest.fixture
def pure_delay():
    """x'(t) = -x(t - 1)."""
    return TdsSystem([[0.0]], [[-1.0]], 1.0)


@pytest.fixture
def example_sector():
    def make(gamma):
        return sector_preset(SectorKind.I_A, {"gamma": gamma}, 4, 2)

    return make


@pytest.fixture
def write_config(tmp_path):
    def write(conf, name="problem.json"):
        path = tmp_path / name
        path.write_text(json.dumps(conf))
        return str(path)

    return write


@pytest.fixture
def example_config():
    def make(**sections):
        conf = {
            "system": {"a0": EXAMPLE_A0, "a1": EXAMPLE_A1, "h": 1.0},
            "structure": {"b": np.eye(2).tolist(), "c0": np.eye(2).tolist(), "c1": np.eye(2).tolist()},
        }
        conf.update(sections)
        return conf

    return make
