"""Python bindings for the grid-world simulator and its behavioural audit."""

import json

from . import _core
from ._core import MODALITIES, WorldError, preset_names, prefix_edit_fraction, scenario_names

__all__ = [
    "MODALITIES",
    "WorldError",
    "audit",
    "detect",
    "evolve",
    "governor_preset",
    "named_scenario",
    "prefix_edit_fraction",
    "preset_names",
    "replay",
    "run",
    "scenario_names",
]


def _text(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def named_scenario(name):
    return json.loads(_core.named_scenario(name))


def governor_preset(name):
    return json.loads(_core.governor_preset(name))


def run(scenario, governor="off", seed=1):
    """Run one episode. Returns (trace_csv, aux_csv)."""
    return _core.run(_text(scenario), _text(governor), seed)


def detect(csv, aux="", modality="all", scenario=None, seed=1):
    """Detector reports as a list of dicts. A scenario enables the paired baseline."""
    s = None if scenario is None else _text(scenario)
    return json.loads(_core.detect(csv, aux, modality, s, seed))


def audit(csv, aux, scenario):
    return json.loads(_core.audit(csv, aux, _text(scenario)))


def replay(csv, scenario, seed=1, governor="off"):
    return _core.replay(csv, _text(scenario), seed, _text(governor))


def evolve(config=None, bank_dir="", random=False, threads=0):
    return json.loads(_core.evolve(_text(config or {}), bank_dir, random, threads))
