"""The single versioned defaults file, loaded once and echoed into reports."""

import copy
import json
from importlib import resources

_DEFAULTS = json.loads(resources.files(__package__).joinpath("defaults.json").read_text())
VERSION = _DEFAULTS["version"]


def get(section, key=None):
    block = _DEFAULTS[section]
    return copy.deepcopy(block if key is None else block[key])


def snapshot():
    """Full defaults (deep copy) for embedding in a report."""
    return copy.deepcopy(_DEFAULTS)
