"""Command reports in JSON and text form."""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import logging
import math
import os

import numpy as np
import voluptuous as vol

from .const import (
    EXIT_ASSUMPTIONS,
    EXIT_DENIED,
    EXIT_INCONCLUSIVE,
    EXIT_INPUT,
    EXIT_OK,
    REPORT_FILE,
    REPORT_TEXT_FILE,
    SCHEMA_VERSION,
)

_LOGGER = logging.getLogger(__name__)

NUMBER = vol.Any(int, float, vol.In(["inf", "-inf", "nan"]))

ASSUMPTION_SCHEMA = vol.Schema({
    vol.Required("name"): str,
    vol.Required("passed"): bool,
    vol.Required("detail"): str,
})

CERTIFICATE_SCHEMA = vol.Schema({
    vol.Required("kind"): str,
    vol.Required("value"): NUMBER,
    vol.Required("critical_omega"): NUMBER,
    vol.Required("margin"): NUMBER,
    vol.Required("assumptions"): [ASSUMPTION_SCHEMA],
    vol.Required("tail_cutoff"): NUMBER,
    vol.Required("outcome"): str,
    vol.Required("flags"): [str],
})

REPORT_SCHEMA = vol.Schema({
    vol.Required("schema_version"): SCHEMA_VERSION,
    vol.Required("command"): str,
    vol.Required("exit_code"): vol.In([EXIT_OK, EXIT_DENIED, EXIT_ASSUMPTIONS, EXIT_INPUT, EXIT_INCONCLUSIVE]),
    vol.Required("outcome"): str,
    vol.Required("certificates"): [CERTIFICATE_SCHEMA],
    vol.Required("assumptions"): [ASSUMPTION_SCHEMA],
    vol.Required("are"): vol.Any(None, dict),
    vol.Required("verification"): dict,
    vol.Required("values"): dict,
    vol.Required("files"): [str],
})


def jsonable(value):
    """Plain JSON types; non-finite floats become "inf", "-inf" or "nan"."""
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, complex):
        return [jsonable(value.real), jsonable(value.imag)]
    if hasattr(value, "as_dict"):
        return jsonable(value.as_dict())
    return value


@dataclass
class Report:
    command: str
    exit_code: int = EXIT_OK
    outcome: str = "computed"
    certificates: list = field(default_factory=list)
    assumptions: list = field(default_factory=list)
    are: dict | None = None
    verification: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def as_dict(self):
        doc = jsonable({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "exit_code": self.exit_code,
            "outcome": self.outcome,
            "certificates": self.certificates,
            "assumptions": self.assumptions,
            "are": self.are,
            "verification": self.verification,
            "values": self.values,
            "files": self.files,
        })
        return REPORT_SCHEMA(doc)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def to_text(self) -> str:
        lines = []
        _render(self.as_dict(), "", lines)
        return "\n".join(lines) + "\n"

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, REPORT_FILE), "w") as f:
            f.write(self.to_json())
        with open(os.path.join(out_dir, REPORT_TEXT_FILE), "w") as f:
            f.write(self.to_text())
        _LOGGER.debug("Report written to %s", out_dir)


def _render(value, indent, lines, key=None):
    prefix = f"{indent}{key}:" if key is not None else indent.rstrip() or ""
    if isinstance(value, dict):
        if key is not None:
            lines.append(prefix)
            indent += "  "
        for name, item in value.items():
            _render(item, indent, lines, name)
    elif isinstance(value, list) and any(isinstance(item, (dict, list)) for item in value):
        lines.append(prefix)
        for i, item in enumerate(value):
            _render(item, indent + "  ", lines, f"[{i}]")
    else:
        lines.append(f"{prefix} {_scalar(value)}")


def _scalar(value):
    if isinstance(value, list):
        return "[" + ", ".join(_scalar(item) for item in value) + "]"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "null"
    return str(value)
