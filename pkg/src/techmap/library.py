"""Primitive library persistence.

A library directory holds one semantics JSON per primitive, optional
template descriptor files declaring pin roles, and a manifest listing
members. The package ships a default corpus (LUT2/LUT4/LUT6, a carry
cell, an 8x8 multiplier) generated by the importer from the reference
Verilog models under data/models.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicatePrimitive, ParseError, ValidationError
from .verilog import PrimitiveSemantics, semantics_from_dict, semantics_to_json

MANIFEST = "manifest.json"


@dataclass(frozen=True)
class Library:
    primitives: dict  # name -> PrimitiveSemantics
    descriptors: dict = field(default_factory=dict)  # name -> roles dict
    # Relative file names, preserved so save_library round-trips bytes.
    layout: tuple = ()

    def __post_init__(self):
        for name, roles in self.descriptors.items():
            sem = self.primitives.get(name)
            if sem is None:
                raise ValidationError(f"descriptor for unknown primitive '{name}'")
            ports = set(sem.input_widths) | set(sem.output_widths)
            named = []
            for role, value in roles.items():
                named.extend(value if isinstance(value, list) else [value])
            for port in named:
                if port not in ports:
                    raise ValidationError(
                        f"descriptor for '{name}' references missing port '{port}'"
                    )


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}")


def load_library(path):
    """Load a library directory via its manifest."""
    root = Path(path)
    manifest = _read_json(root / MANIFEST)
    entries = manifest.get("primitives")
    if not isinstance(entries, list):
        raise ParseError("manifest needs a 'primitives' array", str(root / MANIFEST))
    primitives = {}
    descriptors = {}
    layout = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "semantics" not in entry:
            raise ParseError(f"primitives[{i}] needs a 'semantics' file", str(root / MANIFEST))
        sem_file = entry["semantics"]
        sem = semantics_from_dict(_read_json(root / sem_file), where=sem_file)
        if sem.name in primitives:
            raise DuplicatePrimitive(sem.name)
        primitives[sem.name] = sem
        desc_file = entry.get("descriptor")
        if desc_file is not None:
            desc = _read_json(root / desc_file)
            if desc.get("primitive") != sem.name:
                raise ValidationError(
                    f"descriptor {desc_file} names '{desc.get('primitive')}', not '{sem.name}'"
                )
            roles = desc.get("roles")
            if not isinstance(roles, dict):
                raise ParseError("descriptor needs a 'roles' object", desc_file)
            descriptors[sem.name] = roles
        layout.append((sem.name, sem_file, desc_file))
    return Library(primitives, descriptors, tuple(layout))


def _descriptor_json(name, roles):
    return json.dumps({"primitive": name, "roles": roles}, indent=2) + "\n"


def save_library(library, path):
    """Write a library directory; the inverse of load_library, byte-stably."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    layout = library.layout
    if not layout:
        layout = tuple(
            (
                name,
                f"{name.lower()}.json",
                f"{name.lower()}.desc.json" if name in library.descriptors else None,
            )
            for name in sorted(library.primitives)
        )
    entries = []
    for name, sem_file, desc_file in layout:
        with open(root / sem_file, "w", encoding="utf-8") as fh:
            fh.write(semantics_to_json(library.primitives[name]))
        entry = {"semantics": sem_file}
        if desc_file is not None:
            with open(root / desc_file, "w", encoding="utf-8") as fh:
                fh.write(_descriptor_json(name, library.descriptors[name]))
            entry["descriptor"] = desc_file
        entries.append(entry)
    with open(root / MANIFEST, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"primitives": entries}, indent=2) + "\n")


def data_path(*parts):
    """Path to packaged data (models, default library, sample designs)."""
    return Path(str(importlib.resources.files("techmap"))) / "data" / Path(*parts)


def default_library():
    return load_library(data_path("library"))
