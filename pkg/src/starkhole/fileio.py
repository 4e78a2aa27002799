"""Profile files and run manifests.

A profile file is plain text: ``# key: value`` metadata lines, a column
header, then ``frequency offset (MHz), signal`` rows written with 17
significant digits so that values survive a write/read cycle bit for bit::

    # starkhole-profile: 1
    # medium: crystal
    # field_v_per_cm: 2000
    # scan_tag: during
    freq_offset_mhz,signal
    -600,0.0021739130434782609
    ...

Run manifests are JSON documents validated against ``MANIFEST_SCHEMA``.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import DomainError
from .fitting import HoleProfile, normalize_polarity

__all__ = [
    "FORMAT_TAG",
    "COLUMNS",
    "MANIFEST_SCHEMA",
    "format_number",
    "format_profile",
    "write_profile",
    "parse_profile",
    "read_profile",
    "read_sweep_dir",
    "make_manifest",
    "validate_manifest",
    "write_manifest",
]

FORMAT_TAG = "starkhole-profile"
COLUMNS = "freq_offset_mhz,signal"

# Keys that the reader maps onto HoleProfile attributes.
_PROFILE_KEYS = ("field_v_per_cm", "scan_tag", "noise_sigma")
_RESERVED_KEYS = (FORMAT_TAG, "polarity") + _PROFILE_KEYS


def format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return format(value, ".17g")


def _parse_value(text):
    text = text.strip()
    if text in ("true", "false"):
        return text == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def format_profile(profile: HoleProfile, metadata=None) -> str:
    merged = dict(profile.metadata)
    if metadata:
        merged.update(metadata)
    meta = {FORMAT_TAG: 1}
    for key, value in merged.items():
        if key not in _RESERVED_KEYS:
            meta[key] = value
    # Stored signals are already normalized to positive depth.
    meta["polarity"] = "depth"
    meta["field_v_per_cm"] = profile.field
    meta["scan_tag"] = profile.scan_tag
    if profile.noise_sigma is not None:
        meta["noise_sigma"] = profile.noise_sigma
    lines = []
    for key, value in meta.items():
        if isinstance(value, str):
            text = value
        elif value is None:
            continue
        else:
            text = format_number(value)
        lines.append(f"# {key}: {text}")
    lines.append(COLUMNS)
    for nu, s in zip(profile.freq_offsets, profile.signal):
        lines.append(f"{format(float(nu), '.17g')},{format(float(s), '.17g')}")
    return "\n".join(lines) + "\n"


def write_profile(path, profile: HoleProfile, metadata=None) -> Path:
    path = Path(path)
    path.write_text(format_profile(profile, metadata))
    return path


def parse_profile(text: str, source="<string>") -> HoleProfile:
    """Parse profile text; the signal is flipped to positive hole depth if needed.

    ``polarity: depth`` (as written by this package) and ``transmission``
    are taken as is, ``absorption`` is negated; without the key the sign
    is inferred from the dominant excursion.
    """
    meta = {}
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if not sep:
                continue
            meta[key.strip()] = _parse_value(value)
            continue
        if not header_seen and not line[0].isdigit() and line[0] not in "+-.":
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DomainError(f"{source}:{lineno}: expected two comma-separated columns")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise DomainError(f"{source}:{lineno}: {exc}") from None
    if not rows:
        raise DomainError(f"{source}: no data rows")
    data = np.array(rows)
    signal = data[:, 1]
    polarity = meta.get("polarity")
    if polarity == "absorption":
        signal = -signal
    elif polarity not in ("depth", "transmission"):
        signal = normalize_polarity(signal)
    extra = {k: v for k, v in meta.items() if k not in _PROFILE_KEYS}
    return HoleProfile(
        freq_offsets=data[:, 0],
        signal=signal,
        noise_sigma=meta.get("noise_sigma"),
        field=float(meta.get("field_v_per_cm", 0.0)),
        scan_tag=str(meta.get("scan_tag", "during")),
        metadata=extra,
    )


def read_profile(path) -> HoleProfile:
    path = Path(path)
    return parse_profile(path.read_text(), source=str(path))


def read_sweep_dir(directory):
    """Load every ``*.csv`` profile in ``directory`` ordered by (step, scan tag).

    Returns ``(records, paths)`` where records are ``(applied field, profile)``
    pairs suitable for :class:`~starkhole.fitting.FieldSweep`.
    """
    from .fitting import SCAN_TAGS

    directory = Path(directory)
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise DomainError(f"no profile files (*.csv) in {directory}")
    loaded = []
    for p in paths:
        prof = read_profile(p)
        step = prof.metadata.get("step", len(loaded))
        applied = prof.metadata.get("applied_field_v_per_cm", prof.field)
        loaded.append((int(step), SCAN_TAGS.index(prof.scan_tag), float(applied), prof, p))
    loaded.sort(key=lambda t: (t[0], t[1]))
    return [(E, prof) for _, _, E, prof, _ in loaded], [p for *_, p in loaded]


MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["tool", "version", "command", "inputs", "seeds", "parameters", "results", "failures"],
    "properties": {
        "tool": {"const": "starkhole"},
        "version": {"type": "string"},
        "command": {"type": "string"},
        "inputs": {"type": "array", "items": {"type": "string"}},
        "seeds": {"type": "array", "items": {"type": "integer"}},
        "parameters": {"type": "object"},
        "results": {"type": ["array", "object"]},
        "failures": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["input", "error"],
                "properties": {"input": {"type": "string"}, "error": {"type": "string"}},
            },
        },
        "summary": {"type": "object"},
    },
    "additionalProperties": False,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def make_manifest(command, inputs=(), seeds=(), parameters=None, results=None, failures=(), summary=None):
    doc = {
        "tool": "starkhole",
        "version": __version__,
        "command": command,
        "inputs": [str(p) for p in inputs],
        "seeds": sorted({int(s) for s in seeds}),
        "parameters": _jsonable(parameters or {}),
        "results": _jsonable(results if results is not None else []),
        "failures": _jsonable(list(failures)),
    }
    if summary is not None:
        doc["summary"] = _jsonable(summary)
    validate_manifest(doc)
    return doc


def validate_manifest(doc):
    jsonschema.validate(doc, MANIFEST_SCHEMA)


def write_manifest(path, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path
