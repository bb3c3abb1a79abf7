"""Spectrum CSV files and JSON fit reports.

Spectrum CSV layout (UTF-8)::

    # unit = displacement            required: displacement | shot-normalized
    # averages = 100                 required: positive integer
    # seed = 42                      optional
    # psd_units = m^2/Hz             informational
    # temperature_label = 293 K      optional, kept in metadata
    # <other key> = <value>          kept in metadata
    frequency_hz,psd
    398000.0,3.21e-29
    ...

Floats are written with ``repr`` (shortest round-trip form), so reading a
written file reproduces every value exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .synth import SpectrumRecord, Unit

HEADER = "frequency_hz,psd"
PSD_UNITS = {Unit.DISPLACEMENT: "m^2/Hz", Unit.SHOT_NORMALIZED: "1 (shot noise = 1)"}
_RESERVED = ("unit", "averages", "seed", "psd_units", "created")


class SpectrumFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MissingMetadataError(SpectrumFormatError):
    pass


def _format_meta_value(value) -> str:
    text = str(value)
    if "\n" in text or "\r" in text:
        raise ValueError("metadata values must be single-line")
    return text


def format_spectrum_csv(record: SpectrumRecord, created: str | None = None) -> str:
    lines = [f"# unit = {record.unit.value}", f"# averages = {record.averages}"]
    if record.seed is not None:
        lines.append(f"# seed = {record.seed}")
    lines.append(f"# psd_units = {PSD_UNITS[record.unit]}")
    for key in sorted(record.metadata):
        if key in _RESERVED:
            continue
        lines.append(f"# {key} = {_format_meta_value(record.metadata[key])}")
    if created is not None:
        lines.append(f"# created = {created}")
    lines.append(HEADER)
    lines.extend(f"{f!r},{p!r}" for f, p in zip(record.frequencies.tolist(), record.psd.tolist()))
    return "\n".join(lines) + "\n"


def write_spectrum_csv(record: SpectrumRecord, path, created: str | None = None) -> None:
    Path(path).write_text(format_spectrum_csv(record, created), encoding="utf-8")


def parse_spectrum_csv(text: str) -> SpectrumRecord:
    meta: dict[str, str] = {}
    freqs: list[float] = []
    psd: list[float] = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header_seen:
                raise SpectrumFormatError("metadata after the header row", lineno)
            key, sep, value = line[1:].partition("=")
            if not sep or not key.strip():
                raise SpectrumFormatError("metadata must read '# key = value'", lineno)
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line.replace(" ", "") != HEADER:
                raise SpectrumFormatError(f"expected header '{HEADER}'", lineno)
            header_seen = True
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise SpectrumFormatError("expected two comma-separated fields", lineno)
        try:
            freqs.append(float(fields[0]))
            psd.append(float(fields[1]))
        except ValueError:
            raise SpectrumFormatError(f"malformed row {line!r}", lineno) from None

    for key in ("unit", "averages"):
        if key not in meta:
            raise MissingMetadataError(f"missing metadata '# {key} = ...'")
    if not header_seen:
        raise SpectrumFormatError("missing header row")
    if not freqs:
        raise SpectrumFormatError("no data rows")
    try:
        unit = Unit(meta["unit"])
    except ValueError:
        raise SpectrumFormatError(f"unknown unit {meta['unit']!r}") from None
    try:
        averages = int(meta["averages"])
        seed = int(meta["seed"]) if "seed" in meta else None
    except ValueError as exc:
        raise SpectrumFormatError(f"bad integer metadata: {exc}") from None
    extra = {k: v for k, v in meta.items() if k not in _RESERVED}
    try:
        return SpectrumRecord(np.array(freqs), np.array(psd), unit, averages, seed, extra)
    except ValueError as exc:
        raise SpectrumFormatError(str(exc)) from None


def read_spectrum_csv(path) -> SpectrumRecord:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SpectrumFormatError(f"not UTF-8 text: {exc}") from None
    return parse_spectrum_csv(text)


REPORT_KEYS = (
    "schema", "spectrum", "unit", "params", "uncertainties", "chi2_per_dof", "iterations",
    "q_factor", "temperature", "inferred_squeezing_db", "converged", "message",
    "limitations", "created",
)


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"
