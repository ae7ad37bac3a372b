"""Trace file ingestion: Touchstone v1 two-port files and a plain CSV format.

Both parsers operate on bytes, never raise anything but TraceParseError for
bad input, and attach the offending 1-based line number to every failure.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import TraceParseError
from .notch import S21Trace, TraceMeta

__all__ = ["parse_touchstone", "parse_csv_trace", "write_csv_trace"]

_UNIT_SCALE = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
_FORMATS = ("RI", "MA", "DB")

CSV_HEADER_RI = "freq_hz,re,im"
CSV_HEADER_DB = "freq_hz,mag_db,phase_deg"


def _decode(data: bytes) -> list[str]:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TraceParseError(f"not valid UTF-8: {exc.reason}", line=1) from None
    return text.splitlines()


def _to_float(cell: str, line: int, what: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise TraceParseError(f"non-numeric {what}: {cell!r}", line=line) from None
    if not math.isfinite(value):
        raise TraceParseError(f"non-finite {what}: {cell!r}", line=line)
    return value


def _build_trace(freqs: list[float], values: list[complex], line: int,
                 label: str) -> S21Trace:
    if len(freqs) < 2:
        raise TraceParseError("trace needs at least two data points", line=line)
    try:
        return S21Trace(freqs=np.array(freqs), values=np.array(values),
                        meta=TraceMeta(label=label))
    except Exception as exc:  # trace invariants -> structured parse error
        raise TraceParseError(str(exc), line=line) from None


def parse_touchstone(data: bytes, label: str = "") -> S21Trace:
    """Parse Touchstone v1 two-port bytes and extract the S21 column.

    Expects an option line "# <unit> S <format> R <z0>" with format RI, MA or
    DB, then rows of frequency plus eight values ordered S11, S21, S12, S22.
    Comment text after '!' is ignored.  The reference impedance is not used.
    """
    lines = _decode(data)
    unit_scale = None
    fmt = None
    freqs: list[float] = []
    values: list[complex] = []
    last_line = 1

    for lineno, raw in enumerate(lines, start=1):
        body = raw.split("!", 1)[0].strip()
        if not body:
            continue
        last_line = lineno
        if body.startswith("#"):
            if unit_scale is not None:
                raise TraceParseError("duplicate option line", line=lineno)
            if freqs:
                raise TraceParseError("option line after data", line=lineno)
            tokens = body[1:].split()
            if (len(tokens) != 5 or tokens[1].upper() != "S"
                    or tokens[3].upper() != "R"):
                raise TraceParseError(
                    'malformed option line, expected "# <unit> S <format> R <z0>"',
                    line=lineno)
            unit = tokens[0].upper()
            if unit not in _UNIT_SCALE:
                raise TraceParseError(f"unknown frequency unit {tokens[0]!r}",
                                      line=lineno)
            fmt = tokens[2].upper()
            if fmt not in _FORMATS:
                raise TraceParseError(f"unknown format {tokens[2]!r}, "
                                      f"expected one of {_FORMATS}", line=lineno)
            _to_float(tokens[4], lineno, "reference impedance")
            unit_scale = _UNIT_SCALE[unit]
            continue
        if unit_scale is None:
            raise TraceParseError("data before option line", line=lineno)
        cells = body.split()
        if len(cells) != 9:
            raise TraceParseError(
                f"expected 9 columns (freq + 4 S-parameter pairs), got {len(cells)}",
                line=lineno)
        nums = [_to_float(c, lineno, "value") for c in cells]
        freq = nums[0] * unit_scale
        if freqs and freq <= freqs[-1]:
            raise TraceParseError(
                f"non-monotone frequency {freq:.9g} Hz after {freqs[-1]:.9g} Hz",
                line=lineno)
        a, b = nums[3], nums[4]  # S21 pair
        if fmt == "RI":
            z = complex(a, b)
        elif fmt == "MA":
            z = a * complex(math.cos(math.radians(b)), math.sin(math.radians(b)))
        else:  # DB
            mag = 10.0 ** (a / 20.0)
            z = mag * complex(math.cos(math.radians(b)), math.sin(math.radians(b)))
        freqs.append(freq)
        values.append(z)

    if unit_scale is None:
        raise TraceParseError("missing option line", line=last_line)
    return _build_trace(freqs, values, last_line, label)


def parse_csv_trace(data: bytes, label: str = "") -> S21Trace:
    """Parse the CSV trace format.

    Header "freq_hz,re,im" (complex parts) or "freq_hz,mag_db,phase_deg"
    (20 log10 magnitude and degrees).  Points are sorted by frequency;
    duplicate frequencies are rejected with the offending line.
    """
    lines = _decode(data)
    header = None
    header_line = 1
    rows: list[tuple[float, complex, int]] = []

    for lineno, raw in enumerate(lines, start=1):
        body = raw.strip()
        if not body:
            continue
        if header is None:
            normalized = ",".join(c.strip().lower() for c in body.split(","))
            if normalized == CSV_HEADER_RI:
                header = "ri"
            elif normalized == CSV_HEADER_DB:
                header = "db"
            else:
                raise TraceParseError(
                    f'bad header {body!r}, expected "{CSV_HEADER_RI}" or '
                    f'"{CSV_HEADER_DB}"', line=lineno)
            header_line = lineno
            continue
        cells = body.split(",")
        if len(cells) != 3:
            raise TraceParseError(f"expected 3 columns, got {len(cells)}",
                                  line=lineno)
        freq = _to_float(cells[0], lineno, "frequency")
        x = _to_float(cells[1], lineno, "value")
        y = _to_float(cells[2], lineno, "value")
        if header == "ri":
            z = complex(x, y)
        else:
            z = 10.0 ** (x / 20.0) * complex(math.cos(math.radians(y)),
                                             math.sin(math.radians(y)))
        rows.append((freq, z, lineno))

    if header is None:
        raise TraceParseError("empty file, missing header", line=1)
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if cur[0] == prev[0]:
            raise TraceParseError(f"duplicate frequency {cur[0]:.9g} Hz",
                                  line=cur[2])
    return _build_trace([r[0] for r in rows], [r[1] for r in rows],
                        header_line, label)


def write_csv_trace(trace: S21Trace, variant: str = "ri") -> bytes:
    """Serialize a trace to the CSV format; round-trips with parse_csv_trace."""
    out = []
    if variant == "ri":
        out.append(CSV_HEADER_RI)
        for f, z in zip(trace.freqs, trace.values):
            out.append(f"{float(f)!r},{float(z.real)!r},{float(z.imag)!r}")
    elif variant == "db":
        out.append(CSV_HEADER_DB)
        for f, z in zip(trace.freqs, trace.values):
            mag = abs(z)
            db = 20.0 * math.log10(mag) if mag > 0.0 else -400.0
            deg = math.degrees(math.atan2(z.imag, z.real))
            out.append(f"{float(f)!r},{db!r},{deg!r}")
    else:
        raise ValueError('variant must be "ri" or "db"')
    return ("\n".join(out) + "\n").encode("utf-8")
