"""
Cogp Module

Reader and writers of COGP point-cloud files.

Text form (version 1), UTF-8, one record per line::

    COGP 1 <n> <d_g> <d_s>
    x y z g_1 ... g_dg s_1 ... s_ds      (n rows)

Floats are written with their shortest round-trip representation, so text files read back bit-exactly.

Binary form (version 2): the 4 bytes ``COGP``, four little-endian uint32 ``2, n, d_g, d_s``, then ``n`` rows of
``3 + d_g + d_s`` little-endian float32. Feature rows are re-normalized on read since float32 loses the unit norm.
"""

import math
import re
import struct
from pathlib import Path
from typing import Union

import numpy as np

from modules.CustomExceptions import DimensionMismatch, ParseError, RegistrationError
from modules.core.PointCloud import PointCloud, unit_rows

MAGIC = 'COGP'
TEXT_VERSION = 1
BINARY_VERSION = 2
BINARY_HEADER = struct.Struct('<IIII')

_TOKEN = re.compile(r'\S+')


def _format(value: float) -> str:
    return repr(float(value))


def _matrix(cloud: PointCloud) -> np.ndarray:
    blocks = [cloud.points]
    for features in (cloud.geom_features, cloud.sem_features):
        if features is not None:
            blocks.append(features)
    return np.hstack(blocks)


def _cloud(values: np.ndarray, d_g: int, d_s: int, renormalize: bool, where: str) -> PointCloud:
    geom = values[:, 3:3 + d_g] if d_g else None
    sem = values[:, 3 + d_g:] if d_s else None
    if renormalize:
        geom = None if geom is None else unit_rows(geom)
        sem = None if sem is None else unit_rows(sem)
    try:
        return PointCloud(values[:, :3], geom, sem)
    except (RegistrationError, ValueError) as e:
        raise ParseError(f"{where}: {e}") from e


def write_cogp(cloud: PointCloud) -> bytes:
    """Serializes ``cloud`` as a text COGP file."""
    lines = [f"{MAGIC} {TEXT_VERSION} {cloud.n} {cloud.d_g} {cloud.d_s}"]
    lines.extend(' '.join(_format(value) for value in row) for row in _matrix(cloud))
    return ('\n'.join(lines) + '\n').encode('utf-8')


def write_cogp_binary(cloud: PointCloud) -> bytes:
    """Serializes ``cloud`` as a binary (version 2) COGP file."""
    header = MAGIC.encode('ascii') + BINARY_HEADER.pack(BINARY_VERSION, cloud.n, cloud.d_g, cloud.d_s)
    return header + _matrix(cloud).astype('<f4').tobytes()


def _header_int(token: str, line: int, column: int, name: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"{name} must be an integer, got {token!r}", line, column) from None
    if value < 0:
        raise ParseError(f"{name} must be >= 0, got {value}", line, column)
    return value


def _read_text(text: str, renormalize: bool) -> PointCloud:
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    if not lines:
        raise ParseError("empty file", 1, 1)

    header = [(match.group(), match.start() + 1) for match in _TOKEN.finditer(lines[0])]
    if not header or header[0][0] != MAGIC:
        raise ParseError(f"expected magic {MAGIC!r}", 1, 1)
    if len(header) != 5:
        raise ParseError(f"header needs 5 fields ({MAGIC} version n d_g d_s), got {len(header)}", 1)
    if header[1][0] != str(TEXT_VERSION):
        raise ParseError(f"unsupported text version {header[1][0]!r}", 1, header[1][1])
    n, d_g, d_s = (_header_int(token, 1, column, name)
                   for (token, column), name in zip(header[2:], ('n', 'd_g', 'd_s')))

    rows = lines[1:]
    if len(rows) != n:
        line = n + 2 if len(rows) > n else len(lines) + 1
        raise ParseError(f"header announces {n} rows, found {len(rows)}", line)

    width = 3 + d_g + d_s
    values = np.empty((n, width))
    for index, row in enumerate(rows):
        line = index + 2
        tokens = [(match.group(), match.start() + 1) for match in _TOKEN.finditer(row)]
        if len(tokens) != width:
            raise DimensionMismatch(f"row {index + 1} has {len(tokens)} values, header requires {width}",
                                    row=index + 1, line=line)
        for position, (token, column) in enumerate(tokens):
            try:
                value = float(token)
            except ValueError:
                raise ParseError(f"not a number: {token!r}", line, column) from None
            if not math.isfinite(value):
                raise ParseError(f"non-finite value {token!r}", line, column)
            values[index, position] = value

    return _cloud(values, d_g, d_s, renormalize, "text COGP")


def _read_binary(data: bytes) -> PointCloud:
    if len(data) < 4 + BINARY_HEADER.size:
        raise ParseError("truncated binary header")
    version, n, d_g, d_s = BINARY_HEADER.unpack_from(data, 4)
    if version != BINARY_VERSION:
        raise ParseError(f"unsupported binary version {version}")
    width = 3 + d_g + d_s
    body = data[4 + BINARY_HEADER.size:]
    if len(body) != 4 * n * width:
        raise ParseError(f"binary body holds {len(body)} bytes, header requires {4 * n * width}")
    values = np.frombuffer(body, dtype='<f4').astype(np.float64).reshape(n, width)
    bad = np.flatnonzero(~np.all(np.isfinite(values), axis=1))
    if bad.size:
        raise ParseError(f"non-finite value in row {int(bad[0]) + 1}")
    return _cloud(values, d_g, d_s, True, "binary COGP")


def read_cogp(data: Union[bytes, str], renormalize: bool = False) -> PointCloud:
    """
    Parses a text or binary COGP file.

    :param data: File content.
    :param renormalize: Re-normalize feature rows of text files (binary files always are).
    :raises ParseError: Malformed content, located by line and column for text files.
    :raises DimensionMismatch: A text row whose length disagrees with the header.
    """
    if isinstance(data, str):
        return _read_text(data, renormalize)
    if data[:4] == MAGIC.encode('ascii') and data[4:5] != b' ':
        return _read_binary(data)
    try:
        text = data.decode('utf-8')
    except UnicodeDecodeError as e:
        raise ParseError(f"not UTF-8 text: {e}") from e
    return _read_text(text, renormalize)


def load_cogp(path: Union[str, Path], renormalize: bool = False) -> PointCloud:
    """Reads a COGP file from disk. ``OSError`` is left to the caller."""
    return read_cogp(Path(path).read_bytes(), renormalize=renormalize)


def save_cogp(path: Union[str, Path], cloud: PointCloud, binary: bool = False) -> None:
    Path(path).write_bytes(write_cogp_binary(cloud) if binary else write_cogp(cloud))
