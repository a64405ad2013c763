"""
DWMP model files.

Layout (little-endian):
    b'DWMP' | u16 version | u32 header length | header JSON (canonical,
    {"meta", "spec", "spec_hash"}) | u32 blob count | blobs

Each blob: u16 name length | name bytes | u8 rank | u32 dims[rank] | f32 data.
The spec hash is 64-bit FNV-1a over the spec's canonical JSON and is checked
on load.
"""

import json
import struct

import numpy as np

from core.exceptions import DataError, RasterFormatError
from netblocks.network import ModelParams, Network
from netblocks.specs import ModelSpec

MAGIC = b'DWMP'
VERSION = 1


def encode_model(params):
    spec = params.spec
    header = json.dumps(
        {'meta': params.meta, 'spec': spec.to_dict(), 'spec_hash': f"{spec.spec_hash():016x}"},
        sort_keys=True, separators=(',', ':'),
    ).encode('utf-8')
    chunks = [MAGIC, struct.pack('<HI', VERSION, len(header)), header,
              struct.pack('<I', len(params.tensors))]
    for name in sorted(params.tensors):
        tensor = np.ascontiguousarray(params.tensors[name], dtype='<f4')
        raw_name = name.encode('utf-8')
        chunks.append(struct.pack('<H', len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack('<B', tensor.ndim))
        chunks.append(struct.pack(f'<{tensor.ndim}I', *tensor.shape))
        chunks.append(tensor.tobytes())
    return b''.join(chunks)


class _Reader:
    def __init__(self, payload):
        self.payload = payload
        self.offset = 0

    def take(self, size, what):
        if self.offset + size > len(self.payload):
            raise RasterFormatError(f"truncated model file while reading {what}", self.offset)
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_model(payload):
    reader = _Reader(payload)
    if reader.take(4, 'magic') != MAGIC:
        raise RasterFormatError("bad magic, not a DWMP model file", 0)
    version, header_len = reader.unpack('<HI', 'header')
    if version != VERSION:
        raise RasterFormatError(f"unsupported model format version {version}", 4)
    header_at = reader.offset
    try:
        header = json.loads(reader.take(header_len, 'header JSON').decode('utf-8'))
        spec = ModelSpec.from_dict(header['spec'])
    except (ValueError, KeyError) as exc:
        raise RasterFormatError(f"unreadable model header: {exc}", header_at) from exc
    if f"{spec.spec_hash():016x}" != header.get('spec_hash'):
        raise RasterFormatError("spec hash mismatch, model header is corrupt", header_at)

    (count,) = reader.unpack('<I', 'blob count')
    tensors = {}
    for _ in range(count):
        (name_len,) = reader.unpack('<H', 'name length')
        name = reader.take(name_len, 'parameter name').decode('utf-8')
        (rank,) = reader.unpack('<B', 'rank')
        dims = reader.unpack(f'<{rank}I', 'dims')
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = reader.take(size * 4, f"data of '{name}'")
        tensors[name] = np.frombuffer(raw, dtype='<f4').reshape(dims).astype(np.float32)

    params = ModelParams(spec, tensors, dict(header.get('meta', {})))
    Network(spec).check_params(params)
    return params


def save_model(path, params):
    try:
        with open(path, 'wb') as handle:
            handle.write(encode_model(params))
    except OSError as exc:
        raise DataError(f"cannot write model {path}: {exc}") from exc


def load_model(path):
    try:
        with open(path, 'rb') as handle:
            payload = handle.read()
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    return decode_model(payload)
