"""
Raster data model and file I/O.

DWRS layout (little-endian):
    b'DWRS' | u16 version | u32 width | u32 height | u8 channel count |
    channel tag bytes | f32 planes (one per channel, row-major)

Channel tags: B, G, R, N (near-infrared), E (red-edge), H (height above
ground, meters). Masks stored as DWRS use the single tag M.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from core.exceptions import DataError, RasterFormatError, ShapeError

MAGIC = b'DWRS'
VERSION = 1
CHANNEL_TAGS = ('B', 'G', 'R', 'N', 'E', 'H')
MASK_TAG = 'M'
RGB = ('R', 'G', 'B')

# refuse headers that would describe more than this many samples
MAX_SAMPLES = 1 << 31


@dataclass
class Raster:
    """Multi-channel image; data is C x H x W float32 in the order of channels."""

    data: np.ndarray
    channels: tuple

    def __post_init__(self):
        self.channels = tuple(self.channels)
        if self.data.ndim != 3:
            raise ShapeError(f"raster data must be C x H x W, got shape {self.data.shape}")
        if len(self.channels) != self.data.shape[0]:
            raise ShapeError(f"{len(self.channels)} channel tags for {self.data.shape[0]} planes")
        if len(set(self.channels)) != len(self.channels):
            raise DataError(f"duplicate channel tags {self.channels}")
        for tag in self.channels:
            if tag not in CHANNEL_TAGS and tag != MASK_TAG:
                raise DataError(f"unknown channel tag '{tag}'")
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    def has(self, tags):
        return all(tag in self.channels for tag in tags)

    def channel(self, tag):
        try:
            return self.data[self.channels.index(tag)]
        except ValueError:
            raise DataError(f"raster has no '{tag}' channel (channels: {''.join(self.channels)})") from None

    def select(self, tags):
        """New raster restricted to tags, in the order given."""
        tags = tuple(tags)
        missing = [tag for tag in tags if tag not in self.channels]
        if missing:
            raise DataError(f"raster lacks channels {missing} (has {''.join(self.channels)})")
        return Raster(np.stack([self.channel(tag) for tag in tags]), tags)

    def rgb(self):
        return self.select(RGB)


def parse_channel_set(text):
    """'RGBH' -> ('R', 'G', 'B', 'H'); validates tags and duplicates."""
    tags = tuple(text.strip().upper())
    if not tags:
        raise DataError("empty channel set")
    for tag in tags:
        if tag not in CHANNEL_TAGS:
            raise DataError(f"unknown channel '{tag}' in channel set '{text}'")
    if len(set(tags)) != len(tags):
        raise DataError(f"duplicate channel in channel set '{text}'")
    return tags


# --- DWRS ----------------------------------------------------------------------

def encode_raster(raster):
    tags = ''.join(raster.channels).encode('ascii')
    header = MAGIC + struct.pack('<HIIB', VERSION, raster.width, raster.height, len(tags)) + tags
    return header + raster.data.astype('<f4', copy=False).tobytes()


def decode_raster(payload):
    if len(payload) < 4 or payload[:4] != MAGIC:
        raise RasterFormatError("bad magic, not a DWRS raster", 0)
    fixed = struct.calcsize('<HIIB')
    if len(payload) < 4 + fixed:
        raise RasterFormatError("truncated DWRS header", len(payload))
    version, width, height, count = struct.unpack_from('<HIIB', payload, 4)
    if version != VERSION:
        raise RasterFormatError(f"unsupported DWRS version {version}", 4)
    offset = 4 + fixed
    if len(payload) < offset + count:
        raise RasterFormatError("truncated channel tag list", len(payload))
    try:
        tags = tuple(payload[offset:offset + count].decode('ascii'))
    except UnicodeDecodeError:
        raise RasterFormatError("channel tags are not ASCII", offset) from None
    offset += count
    samples = width * height * count
    if width == 0 or height == 0 or samples > MAX_SAMPLES:
        raise RasterFormatError(f"dimension overflow: {width}x{height}x{count}", 6)
    needed = offset + samples * 4
    if len(payload) < needed:
        raise RasterFormatError(
            f"truncated payload: need {needed} bytes, file has {len(payload)}", len(payload)
        )
    data = np.frombuffer(payload, dtype='<f4', count=samples, offset=offset)
    return Raster(data.reshape(count, height, width).astype(np.float32), tags)


def write_raster(path, raster):
    Path(path).write_bytes(encode_raster(raster))


def read_raster(path):
    """Read a DWRS raster, or import an 8-bit PNG as R,G,B in [0, 1]."""
    path = Path(path)
    if path.suffix.lower() == '.png':
        return read_png_rgb(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read raster {path}: {exc}") from exc
    return decode_raster(payload)


def _imread(path, flags):
    image = cv2.imread(str(path), flags)
    if image is None:
        raise DataError(f"cannot read image {path}")
    return image


def read_png_rgb(path):
    image = _imread(path, cv2.IMREAD_COLOR)             # H x W x BGR, uint8
    rgb = image[:, :, ::-1].transpose(2, 0, 1).astype(np.float32) / 255.0
    return Raster(rgb, RGB)


def to_uint8_bgr(raster):
    rgb = np.clip(raster.rgb().data, 0.0, 1.0)
    return np.ascontiguousarray((rgb[::-1].transpose(1, 2, 0) * 255.0 + 0.5).astype(np.uint8))


def write_png_rgb(path, raster):
    if not cv2.imwrite(str(path), to_uint8_bgr(raster)):
        raise DataError(f"cannot write image {path}")


# --- masks ---------------------------------------------------------------------

def read_mask(path):
    """Binary mask from a 1-channel PNG (nonzero = plant) or a DWRS 'M' raster."""
    path = Path(path)
    if path.suffix.lower() == '.png':
        return _imread(path, cv2.IMREAD_GRAYSCALE) > 0
    raster = read_raster(path)
    if raster.channels != (MASK_TAG,):
        raise DataError(f"{path} is not a mask raster (channels {''.join(raster.channels)})")
    return raster.data[0] > 0


def write_mask(path, mask):
    path = Path(path)
    mask = np.asarray(mask, dtype=bool)
    if path.suffix.lower() == '.png':
        if not cv2.imwrite(str(path), mask.astype(np.uint8) * 255):
            raise DataError(f"cannot write mask {path}")
        return
    write_raster(path, Raster(mask[None].astype(np.float32), (MASK_TAG,)))


def check_mask_matches(mask, raster):
    if mask.shape != (raster.height, raster.width):
        raise ShapeError(f"mask {mask.shape} does not match raster {raster.height}x{raster.width}")
