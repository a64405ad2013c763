"""
Tests for rasters, connected components, hole filling and patch extraction.
"""

import tempfile
from pathlib import Path

import cv2
import numpy as np
from django.test import SimpleTestCase

from core.exceptions import DataError, RasterFormatError, ShapeError
from core.rng import stream
from imaging.components import connected_components, fill_holes
from imaging.labels import read_labels, write_labels
from imaging.patches import PatchConfig, extract_patches, place_on_canvas
from imaging.raster import (Raster, decode_raster, encode_raster, parse_channel_set, read_mask,
                            read_raster, write_mask, write_raster)


def _plot(h, w, seed=0):
    data = stream(seed, 'imaging-test').uniform(0.0, 1.0, size=(3, h, w)).astype(np.float32)
    return Raster(data, ('R', 'G', 'B'))


class ComponentTests(SimpleTestCase):
    """Connected components and hole filling."""

    def test_solid_rectangle(self):
        mask = np.zeros((10, 12), bool)
        mask[2:5, 3:9] = True
        labels, comps = connected_components(mask)
        self.assertEqual(len(comps), 1)
        self.assertEqual(comps[0].bbox, (3, 2, 6, 3))
        self.assertEqual(comps[0].area, 18)
        self.assertEqual(set(np.unique(labels)), {0, 1})

    def test_diagonal_pixels(self):
        mask = np.array([[1, 0], [0, 1]], bool)
        self.assertEqual(len(connected_components(mask, 8)[1]), 1)
        self.assertEqual(len(connected_components(mask, 4)[1]), 2)

    def test_empty_mask(self):
        labels, comps = connected_components(np.zeros((5, 5), bool))
        self.assertEqual(comps, [])
        self.assertFalse(labels.any())

    def test_partition_independent_of_orientation(self):
        mask = stream(1, 'cc').random((30, 30)) > 0.6
        _, comps = connected_components(mask)
        _, flipped = connected_components(mask[::-1, ::-1].copy())
        self.assertEqual(sorted(c.area for c in comps), sorted(c.area for c in flipped))

    def test_ring_fills_to_disk(self):
        yy, xx = np.mgrid[:21, :21]
        radius = np.hypot(yy - 10, xx - 10)
        ring = np.abs(radius - 6) < 0.7
        filled = fill_holes(ring)
        self.assertTrue(filled[10, 10])
        np.testing.assert_array_equal(filled, fill_holes(filled))
        self.assertTrue(filled[radius < 5].all())

    def test_no_holes_unchanged(self):
        mask = np.zeros((8, 8), bool)
        mask[2:6, 2:6] = True
        np.testing.assert_array_equal(fill_holes(mask), mask)

    def test_open_contour_unchanged(self):
        mask = np.zeros((9, 9), bool)
        mask[2, 2:7] = mask[6, 2:7] = True
        mask[2:7, 2] = True
        np.testing.assert_array_equal(fill_holes(mask), mask)


class PatchTests(SimpleTestCase):

    def test_three_blobs(self):
        mask = np.zeros((60, 90), bool)
        for x in (5, 35, 65):
            mask[20:30, x:x + 10] = True
        patches = extract_patches(_plot(60, 90), mask, PatchConfig(min_area=50), plot_id='p1')
        self.assertEqual(len(patches), 3)
        for patch in patches:
            self.assertEqual(patch.image.data.shape, (3, 224, 224))
            self.assertEqual(patch.plot_id, 'p1')

    def test_small_component_dropped(self):
        mask = np.zeros((40, 40), bool)
        mask[5:15, 5:15] = True
        mask[30:32, 30:33] = True
        self.assertEqual(len(extract_patches(_plot(40, 40), mask, PatchConfig(min_area=50))), 1)

    def test_padding_is_black_and_energy_kept(self):
        plot = _plot(50, 50, seed=2)
        mask = np.zeros((50, 50), bool)
        mask[10:30, 5:45] = True
        (patch,) = extract_patches(plot, mask)
        content = plot.rgb().data[:, 10:30, 5:45]
        x0, y0, w, h = patch.placement
        self.assertEqual((w, h), (40, 20))
        self.assertAlmostEqual(float(patch.image.data.sum(dtype=np.float64)),
                               float(content.sum(dtype=np.float64)), places=6)
        padding = patch.image.data.copy()
        padding[:, y0:y0 + h, x0:x0 + w] = 0
        self.assertFalse(padding.any())

    def test_oversized_box_downscaled(self):
        content = stream(3, 'big').uniform(0.0, 1.0, size=(3, 100, 300)).astype(np.float32)
        canvas, scale, placement = place_on_canvas(content)
        self.assertAlmostEqual(scale, 224 / 300)
        self.assertEqual(placement[2:], (224, 75))
        expected = content.sum() * scale ** 2
        self.assertLess(abs(canvas.sum() - expected) / expected, 0.01)

    def test_mask_mismatch(self):
        with self.assertRaises(ShapeError):
            extract_patches(_plot(10, 10), np.zeros((10, 11), bool))


class RasterFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_bit_identical(self):
        data = stream(4, 'raster').standard_normal((6, 7, 5)).astype(np.float32)
        raster = Raster(data, tuple('BGRNEH'))
        write_raster(self.dir / 'plot.dwrs', raster)
        back = read_raster(self.dir / 'plot.dwrs')
        self.assertEqual(back.channels, raster.channels)
        self.assertEqual(back.data.tobytes(), raster.data.tobytes())

    def test_bad_magic(self):
        with self.assertRaises(RasterFormatError) as ctx:
            decode_raster(b'NOPE' + b'\0' * 20)
        self.assertEqual(ctx.exception.offset, 0)

    def test_truncated_payload_offset(self):
        payload = encode_raster(_plot(4, 4))
        with self.assertRaises(RasterFormatError) as ctx:
            decode_raster(payload[:-8])
        self.assertEqual(ctx.exception.offset, len(payload) - 8)

    def test_png_import_scaling(self):
        image = np.zeros((2, 2, 3), np.uint8)
        image[0, 1] = (0, 51, 255)          # BGR
        cv2.imwrite(str(self.dir / 'tile.png'), image)
        raster = read_raster(self.dir / 'tile.png')
        self.assertEqual(raster.channels, ('R', 'G', 'B'))
        self.assertAlmostEqual(float(raster.channel('R')[0, 1]), 1.0)
        self.assertAlmostEqual(float(raster.channel('G')[0, 1]), 0.2, places=6)
        self.assertEqual(float(raster.channel('B')[0, 1]), 0.0)

    def test_mask_round_trips(self):
        mask = stream(5, 'mask').random((9, 7)) > 0.5
        write_mask(self.dir / 'm.png', mask)
        write_mask(self.dir / 'm.dwrs', mask)
        np.testing.assert_array_equal(read_mask(self.dir / 'm.png'), mask)
        np.testing.assert_array_equal(read_mask(self.dir / 'm.dwrs'), mask)

    def test_channel_validation(self):
        with self.assertRaises(DataError):
            Raster(np.zeros((2, 3, 3)), ('R', 'R'))
        with self.assertRaises(DataError):
            parse_channel_set('RGBX')
        self.assertEqual(parse_channel_set('rgbh'), ('R', 'G', 'B', 'H'))
        with self.assertRaises(DataError):
            _plot(3, 3).select(('H',))

    def test_labels_need_header(self):
        path = self.dir / 'labels.csv'
        path.write_text('p1,3\np2,4\n')
        with self.assertRaises(DataError):
            read_labels(path)
        write_labels(path, [{'plot_id': 'p1', 'count': 3}, {'plot_id': 'p2', 'count': 11}])
        self.assertEqual(read_labels(path), {'p1': 3, 'p2': 11})

    def test_negative_values(self):
        path = self.dir / 'predictions.csv'
        path.write_text('plot_id,biomass\np1,-3.2\np2,1.5\n')
        with self.assertRaises(DataError):
            read_labels(path, 'biomass')
        self.assertEqual(read_labels(path, 'biomass', as_float=True, clamp_negative=True),
                         {'p1': 0.0, 'p2': 1.5})
