"""
Tests for artifact persistence, figure export and synthetic scenes
"""

import struct

import numpy as np
import pandas as pd
import pytest

from hsifusion.autodiff import NetworkParams
from hsifusion.core import BlurKernel, HsiCube, Rng, SrfMatrix
from hsifusion.data import (
    create_connector,
    crop_patches,
    export_error_map,
    export_kernel,
    export_pseudocolor,
    export_spectral_curves,
    export_srf,
    load_checkpoint,
    load_cube,
    load_matrix,
    load_srf,
    save_checkpoint,
    save_cube,
    save_matrix,
    synthetic_scene,
)
from hsifusion.data.connectors.checkpoint import CheckpointConnector
from hsifusion.data.connectors.cube_file import CubeFileConnector
from hsifusion.data.export import encode_ppm, error_lut, error_map_pixels, pseudocolor_pixels, stretch_to_bytes
from hsifusion.exceptions import FormatError, FusionException, ParameterError, ShapeError


def _header(magic=b'HSIC', version=1, bands=1, height=1, width=2):
    return struct.pack('<4s4I', magic, version, bands, height, width)


class TestCubeFile:

    def test_round_trip(self, tmp_path):
        data = np.arange(24, dtype=np.float64).reshape(2, 3, 4) / 8.0
        path = save_cube(HsiCube(data), tmp_path / 'nested' / 'z.hsic')
        assert np.array_equal(load_cube(path).data, data)

    def test_layout(self):
        blob = CubeFileConnector().encode(HsiCube(np.array([[[1.0, 0.5]]])))
        assert blob == _header() + struct.pack('<2f', 1.0, 0.5)

    def test_empty_file(self, tmp_path):
        path = tmp_path / 'empty.hsic'
        path.write_bytes(b'')
        with pytest.raises(FormatError) as info:
            load_cube(path)
        assert info.value.offset == 0

    def test_bad_magic(self):
        with pytest.raises(FormatError) as info:
            CubeFileConnector().decode(_header(magic=b'HSIX') + bytes(8))
        assert info.value.offset == 0
        assert 'byte offset 0' in str(info.value)

    def test_bad_version(self):
        with pytest.raises(FormatError) as info:
            CubeFileConnector().decode(_header(version=2) + bytes(8))
        assert info.value.offset == 4

    def test_zero_dimension(self):
        with pytest.raises(FormatError) as info:
            CubeFileConnector().decode(_header(width=0))
        assert info.value.offset == 8

    def test_oversized_dimensions(self):
        with pytest.raises(FormatError) as info:
            CubeFileConnector().decode(_header(bands=2 ** 16, height=2 ** 16, width=2))
        assert info.value.offset == 8

    def test_truncated_payload(self):
        blob = _header() + bytes(4)
        with pytest.raises(FormatError) as info:
            CubeFileConnector().decode(blob)
        assert info.value.offset == len(blob)

    def test_trailing_bytes(self):
        with pytest.raises(FormatError) as info:
            CubeFileConnector().decode(_header() + bytes(12))
        assert info.value.offset == 28

    def test_non_finite_payload(self):
        blob = _header(width=3) + struct.pack('<3f', 0.0, 1.0, float('nan'))
        with pytest.raises(FormatError) as info:
            CubeFileConnector().decode(blob)
        assert info.value.offset == 20 + 8


class TestCheckpoint:

    def test_round_trip(self, tmp_path):
        params = NetworkParams({
            'recon.out.weight': np.arange(6, dtype=np.float64).reshape(1, 2, 3) / 4.0,
            'recon.out.bias': np.array([0.5]),
            'scalar': np.array(2.0),
        })
        loaded = load_checkpoint(save_checkpoint(params, tmp_path / 'g.hspw'))
        assert loaded.names() == params.names()
        for name in params:
            assert loaded[name].shape == params[name].shape
            assert np.array_equal(loaded[name], params[name])

    def test_layout(self):
        blob = CheckpointConnector().encode(NetworkParams({'w': np.array([1.0])}))
        expected = b'HSPW' + struct.pack('<III', 1, 1, 1) + b'w' + struct.pack('<II', 1, 1) + struct.pack('<f', 1.0)
        assert blob == expected

    def test_bad_magic(self):
        with pytest.raises(FormatError) as info:
            CheckpointConnector().decode(b'HSIC' + struct.pack('<II', 1, 0))
        assert info.value.offset == 0

    def test_duplicate_name(self):
        tensor = struct.pack('<I', 1) + b'w' + struct.pack('<II', 1, 1) + struct.pack('<f', 1.0)
        blob = b'HSPW' + struct.pack('<II', 1, 2) + tensor + tensor
        with pytest.raises(FormatError) as info:
            CheckpointConnector().decode(blob)
        assert info.value.offset == 12 + len(tensor)

    def test_truncated(self):
        blob = CheckpointConnector().encode(NetworkParams({'w': np.ones(4)}))
        with pytest.raises(FormatError):
            CheckpointConnector().decode(blob[:-2])

    def test_trailing_bytes(self):
        blob = CheckpointConnector().encode(NetworkParams({'w': np.ones(2)}))
        with pytest.raises(FormatError) as info:
            CheckpointConnector().decode(blob + b'\x00')
        assert info.value.offset == len(blob)

    def test_non_utf8_name(self):
        blob = b'HSPW' + struct.pack('<III', 1, 1, 1) + b'\xff' + struct.pack('<II', 1, 1) + struct.pack('<f', 1.0)
        with pytest.raises(FormatError):
            CheckpointConnector().decode(blob)


class TestTextMatrix:

    def test_fixed_format(self, tmp_path):
        path = save_matrix(np.array([[0.5, 0.25], [1.0, 0.0]]), tmp_path / 'k.txt')
        assert path.read_text() == '0.5000000000 0.2500000000\n1.0000000000 0.0000000000\n'
        assert np.array_equal(load_matrix(path), [[0.5, 0.25], [1.0, 0.0]])

    def test_srf_rows_renormalized(self, tmp_path):
        path = tmp_path / 'srf.txt'
        path.write_text('1 1 2\n0 3 1\n')
        srf = load_srf(path)
        assert np.allclose(srf.weights, [[0.25, 0.25, 0.5], [0.0, 0.75, 0.25]])

    @pytest.mark.parametrize('content', ['1 -1 2\n', '0 0 0\n1 1 1\n', 'a b\n', ''])
    def test_invalid_srf(self, tmp_path, content):
        path = tmp_path / 'srf.txt'
        path.write_text(content)
        with pytest.raises(FormatError):
            load_srf(path)


class TestConnectorFactory:

    def test_known_types(self):
        assert isinstance(create_connector('cube'), CubeFileConnector)
        assert isinstance(create_connector('checkpoint'), CheckpointConnector)

    def test_unknown_type(self):
        with pytest.raises(ParameterError, match="hdf5"):
            create_connector('hdf5')

    def test_unknown_type_is_a_fusion_error(self):
        with pytest.raises(FusionException):
            create_connector('envi')


class TestPpm:

    def test_encode(self):
        rgb = np.array([[[255, 0, 0], [0, 255, 0]]], dtype=np.uint8)
        assert encode_ppm(rgb) == b'P6\n2 1\n255\n' + bytes([255, 0, 0, 0, 255, 0])

    def test_encode_rejects_gray(self):
        with pytest.raises(ShapeError):
            encode_ppm(np.zeros((2, 2), dtype=np.uint8))

    def test_stretch(self):
        assert list(stretch_to_bytes(np.array([[0.0, 0.5, 1.0]]))[0]) == [0, 128, 255]
        assert list(stretch_to_bytes(np.array([[3.0, 3.0]]))[0]) == [128, 128]

    def test_pseudocolor(self, tmp_path):
        data = np.array([[[0.0, 1.0]], [[2.0, 2.0]], [[1.0, 0.0]]])
        pixels = pseudocolor_pixels(HsiCube(data), (0, 1, 2))
        assert pixels.tolist() == [[[0, 128, 255], [255, 128, 0]]]
        path = export_pseudocolor(HsiCube(data), (0, 1, 2), tmp_path / 'rgb.ppm')
        assert path.read_bytes() == b'P6\n2 1\n255\n' + bytes([0, 128, 255, 255, 128, 0])

    def test_pseudocolor_band_out_of_range(self, small_cube):
        with pytest.raises(ParameterError):
            pseudocolor_pixels(small_cube, (0, 1, 4))

    @pytest.mark.parametrize('index, rgb', [
        (0, (0, 0, 128)), (85, (0, 255, 255)), (170, (255, 255, 0)), (255, (128, 0, 0)), (42, (0, 126, 191)),
    ])
    def test_error_lut(self, index, rgb):
        assert tuple(error_lut()[index]) == rgb

    def test_error_map(self, tmp_path):
        ref = HsiCube(np.zeros((1, 1, 4)))
        est = HsiCube(np.array([[[0.0, 0.1 / 3, 0.1, 0.5]]]))
        pixels = error_map_pixels(ref, est)
        lut = error_lut()
        assert pixels.tolist() == [[lut[0].tolist(), lut[85].tolist(), lut[255].tolist(), lut[255].tolist()]]
        path = export_error_map(ref, est, tmp_path / 'err.ppm')
        assert path.read_bytes().startswith(b'P6\n4 1\n255\n')

    def test_error_map_validation(self, small_cube):
        with pytest.raises(ParameterError):
            error_map_pixels(small_cube, small_cube, vmax=0.0)
        with pytest.raises(ShapeError):
            error_map_pixels(small_cube, HsiCube(np.zeros((4, 8, 7))))

    def test_kernel_and_srf_figures(self, tmp_path):
        image, matrix = export_kernel(BlurKernel.delta(3), tmp_path / 'kernel.ppm', upscale=2)
        blob = image.read_bytes()
        assert blob.startswith(b'P6\n6 6\n255\n')
        assert len(blob) == len(b'P6\n6 6\n255\n') + 6 * 6 * 3
        assert np.array_equal(load_matrix(matrix), BlurKernel.delta(3).weights)
        image, matrix = export_srf(SrfMatrix(np.array([[0.5, 0.5, 0.0]])), tmp_path / 'srf.ppm', upscale=1)
        assert image.read_bytes() == b'P6\n3 1\n255\n' + bytes([255] * 6 + [0] * 3)
        assert matrix.name == 'srf.txt'


def test_spectral_curves_csv(tmp_path):
    ref = HsiCube(np.array([[[0.25, 0.5]], [[0.75, 1.0]]]))
    est = HsiCube(np.array([[[0.125, 0.5]], [[0.5, 1.0]]]))
    path = export_spectral_curves(ref, est, [(0, 1)], tmp_path / 'spectra.csv')
    assert path.read_text() == 'band,row,col,reference,estimate\n0,0,1,0.5,0.5\n1,0,1,1,1\n'
    frame = pd.read_csv(export_spectral_curves(ref, est, [(0, 0)], tmp_path / 'first.csv'))
    assert frame['estimate'].tolist() == [0.125, 0.5]


class TestSyntheticScene:

    def test_shape_and_range(self):
        z = synthetic_scene(8, 24, 20, Rng(0))
        assert z.shape == (8, 24, 20)
        assert z.data.min() >= 0.0 and z.data.max() <= 1.0
        assert z.data.std() > 0.01

    def test_deterministic(self):
        a = synthetic_scene(4, 16, 16, Rng(3))
        b = synthetic_scene(4, 16, 16, Rng(3))
        c = synthetic_scene(4, 16, 16, Rng(4))
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_invalid(self):
        with pytest.raises(ShapeError):
            synthetic_scene(0, 8, 8, Rng(0))
        with pytest.raises(ParameterError):
            synthetic_scene(4, 8, 8, Rng(0), materials=0)

    def test_crop_patches(self):
        cube = HsiCube(np.arange(2 * 6 * 5, dtype=np.float64).reshape(2, 6, 5))
        patches = crop_patches(cube, 4, 2)
        assert len(patches) == 2
        assert np.array_equal(patches[1].data, cube.data[:, 2:6, 0:4])
        with pytest.raises(ShapeError):
            crop_patches(cube, 7, 1)
