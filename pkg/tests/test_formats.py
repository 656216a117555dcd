import numpy as np
import pytest

from pcrestore import DistortionTable, Extrapolation, Labeling, Palette
from pcrestore.formats import (FormatError, read_grey, read_labels, read_mask, read_netpbm, read_palette,
                               read_table, to_bytes, write_labels, write_mask, write_netpbm, write_palette,
                               write_table)


def test_netpbm_round_trip(tmp_path, rng):
    rgb = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
    grey = rng.integers(0, 256, (4, 3), dtype=np.uint8)
    write_netpbm(tmp_path / "a.ppm", rgb)
    write_netpbm(tmp_path / "b.pgm", grey)
    assert np.array_equal(read_netpbm(tmp_path / "a.ppm"), rgb)
    assert np.array_equal(read_netpbm(tmp_path / "b.pgm"), grey)


def test_header_comments(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5 # comment\n2 # w\n1\n255\n\x00\xff")
    assert read_netpbm(tmp_path / "c.pgm").tolist() == [[0, 255]]


@pytest.mark.parametrize("blob", [b"P3\n1 1\n255\n0 0 0", b"P5\n1 1\n65535\n\x00\x00", b"P5\n2 2\n255\n\x00",
                                  b"P5\n-1 2\n255\n", b"P5\nx 2\n255\n", b"", b"P6\n1 1\n255"])
def test_rejects_bad_files(tmp_path, blob):
    (tmp_path / "bad").write_bytes(blob)
    with pytest.raises(FormatError):
        read_netpbm(tmp_path / "bad")


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FormatError, match="nope.pgm"):
        read_netpbm(tmp_path / "nope.pgm")


def test_mask_threshold(tmp_path):
    write_netpbm(tmp_path / "m.pgm", np.array([[0, 127, 128, 255]], np.uint8))
    assert read_mask(tmp_path / "m.pgm").tolist() == [[False, False, True, True]]
    write_mask(tmp_path / "n.pgm", np.array([[True, False]]))
    assert read_mask(tmp_path / "n.pgm").tolist() == [[True, False]]


def test_grey_is_undefined_off_mask(tmp_path):
    write_netpbm(tmp_path / "g.pgm", np.array([[10, 20]], np.uint8))
    g = read_grey(tmp_path / "g.pgm", np.array([[False, True]]))
    assert np.isnan(g.value[0, 0]) and g.value[0, 1] == 20 / 255


def test_labels_are_one_based(tmp_path):
    lab = Labeling(np.array([[0, 2], [1, 0]]))
    write_labels(tmp_path / "l.pgm", lab)
    assert read_netpbm(tmp_path / "l.pgm").tolist() == [[1, 3], [2, 1]]
    assert read_labels(tmp_path / "l.pgm") == lab
    write_netpbm(tmp_path / "z.pgm", np.zeros((1, 1), np.uint8))
    with pytest.raises(FormatError):
        read_labels(tmp_path / "z.pgm")


def test_palette_round_trip(tmp_path, rng):
    pal = Palette(rng.random((4, 3)))
    write_palette(tmp_path / "p.txt", pal)
    assert np.array_equal(read_palette(tmp_path / "p.txt").colors, pal.colors)


@pytest.mark.parametrize("text", ["", "0.1 0.2\n0.3\n", "0.1 x 0.2\n", "1.5 0 0\n"])
def test_palette_rejects_bad_text(tmp_path, text):
    (tmp_path / "p.txt").write_text(text)
    with pytest.raises(FormatError):
        read_palette(tmp_path / "p.txt")


def test_palette_comments(tmp_path):
    (tmp_path / "p.txt").write_text("# colors\n0 0 0  # black\n\n1 1 1\n")
    assert read_palette(tmp_path / "p.txt").k == 2


def test_table_round_trip(tmp_path):
    tab = DistortionTable.from_function(lambda t: t * t + 0.1, [0.3, 0.5, 0.8], -1, 2, 31,
                                        Extrapolation.LINEAR_ENDS)
    write_table(tmp_path / "t.csv", tab)
    back = read_table(tmp_path / "t.csv")
    assert np.array_equal(back.t, tab.t) and np.array_equal(back.values, tab.values)
    assert np.array_equal(back.e, tab.e) and back.extrapolation is Extrapolation.LINEAR_ENDS


def test_table_defaults(tmp_path):
    (tmp_path / "t.csv").write_text("0,0\n1,1\n")
    tab = read_table(tmp_path / "t.csv")
    assert np.allclose(tab.e, np.ones(3) / np.sqrt(3))
    assert tab.extrapolation is Extrapolation.CLAMP_ENDS


@pytest.mark.parametrize("text", ["t,L\n", "t,L\n0,1,2\n", "0,0\nx,1\n", "# e: 0,0,0\n0,0\n", "1,0\n0,1\n",
                                  "# extrapolation: cubic\n0,0\n"])
def test_table_rejects_bad_text(tmp_path, text):
    (tmp_path / "t.csv").write_text(text)
    with pytest.raises(FormatError):
        read_table(tmp_path / "t.csv")


def test_to_bytes_rounds_and_clips():
    assert to_bytes(np.array([0.0, 0.5, 1.0, 1.2])).tolist() == [0, 128, 255, 255]
