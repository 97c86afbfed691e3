import numpy as np
import pytest

from levy_conditioned.path import (
    GridPath,
    Side,
    argmin_time,
    extract_excursions,
    first_passage,
    first_passage_rows,
    last_passage,
    load_path_npz,
    reflect_at_infimum,
    running_extrema,
    running_max_epoch,
    save_path_npz,
    simulate_path,
    simulate_paths,
    write_path_csv,
)
from levy_conditioned.util import ResourceGuardError
from common import BM, SP_EXP, rng


def test_grid_path_validation():
    with pytest.raises(ValueError):
        GridPath(0.0, [1.0])
    with pytest.raises(ValueError):
        GridPath(0.1, [])
    with pytest.raises(ValueError):
        GridPath(0.1, [1.0, 2.0], killed_at=3)
    path = GridPath(0.5, [1, 2, 3, 4], killed_at=2)
    assert list(path.alive) == [1.0, 2.0]
    assert list(path.times) == [0.0, 0.5, 1.0, 1.5]
    assert path.value_at(1.0) == 3.0
    assert list(path.segment(1, 3).values) == [2.0, 3.0]


def test_simulate_path():
    path = simulate_path(BM, 1.5, 0.01, 1.0, rng(1))
    assert len(path) == 101
    assert path.start == 1.5
    assert np.array_equal(path.values, simulate_path(BM, 1.5, 0.01, 1.0, rng(1)).values)
    with pytest.raises(ValueError):
        simulate_path(BM, 0.0, 0.1, 0.05, rng(1))


def test_simulate_paths():
    paths = simulate_paths(BM, np.array([0.0, 1.0, 2.0]), 0.1, 1.0, 3, rng(2))
    assert paths.shape == (3, 11)
    assert list(paths[:, 0]) == [0.0, 1.0, 2.0]
    with pytest.raises(ResourceGuardError):
        simulate_paths(BM, 0.0, 0.01, 1.0, 10**7, rng(2))


def test_spectrally_positive_path_decreases_between_jumps():
    path = simulate_path(SP_EXP, 0.0, 0.01, 10.0, rng(3))
    steps = np.diff(path.values)
    assert np.all(steps >= SP_EXP.drift * 0.01 - 1e-12)


def test_running_extrema():
    sup, inf = running_extrema([1, 3, 0.5, 2])
    assert list(sup) == [1, 3, 3, 3]
    assert list(inf) == [1, 1, 0.5, 0.5]
    sup, inf = running_extrema(GridPath(1.0, [1, 3, 0.5, 2], killed_at=2))
    assert list(sup) == [1, 3]


ARGMIN = (
    ([1, 2, 3], 0),
    ([2, 1, 3], 1),
    # last attaining index
    ([1, 0, 2, 0, 3], 3),
    ([3, 2, 1], 2),
)


@pytest.mark.parametrize("values, index", ARGMIN)
def test_argmin_time(values, index):
    assert argmin_time(values) == index


FIRST_PASSAGE = (
    ([0, 1, 2], 1.5, Side.AtOrAbove, 2),
    ([0, 1, 2], 1.0, Side.AtOrAbove, 1),
    ([0, 1, 2], 1.0, Side.AboveStrict, 2),
    ([1, 0.5, 0, -1], 0.0, Side.BelowStrict, 3),
    ([1, 0.5, 0, -1], 0.0, Side.AtOrBelow, 2),
    # index 0 is never a passage
    ([2, 0], 1.0, Side.AtOrAbove, None),
)


@pytest.mark.parametrize("values, barrier, side, index", FIRST_PASSAGE)
def test_first_passage(values, barrier, side, index):
    assert first_passage(values, barrier, side) == index


def test_first_passage_rows():
    paths = np.array([[0, 1, 2], [0, 0.5, 0.7], [2, 2, 0]], dtype=float)
    assert list(first_passage_rows(paths, 1.0, Side.AtOrAbove)) == [1, -1, 1]


def test_reflect_at_infimum():
    path = GridPath(0.1, [0, 1, -1, 0.5, -2], killed_at=None, label="x")
    reflected = reflect_at_infimum(path)
    assert list(reflected.values) == [0.0, 1.0, 0.0, 1.5, 0.0]
    assert reflected.dt == 0.1 and reflected.label == "x"


def test_extract_excursions():
    records = extract_excursions(GridPath(0.5, [0, 1, 0.5, -0.5, 0.5]))
    assert [(r.start_index, r.end_index, r.censored) for r in records] == [
        (0, 3, False),
        (3, 4, True),
    ]
    assert [r.height for r in records] == [1.0, 1.0]
    assert records[0].length == 1.5
    assert records[0].span_size == 2
    assert records[1].span_size == 1
    assert extract_excursions([0, -1, -2]) == []


def test_excursion_heights_bounded_by_path_range():
    path = simulate_path(BM, 0.0, 0.01, 20.0, rng(4))
    records = extract_excursions(path)
    assert records
    assert max(r.height for r in records) <= np.ptp(path.values) + 1e-12
    # excursions are disjoint and ordered
    assert all(a.end_index <= b.start_index for a, b in zip(records, records[1:]))


def test_last_passage():
    assert last_passage([0, 2, 0.5, 3], 1.0) == 2
    assert last_passage([2, 3], 1.0) is None


def test_running_max_epoch():
    assert running_max_epoch([0, 2, 1, 2, 0], 4) == 3
    assert running_max_epoch([0, 2, 1, 2, 0], 3) == 1
    with pytest.raises(ValueError):
        running_max_epoch([0, 1], 0)


def test_path_files(tmp_path):
    path = GridPath(0.25, [1.0, 0.5, 2.0], killed_at=2, label="bm")
    write_path_csv(path, tmp_path / "path.csv")
    lines = (tmp_path / "path.csv").read_text().splitlines()
    assert lines == ["time,value", "0.0,1.0", "0.25,0.5", "0.5,2.0"]

    save_path_npz(path, tmp_path / "path.npz")
    loaded = load_path_npz(tmp_path / "path.npz")
    assert np.array_equal(loaded.values, path.values)
    assert (loaded.dt, loaded.killed_at, loaded.label) == (0.25, 2, "bm")
