import numpy as np
import pytest

from snowball_sim.errors import ShapeError
from snowball_sim.layered import LayeredVector


def vec(*arrays):
    return LayeredVector.from_arrays([np.asarray(a, dtype=float) for a in arrays])


def test_from_arrays_assigns_increasing_ids():
    v = vec([1.0, 2.0], [3.0])
    assert v.layer_ids == (0, 1)
    assert v.dims == (2, 1)


def test_rejects_non_increasing_ids():
    with pytest.raises(ShapeError):
        LayeredVector((1, 1), (np.ones(2), np.ones(2)))
    with pytest.raises(ShapeError):
        LayeredVector((2, 1), (np.ones(2), np.ones(2)))


def test_rejects_empty_layer():
    with pytest.raises(ShapeError):
        LayeredVector((0,), (np.zeros(0),))


def test_add_sub_scale():
    a = vec([1.0, 2.0], [3.0])
    b = vec([10.0, 20.0], [30.0])
    assert np.array_equal((a + b).values[0], [11.0, 22.0])
    assert np.array_equal((b - a).values[1], [27.0])
    assert np.array_equal(a.scale(2.0).values[0], [2.0, 4.0])


def test_add_requires_matching_layout():
    a = vec([1.0, 2.0], [3.0])
    with pytest.raises(ShapeError):
        a + vec([1.0, 2.0, 3.0], [4.0])
    with pytest.raises(ShapeError):
        a + vec([1.0, 2.0])


def test_layer_and_concat():
    a = vec([1.0, 2.0], [3.0], [4.0, 5.0])
    assert np.array_equal(a.layer(2), [4.0, 5.0])
    assert np.array_equal(a.concat([0, 2]), [1.0, 2.0, 4.0, 5.0])
    assert np.array_equal(a.concat(), [1.0, 2.0, 3.0, 4.0, 5.0])
    with pytest.raises(ShapeError):
        a.layer(9)


def test_norm_and_size():
    a = vec([3.0], [4.0])
    assert a.norm() == pytest.approx(5.0)
    assert a.size == 2


def test_zeros_like_and_copy_independent():
    a = vec([1.0, 2.0])
    z = a.zeros_like()
    assert np.array_equal(z.values[0], [0.0, 0.0])
    c = a.copy()
    c.values[0][0] = 99.0
    assert a.values[0][0] == 1.0
