import numpy as np
import pytest

from geoshell.oracle import (bernstein, bezier_points, cardinal_points, catmull_rom,
                             fd_gradient, fd_hessian_action, hermite_points, linear_refine)


def test_bernstein_partition_of_unity():
    for t in (0.0, 0.3, 1.0):
        assert sum(bernstein(5, i, t) for i in range(6)) == pytest.approx(1.0)


def test_bezier_endpoints_and_derivative():
    c = np.array([[0.0, 0], [1, 2], [3, 3], [4, 0]])
    assert np.allclose(bezier_points(c, 0.0), c[0])
    assert np.allclose(bezier_points(c, 1.0), c[-1])
    h = 1e-6
    d = (bezier_points(c, h) - bezier_points(c, 0.0)) / h
    assert np.allclose(d, 3 * (c[1] - c[0]), atol=1e-4)


def test_hermite_endpoint_conditions():
    a, b = np.array([0.0, 1.0]), np.array([2.0, -1.0])
    va, vb = np.array([1.0, 0.0]), np.array([0.0, 3.0])
    assert np.allclose(hermite_points(a, va, vb, b, 0.0), a)
    assert np.allclose(hermite_points(a, va, vb, b, 1.0), b)
    h = 1e-6
    assert np.allclose((hermite_points(a, va, vb, b, h) - a) / h, va, atol=1e-5)
    assert np.allclose((b - hermite_points(a, va, vb, b, 1 - h)) / h, vb, atol=1e-5)


def test_catmull_rom_interpolates_and_matches_cardinal():
    p = np.array([[0.0], [1.0], [4.0], [2.0], [5.0]])
    assert np.allclose(catmull_rom(*p[:4], 0.0), p[1])
    assert np.allclose(catmull_rom(*p[:4], 1.0), p[2])
    assert np.allclose(cardinal_points(p, 0.5, 1.4), catmull_rom(*p[:4], 0.4))


def test_linear_refine_reproduces_cubics():
    # the four-point scheme has cubic precision on closed-free interior samples
    x = np.arange(8.0)
    y = x ** 3 - 2 * x
    out = linear_refine(np.c_[x, y], "binary4", closed=False)
    mid = out[5]
    assert mid[0] == pytest.approx(2.5)
    assert mid[1] == pytest.approx(2.5 ** 3 - 5.0)


def test_fd_helpers():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])

    def f(x):
        return 0.5 * x @ A @ x + np.sin(x[0])

    x = np.array([0.3, -0.7])
    g = fd_gradient(f, x)
    assert np.allclose(g, A @ x + [np.cos(0.3), 0.0], atol=1e-8)
    Hv = fd_hessian_action(lambda z: A @ z, x, np.array([1.0, 2.0]))
    assert np.allclose(Hv, A @ [1.0, 2.0])
