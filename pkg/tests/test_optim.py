import numpy as np

from semibsl.optim import nelder_mead


def test_quadratic_minimum():
    res = nelder_mead(lambda x: (x[0] - 1.5) ** 2 + 3 * (x[1] + 0.5) ** 2, [0.0, 0.0], ftol=1e-14)
    assert res.converged
    assert np.allclose(res.x, [1.5, -0.5], atol=1e-5)


def test_rosenbrock():
    def rosen(x):
        return 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
    res = nelder_mead(rosen, [-1.2, 1.0], max_iter=2000, ftol=1e-14)
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-3)
    assert res.fun <= res.f0


def test_iteration_cap_reports_nonconvergence():
    res = nelder_mead(lambda x: float(np.sum(x ** 2)), [10.0, -7.0, 3.0], max_iter=3, ftol=0.0)
    assert not res.converged
    assert res.nit == 3


def test_infinite_start_recovers():
    res = nelder_mead(lambda x: np.inf if x[0] < 0 else (x[0] - 2) ** 2, [-0.1], step=1.0, ftol=1e-12)
    assert abs(res.x[0] - 2) < 1e-4
