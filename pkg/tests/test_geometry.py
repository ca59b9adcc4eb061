import numpy as np
import pytest

from psiproj import expr as ex
from psiproj.geometry import (Framing, FramingError, constant_framing, flat_metric, geometry_from_framing,
                              rotating_framing_t2, s3_framing)
from psiproj.sampling import Sampler


def _values(es, box, n=20, seed=0):
    s = Sampler(box, n, seed)
    vals, bad = s.scalar_values(es)
    assert not bad.any()
    return s.xs, np.array(vals)


def _flatten(T):
    if isinstance(T, ex.Expr):
        return [T]
    return [v for t in T for v in _flatten(t)]


def test_constant_framing_has_no_connection():
    geom = geometry_from_framing(constant_framing(2))
    for T in (geom.christoffel, geom.weitzenbock, geom.contorsion, geom.torsion_covector):
        assert all(e.is_zero() for e in _flatten(T))


def test_non_orthonormal_framing_is_rejected():
    fr = Framing(2, flat_metric(2), [[ex.const(2), ex.ZERO], [ex.ZERO, ex.ONE]], ((0, 1), (0, 1)))
    with pytest.raises(FramingError):
        geometry_from_framing(fr)


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])  # e[j][a]


def _upsilon_fd(x, theta_fn, step=1e-6):
    """Upsilon^a_{bc} = -e^j_c d_b e_j^a by central differences; coframe = frame for a rotation."""
    e = _rot(theta_fn(x))
    U = np.zeros((2, 2, 2))
    for b in range(2):
        dx = np.zeros(2)
        dx[b] = step
        de = (_rot(theta_fn(x + dx)) - _rot(theta_fn(x - dx))) / (2 * step)
        for a in range(2):
            for c in range(2):
                U[a, b, c] = -sum(e[j, c] * de[j, a] for j in range(2))
    return U


def test_rotating_framing_against_finite_differences():
    geom = geometry_from_framing(rotating_framing_t2(ex.cos(ex.x(1))))
    box = geom.fr.box
    assert all(e.is_zero() or np.abs(_values([e], box)[1]).max() < 1e-14 for e in _flatten(geom.christoffel))
    xs, U = _values(_flatten(geom.weitzenbock), box)
    _, t = _values(geom.torsion_covector, box)
    U = U.reshape(2, 2, 2, -1)
    assert np.abs(U).max() > 0.1
    theta = lambda p: np.cos(p[0])  # noqa: E731
    for n, x in enumerate(xs):
        oracle = _upsilon_fd(x, theta)
        assert np.abs(U[..., n].real - oracle).max() < 1e-8
        # flat metric, unit density: t_a = T_{a12}
        T = oracle - np.swapaxes(oracle, 1, 2)
        assert np.abs(t[:, n].real - T[:, 0, 1]).max() < 1e-8


def test_s3_kstar_is_minus_metric():
    fr = s3_framing()
    geom = geometry_from_framing(fr)
    es = [ex.add(geom.kstar[a][b], geom.g[a][b]) for a in range(3) for b in range(3)]
    _, v = _values(es, fr.box)
    assert np.abs(v).max() < 1e-8


def test_s3_ricci_is_twice_metric():
    geom = geometry_from_framing(s3_framing())
    es = [ex.add(geom.ricci[a][b], ex.scale(-2, geom.g[a][b])) for a in range(3) for b in range(3)]
    _, v = _values(es, geom.fr.box, n=10)
    assert np.abs(v).max() < 1e-9


def test_s3_chart_orientation_is_positive():
    fr = s3_framing()
    fr.validate(samples=30, seed=4)
    with pytest.raises(FramingError):
        s3_framing(flip=not fr.name.endswith("flipped")).validate()
