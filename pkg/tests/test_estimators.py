import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from kreinlab import PointInteractionResolvent, SegmentResolvent
from kreinlab.kernels import Energy, GaussianSource


def test_point_estimator_params_and_clone():
    est = PointInteractionResolvent(coupling=0.2, z=-2.0)
    assert est.get_params()["coupling"] == 0.2
    c = clone(est.set_params(z=-3.0))
    assert c.z == -3.0


def test_point_estimator_fit_predict():
    est = PointInteractionResolvent(coupling=1 / (4 * np.pi), z=-2 + 0.5j,
                                    source_center=(0, 0, 1), source_width=0.4)
    with pytest.raises(NotFittedError):
        est.predict([[1, 1, 1]])
    est.fit([[0.0, 0.0, 0.0]])
    assert est.n_centers_ == 1
    vals = est.predict([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    assert vals.shape == (2,) and np.iscomplexobj(vals)
    assert est.bound_states()[0].kappa == pytest.approx(1.0)
    with pytest.raises(ValueError):
        est.fit([[0.0, 0.0]])


def test_point_estimator_far_field_is_free():
    # strong decoupling: the result equals the free resolvent
    est = PointInteractionResolvent(coupling=1e12, z=-1.0).fit([[5.0, 5.0, 5.0]])
    pts = np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 1.0]])
    free = GaussianSource((0, 0, 1), 0.5).resolvent(Energy.from_z(-1.0), pts)
    assert np.allclose(est.predict(pts), free, rtol=1e-10)


def test_segment_estimator():
    est = SegmentResolvent(n_nodes=64, z=1j).fit()
    vals = est.predict([[0.5, 1.0, 0.0]])
    assert vals.shape == (1,)
    tr = est.trace()
    assert tr.u_f.shape == (64,)
    assert np.allclose(tr.u_f, -tr.u_hat_h / (4 * np.pi))
    assert est.negative_spectrum((0.1, 5.0)) == []
    assert clone(est).get_params()["n_nodes"] == 64
