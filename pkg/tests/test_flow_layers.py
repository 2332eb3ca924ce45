import numpy as np
import pytest

from isoflow.errors import DegenerateDimensionError, FlowError
from isoflow.flow import ActNorm, AdditiveCoupling, ConvCouplingNet, DenseCouplingNet, Permutation
from isoflow.numerics import Rng


class StubNet:
    """g([a, b]) = [a + b, a - b]; fixed, parameter-free."""

    def apply(self, x):
        a, b = x[..., 0], x[..., 1]
        return np.stack([a + b, a - b], axis=-1)


def test_coupling_forward_hand_applied():
    layer = AdditiveCoupling(4, StubNet())
    y, logdet = layer.forward(np.array([1.0, 2.0, 3.0, 4.0]))
    np.testing.assert_allclose(y, [1.0, 2.0, 6.0, 3.0])
    assert logdet == 0.0


def test_coupling_inverse_hand_applied():
    layer = AdditiveCoupling(4, StubNet())
    x, logdet = layer.inverse(np.array([1.0, 2.0, 6.0, 3.0]))
    np.testing.assert_allclose(x, [1.0, 2.0, 3.0, 4.0])
    assert logdet == 0.0


def test_coupling_zero_init_is_identity():
    net = DenseCouplingNet(3, 3, 16, Rng(0))
    layer = AdditiveCoupling(6, net)
    x = Rng(1).standard_normal(5, 6)
    y, _ = layer.forward(x)
    np.testing.assert_array_equal(y, x)


def test_coupling_round_trip():
    rng = Rng(2)
    net = DenseCouplingNet(3, 4, 8, rng)
    net.w4 = rng.standard_normal(4, 8)  # make the shift non-trivial
    net.b4 = rng.standard_normal(4)
    layer = AdditiveCoupling(7, net)
    x = rng.standard_normal(20, 7)
    y, _ = layer.forward(x)
    back, _ = layer.inverse(y)
    np.testing.assert_allclose(back, x, atol=1e-12)


def test_coupling_dimension_mismatch():
    layer = AdditiveCoupling(4, StubNet())
    with pytest.raises(FlowError, match="dim"):
        layer.forward(np.zeros(5))


def test_actnorm_identity():
    layer = ActNorm(3)
    layer.init_identity()
    x = np.array([0.5, -1.0, 2.0])
    y, logdet = layer.forward(x)
    np.testing.assert_array_equal(y, x)
    assert logdet == 0.0


def test_actnorm_closed_form_logdet():
    layer = ActNorm(2)
    layer.scale = np.array([2.0, 2.0])
    layer.bias = np.zeros(2)
    layer.initialized = True
    _, logdet = layer.forward(np.zeros(2))
    assert abs(logdet - 2.0 * np.log(2.0)) < 1e-12
    _, logdet_inv = layer.inverse(np.zeros(2))
    assert abs(logdet_inv + 2.0 * np.log(2.0)) < 1e-12


def test_actnorm_round_trip():
    layer = ActNorm(4)
    layer.scale = np.array([0.5, 2.0, -3.0, 1.25])
    layer.bias = np.array([1.0, -2.0, 0.25, 0.0])
    layer.initialized = True
    x = Rng(3).standard_normal(10, 4)
    y, _ = layer.forward(x)
    back, _ = layer.inverse(y)
    np.testing.assert_allclose(back, x, atol=1e-12)


def test_actnorm_uninitialized_rejected():
    layer = ActNorm(2)
    with pytest.raises(FlowError, match="uninitialized"):
        layer.forward(np.zeros(2))


def test_actnorm_init_closed_form():
    layer = ActNorm(1)
    batch = np.array([[0.0], [2.0]])
    layer.init_from_batch(batch)
    out, _ = layer.inverse(batch)
    np.testing.assert_allclose(out[:, 0], [-1.0, 1.0], atol=1e-12)


def test_actnorm_init_standardizes():
    layer = ActNorm(3)
    batch = Rng(4).standard_normal(50, 3) * np.array([5.0, 0.1, 2.0]) + 1.5
    layer.init_from_batch(batch)
    out, _ = layer.inverse(batch)
    np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-8)
    np.testing.assert_allclose(out.var(axis=0), 1.0, atol=1e-8)


def test_actnorm_init_fixed_point():
    layer = ActNorm(2)
    batch = Rng(5).standard_normal(5000, 2)
    batch = (batch - batch.mean(axis=0)) / batch.std(axis=0)
    layer.init_from_batch(batch)
    np.testing.assert_allclose(layer.scale, 1.0, atol=1e-10)
    np.testing.assert_allclose(layer.bias, 0.0, atol=1e-10)


def test_actnorm_init_degenerate_dimension():
    layer = ActNorm(2)
    batch = np.array([[1.0, 3.0], [2.0, 3.0], [0.0, 3.0]])
    with pytest.raises(DegenerateDimensionError, match="degenerate dimension"):
        layer.init_from_batch(batch)


def test_permutation_round_trip_and_logdet():
    perm = Permutation(Rng(6).permutation(9))
    x = Rng(7).standard_normal(4, 9)
    y, logdet = perm.inverse(x)
    assert logdet == 0.0
    back, _ = perm.forward(y)
    np.testing.assert_array_equal(back, x)


def test_permutation_rejects_non_bijection():
    with pytest.raises(FlowError):
        Permutation(np.array([0, 0, 1]))


def _numeric_net_grads(net, x, upstream, h=1e-6):
    """Central finite differences of sum(net(x) * upstream) per parameter."""
    grads = {}
    for name, arr in net.params().items():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = float(np.sum(net.apply(x) * upstream))
            flat[i] = keep - h
            down = float(np.sum(net.apply(x) * upstream))
            flat[i] = keep
            g.ravel()[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


@pytest.mark.parametrize("cls", [DenseCouplingNet, ConvCouplingNet])
def test_coupling_net_backward_matches_finite_differences(cls):
    rng = Rng(8)
    net = cls(5, 3, 4, rng)
    net.w4 = rng.standard_normal(*net.w4.shape) * 0.3
    net.b4 = rng.standard_normal(*net.b4.shape) * 0.3
    x = rng.standard_normal(6, 5)
    upstream = rng.standard_normal(6, 3)

    _, cache = net.apply_cached(x)
    dx, grads = net.backward(cache, upstream)
    numeric = _numeric_net_grads(net, x, upstream)
    for name in grads:
        err = np.abs(grads[name] - numeric[name])
        denom = np.maximum(np.abs(grads[name]) + np.abs(numeric[name]), 1e-3)
        assert (err / denom).max() < 1e-6, name

    # input gradient against finite differences
    gx = np.zeros_like(x)
    h = 1e-6
    for i in range(x.size):
        keep = x.ravel()[i]
        x.ravel()[i] = keep + h
        up = float(np.sum(net.apply(x) * upstream))
        x.ravel()[i] = keep - h
        down = float(np.sum(net.apply(x) * upstream))
        x.ravel()[i] = keep
        gx.ravel()[i] = (up - down) / (2.0 * h)
    np.testing.assert_allclose(dx, gx, atol=1e-7)


def test_conv_net_zero_at_construction():
    net = ConvCouplingNet(4, 4, 8, Rng(9))
    x = Rng(10).standard_normal(3, 4)
    np.testing.assert_array_equal(net.apply(x), np.zeros((3, 4)))
