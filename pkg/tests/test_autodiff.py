"""
Tests for the computation graph, layer gradients and the Adam optimizer
"""

import numpy as np
import pytest

from hsifusion.autodiff import (
    Add,
    AdamState,
    BandMix,
    Concat,
    Conv2d,
    Dense,
    Graph,
    Identity,
    LeakyReLU,
    MAELoss,
    MSELoss,
    Mul,
    NetworkParams,
    Reshape,
    Scale,
    ScaleShift,
    SpatialDegradeOp,
    SpectralDegradeOp,
    UpsampleBilinear,
    UpsampleNearest,
    adam_step,
    grad_check,
    kaiming_uniform,
)
from hsifusion.core import Rng
from hsifusion.exceptions import GraphError, OptimizerError, ParameterError, ShapeError


def _mse_graph(build, target_shape):
    """Graph whose loss is mse(build(graph), target)"""
    graph = Graph('check')
    out = build(graph)
    target = graph.input('target', target_shape)
    loss = graph.apply(MSELoss(), out, target)
    return graph, loss


def _positive(rng, shape, low=0.1, high=1.0):
    return rng.uniform(low, high, shape)


class TestLayerGradients:

    def test_conv2d(self):
        rng = Rng(1)

        def build(g):
            x = g.input('x', (2, 6, 6))
            w = g.parameter('w', (3, 2, 3, 3))
            b = g.parameter('b', (3,))
            return g.apply(Conv2d(), x, w, b)

        graph, loss = _mse_graph(build, (3, 6, 6))
        params = NetworkParams({'w': rng.normal(size=(3, 2, 3, 3)), 'b': rng.normal(size=3)})
        bindings = {'x': _positive(rng, (2, 6, 6)), 'target': rng.normal(size=(3, 6, 6))}
        report = grad_check(graph, loss, bindings, params, wrt_inputs=['x'])
        assert report.passed, report.errors

    def test_conv2d_five_by_five(self):
        rng = Rng(2)

        def build(g):
            x = g.input('x', (1, 7, 5))
            w = g.parameter('w', (2, 1, 5, 5))
            b = g.parameter('b', (2,))
            return g.apply(Conv2d(), x, w, b)

        graph, loss = _mse_graph(build, (2, 7, 5))
        params = NetworkParams({'w': rng.normal(size=(2, 1, 5, 5)), 'b': np.zeros(2)})
        bindings = {'x': _positive(rng, (1, 7, 5)), 'target': rng.normal(size=(2, 7, 5))}
        assert grad_check(graph, loss, bindings, params, wrt_inputs=['x']).passed

    def test_band_mix_and_scale_shift(self):
        rng = Rng(3)

        def build(g):
            x = g.input('x', (4, 3, 3))
            mixed = g.apply(BandMix(), x, g.parameter('w', (2, 4)), g.parameter('b', (2,)))
            return g.apply(ScaleShift(), mixed, g.parameter('gamma', (2,)), g.parameter('beta', (2,)))

        graph, loss = _mse_graph(build, (2, 3, 3))
        params = NetworkParams({
            'w': rng.normal(size=(2, 4)), 'b': rng.normal(size=2),
            'gamma': rng.normal(size=2), 'beta': rng.normal(size=2),
        })
        bindings = {'x': _positive(rng, (4, 3, 3)), 'target': rng.normal(size=(2, 3, 3))}
        assert grad_check(graph, loss, bindings, params, wrt_inputs=['x']).passed

    def test_dense_reshape(self):
        rng = Rng(4)

        def build(g):
            x = g.input('x', (2, 2, 3))
            flat = g.apply(Reshape((12,)), x)
            return g.apply(Dense(), flat, g.parameter('w', (5, 12)), g.parameter('b', (5,)))

        graph, loss = _mse_graph(build, (5,))
        params = NetworkParams({'w': rng.normal(size=(5, 12)), 'b': rng.normal(size=5)})
        bindings = {'x': _positive(rng, (2, 2, 3)), 'target': rng.normal(size=5)}
        assert grad_check(graph, loss, bindings, params, wrt_inputs=['x']).passed

    @pytest.mark.parametrize('sign', [1.0, -1.0])
    def test_leaky_relu_away_from_kink(self, sign):
        rng = Rng(5)
        graph, loss = _mse_graph(lambda g: g.apply(LeakyReLU(), g.input('x', (2, 4, 4))), (2, 4, 4))
        bindings = {'x': sign * _positive(rng, (2, 4, 4)), 'target': rng.normal(size=(2, 4, 4))}
        assert grad_check(graph, loss, bindings, wrt_inputs=['x']).passed

    @pytest.mark.parametrize('op', [UpsampleNearest(2), UpsampleBilinear(2), UpsampleBilinear(3)])
    def test_upsampling(self, op):
        rng = Rng(6)
        graph, loss = _mse_graph(lambda g: g.apply(op, g.input('x', (2, 3, 4))), (2, 3 * op.scale, 4 * op.scale))
        bindings = {'x': rng.normal(size=(2, 3, 4)), 'target': rng.normal(size=(2, 3 * op.scale, 4 * op.scale))}
        assert grad_check(graph, loss, bindings, wrt_inputs=['x']).passed

    def test_concat_add_mul_scale(self):
        rng = Rng(7)

        def build(g):
            a = g.input('a', (1, 3, 3))
            b = g.input('b', (2, 3, 3))
            joined = g.apply(Concat(2), a, b)
            product = g.apply(Mul(), joined, g.parameter('gain', (3, 1, 1)))
            shifted = g.apply(Add(), product, g.parameter('offset', (3, 3, 3)))
            return g.apply(Scale(0.5), shifted)

        graph, loss = _mse_graph(build, (3, 3, 3))
        params = NetworkParams({'gain': rng.normal(size=(3, 1, 1)), 'offset': rng.normal(size=(3, 3, 3))})
        bindings = {
            'a': rng.normal(size=(1, 3, 3)), 'b': rng.normal(size=(2, 3, 3)),
            'target': rng.normal(size=(3, 3, 3)),
        }
        assert grad_check(graph, loss, bindings, params, wrt_inputs=['a', 'b']).passed

    def test_degradation_layers(self):
        rng = Rng(8)

        def build(g):
            z = g.input('z', (4, 8, 8))
            k = g.input('k', (3, 3))
            p = g.input('p', (2, 4))
            blurred = g.apply(SpatialDegradeOp(2), z, k)
            return g.apply(SpectralDegradeOp(), blurred, p)

        graph, loss = _mse_graph(build, (2, 4, 4))
        bindings = {
            'z': _positive(rng, (4, 8, 8)), 'k': _positive(rng, (3, 3)), 'p': _positive(rng, (2, 4)),
            'target': rng.normal(size=(2, 4, 4)),
        }
        assert grad_check(graph, loss, bindings, wrt_inputs=['z', 'k', 'p']).passed

    def test_mae_loss(self):
        rng = Rng(9)
        graph = Graph()
        x = graph.input('x', (3, 3))
        loss = graph.apply(MAELoss(), x, graph.input('target', (3, 3)))
        target = rng.normal(size=(3, 3))
        # keep every residual well away from the kink at 0
        residual = rng.choice([-1.0, 1.0], size=(3, 3)) * _positive(rng, (3, 3))
        report = grad_check(graph, loss, {'x': target + residual, 'target': target}, wrt_inputs=['x'])
        assert report.passed

    def test_positive_conv_stack(self):
        rng = Rng(10)

        def build(g):
            x = g.input('x', (2, 5, 5))
            h = g.apply(Conv2d(), x, g.parameter('w1', (3, 2, 3, 3)), g.parameter('b1', (3,)))
            h = g.apply(LeakyReLU(), h)
            return g.apply(Conv2d(), h, g.parameter('w2', (1, 3, 3, 3)), g.parameter('b2', (1,)))

        graph, loss = _mse_graph(build, (1, 5, 5))
        params = NetworkParams({
            'w1': _positive(rng, (3, 2, 3, 3)), 'b1': _positive(rng, (3,)),
            'w2': rng.normal(size=(1, 3, 3, 3)), 'b2': rng.normal(size=1),
        })
        bindings = {'x': _positive(rng, (2, 5, 5)), 'target': rng.normal(size=(1, 5, 5))}
        assert grad_check(graph, loss, bindings, params, wrt_inputs=['x']).passed


class TestGradCheck:

    def test_corrupted_gradient_fails(self):
        rng = Rng(11)

        def build(g):
            return g.apply(BandMix(), g.input('x', (2, 3, 3)), g.parameter('w', (2, 2)), g.parameter('b', (2,)))

        graph, loss = _mse_graph(build, (2, 3, 3))
        params = NetworkParams({'w': rng.normal(size=(2, 2)), 'b': rng.normal(size=2)})
        bindings = {'x': rng.normal(size=(2, 3, 3)), 'target': rng.normal(size=(2, 3, 3))}
        graph.forward(bindings, params)
        grads = graph.backward(loss)
        grads.params['w'] = grads.params['w'] + 0.1
        report = grad_check(graph, loss, bindings, params, analytic=grads)
        assert not report.passed
        assert report.worst() == 'param:w'

    def test_sampled_entries(self):
        rng = Rng(12)
        graph, loss = _mse_graph(lambda g: g.apply(Scale(3.0), g.input('x', (4, 6, 6))), (4, 6, 6))
        bindings = {'x': rng.normal(size=(4, 6, 6)), 'target': rng.normal(size=(4, 6, 6))}
        assert grad_check(graph, loss, bindings, wrt_inputs=['x'], max_entries=20).passed

    def test_params_left_untouched(self):
        rng = Rng(13)

        def build(g):
            return g.apply(Dense(), g.input('v', (3,)), g.parameter('w', (2, 3)), g.parameter('b', (2,)))

        graph, loss = _mse_graph(build, (2,))
        params = NetworkParams({'w': rng.normal(size=(2, 3)), 'b': rng.normal(size=2)})
        before = params.flatten().copy()
        grad_check(graph, loss, {'v': rng.normal(size=3), 'target': rng.normal(size=2)}, params)
        assert np.array_equal(params.flatten(), before)


class TestGraphErrors:

    def test_unbound_input(self):
        graph = Graph()
        graph.apply(Identity(), graph.input('x'))
        with pytest.raises(GraphError):
            graph.forward({})

    def test_missing_parameter(self):
        graph = Graph()
        graph.apply(Add(), graph.input('x', (2,)), graph.parameter('b', (2,)))
        with pytest.raises(GraphError):
            graph.forward({'x': np.zeros(2)}, NetworkParams())

    def test_parameter_shape_mismatch(self):
        graph = Graph()
        graph.apply(Add(), graph.input('x', (2,)), graph.parameter('b', (2,)))
        with pytest.raises(ShapeError):
            graph.forward({'x': np.zeros(2)}, NetworkParams({'b': np.zeros(3)}))

    def test_input_shape_mismatch(self):
        graph = Graph()
        graph.input('x', (2, 2))
        with pytest.raises(ShapeError):
            graph.forward({'x': np.zeros((3, 2))})

    def test_op_shape_error_names_node(self):
        graph = Graph()
        graph.apply(Conv2d(), graph.input('x'), graph.input('w'), graph.input('b'))
        with pytest.raises(ShapeError, match='conv2d'):
            graph.forward({'x': np.zeros((2, 4, 4)), 'w': np.zeros((1, 3, 3, 3)), 'b': np.zeros(1)})

    def test_backward_before_forward(self):
        graph = Graph()
        loss = graph.apply(MSELoss(), graph.input('a'), graph.input('b'))
        with pytest.raises(GraphError):
            graph.backward(loss)

    def test_non_scalar_loss(self):
        graph = Graph()
        out = graph.apply(Scale(2.0), graph.input('x'))
        graph.forward({'x': np.ones(3)})
        with pytest.raises(GraphError):
            graph.backward(out)

    def test_unknown_input_gradient(self):
        graph = Graph()
        loss = graph.apply(MSELoss(), graph.input('a'), graph.input('b'))
        graph.forward({'a': np.ones(2), 'b': np.zeros(2)})
        with pytest.raises(GraphError):
            graph.backward(loss, wrt_inputs=['c'])

    def test_duplicate_leaf(self):
        graph = Graph()
        graph.input('x')
        with pytest.raises(GraphError):
            graph.parameter('x', (1,))

    def test_arity(self):
        graph = Graph()
        with pytest.raises(ShapeError):
            graph.apply(Add(), graph.input('x'))

    def test_unused_parameter_gets_zero_gradient(self):
        graph = Graph()
        graph.parameter('unused', (2, 2))
        loss = graph.apply(MSELoss(), graph.input('a'), graph.input('b'))
        graph.forward({'a': np.ones(2), 'b': np.zeros(2)}, NetworkParams({'unused': np.ones((2, 2))}))
        grads = graph.backward(loss)
        assert np.array_equal(grads.params['unused'], np.zeros((2, 2)))


class TestAdam:

    def test_first_step_moves_by_lr(self):
        params = NetworkParams({'w': np.array([1.0, -2.0])})
        grads = NetworkParams({'w': np.array([0.5, -4.0])})
        state = AdamState(lr=0.1)
        updated = adam_step(params, grads, state)
        assert np.allclose(updated['w'], [0.9, -1.9], atol=1e-7)
        assert state.step == 1

    def test_minimizes_quadratic(self):
        params = NetworkParams({'w': np.array([0.0, 10.0])})
        target = np.array([3.0, -1.0])
        state = AdamState(lr=0.01)
        for _ in range(3000):
            params = adam_step(params, NetworkParams({'w': 2.0 * (params['w'] - target)}), state)
        assert np.allclose(params['w'], target, atol=0.05)

    def test_non_finite_gradient_rejected(self):
        params = NetworkParams({'w': np.ones(2)})
        state = AdamState(lr=0.1)
        with pytest.raises(OptimizerError):
            adam_step(params, NetworkParams({'w': np.array([np.nan, 0.0])}), state)
        assert state.step == 0
        assert state.m == {}
        assert np.array_equal(params['w'], np.ones(2))

    def test_incompatible_gradients(self):
        with pytest.raises(ShapeError):
            adam_step(NetworkParams({'w': np.ones(2)}), NetworkParams({'w': np.ones(3)}), AdamState())

    def test_invalid_hyperparameters(self):
        with pytest.raises(ParameterError):
            AdamState(lr=-1.0)
        with pytest.raises(ParameterError):
            AdamState(beta1=1.0)


class TestNetworkParams:

    def test_unknown_name(self):
        with pytest.raises(ParameterError):
            NetworkParams()['missing']

    def test_copy_is_independent(self):
        params = NetworkParams({'a': np.zeros(2)})
        clone = params.copy()
        clone['a'][0] = 1.0
        assert params['a'][0] == 0.0

    def test_add_scaled_and_flatten(self):
        params = NetworkParams({'a': np.ones(2), 'b': np.zeros((1, 2))})
        step = NetworkParams({'a': np.ones(2), 'b': np.ones((1, 2))})
        result = params.add_scaled(step, -0.5)
        assert np.array_equal(result.flatten(), [0.5, 0.5, -0.5, -0.5])
        assert result.count == 4

    def test_kaiming_uniform_bound(self):
        weights = kaiming_uniform((64, 16, 3, 3), fan_in=144, rng=Rng(0))
        bound = np.sqrt(6.0 / (1.04 * 144))
        assert np.all(np.abs(weights) <= bound)
        assert np.array_equal(weights, kaiming_uniform((64, 16, 3, 3), fan_in=144, rng=Rng(0)))
