#!/usr/bin/env python3
"""
Unit tests for the dense networks, optimizers and checkpoints
"""

import json
import os
import sys
import tempfile
import unittest

import numpy as np

# Add project root to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from reliable_slicing.core.networks import (ACTIVATIONS, AdamOptimizer, DenseLayer, DenseNet, _activate,
                                            GradientTape, SGDOptimizer, load_checkpoint,
                                            numerical_gradient, relative_error, save_checkpoint,
                                            soft_update)
from reliable_slicing.errors import CheckpointError, ShapeMismatchError, StaleCacheError


def scalar_net(w: float, b: float = 0.0) -> DenseNet:
    return DenseNet([DenseLayer(np.array([[w]]), np.array([b]), 'identity')])


def near_relu_kink(net: DenseNet, x: np.ndarray, margin: float = 1e-4) -> bool:
    """True if a rectifier pre-activation lies within `margin` of zero."""
    a = x
    for layer in net.layers:
        z = a @ layer.weights + layer.biases
        if layer.activation == 'relu' and np.min(np.abs(z)) < margin:
            return True
        a = _activate(z, layer.activation)
    return False


class TestForwardBackward(unittest.TestCase):
    """Forward evaluation and reverse-mode gradients."""

    def test_identity_network(self):
        net = DenseNet([DenseLayer(np.eye(3), np.zeros(3), 'identity')])
        x = np.array([0.3, -1.2, 4.0])
        np.testing.assert_array_equal(net.forward(x), x)

    def test_zero_sigmoid_network(self):
        net = DenseNet([DenseLayer(np.zeros((2, 3)), np.zeros(3), 'sigmoid')])
        np.testing.assert_array_equal(net.forward(np.array([5.0, -2.0])), [0.5, 0.5, 0.5])

    def test_forward_is_pure(self):
        net = DenseNet.build((2, 8, 1), np.random.default_rng(0))
        x = np.array([0.1, 0.7])
        np.testing.assert_array_equal(net.forward(x), net.forward(x))

    def test_dimension_mismatch(self):
        net = DenseNet.build((2, 4, 1), np.random.default_rng(0))
        with self.assertRaises(ShapeMismatchError):
            net.forward(np.ones(3))
        with self.assertRaises(ShapeMismatchError):
            DenseNet([DenseLayer(np.ones((2, 3)), np.zeros(3)), DenseLayer(np.ones((4, 1)), np.zeros(1))])

    def test_linear_gradient(self):
        net = scalar_net(1.7)
        x = np.array([2.5])
        net.forward(x)
        tape, grad_x = net.backward(x, np.array([1.0]))
        self.assertAlmostEqual(tape.weights[0][0, 0], 2.5)
        self.assertAlmostEqual(tape.biases[0][0], 1.0)
        self.assertAlmostEqual(grad_x[0], 1.7)

    def test_zero_seed_gives_zero_tape(self):
        net = DenseNet.build((3, 5, 2), np.random.default_rng(1))
        x = np.array([0.2, 0.4, 0.6])
        net.forward(x)
        tape, grad_x = net.backward(x, np.zeros(2))
        self.assertEqual(tape.global_norm(), 0.0)
        np.testing.assert_array_equal(grad_x, np.zeros(3))

    def test_stale_cache(self):
        net = DenseNet.build((2, 3, 1), np.random.default_rng(2))
        with self.assertRaises(StaleCacheError):
            net.backward(np.ones(2), np.ones(1))
        net.forward(np.ones(2))
        with self.assertRaises(StaleCacheError):
            net.backward(np.zeros(2), np.ones(1))
        net.predict(np.zeros(2))
        with self.assertRaises(StaleCacheError):
            net.backward(np.zeros(2), np.ones(1))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(123)
        worst = 0.0
        for trial in range(120):
            depth = 1 + trial % 3
            sizes = [int(rng.integers(1, 5)) for _ in range(depth + 1)]
            hidden = ACTIVATIONS[trial % 3]
            output = ACTIVATIONS[(trial // 3) % 3]
            while True:
                net = DenseNet.build(sizes, rng, hidden_activation=hidden, output_activation=output)
                x = rng.normal(size=(3, sizes[0]))
                if not near_relu_kink(net, x):
                    break
            seed = rng.normal(size=(3, sizes[-1]))

            net.forward(x)
            analytic, _ = net.backward(x, seed)
            numeric = numerical_gradient(lambda n: float(np.sum(seed * n.predict(x))), net, eps=1e-5)
            worst = max(worst, relative_error(analytic.flatten(), numeric.flatten()))
        self.assertLess(worst, 1e-5)

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        net = DenseNet.build((3, 6, 1), rng, hidden_activation='sigmoid')
        x = np.array([0.3, -0.4, 0.9])
        net.forward(x)
        _, grad_x = net.backward(x, np.ones(1))
        numeric = np.zeros(3)
        for i in range(3):
            step = np.zeros(3)
            step[i] = 1e-5
            numeric[i] = (net.predict(x + step)[0] - net.predict(x - step)[0]) / 2e-5
        self.assertLess(relative_error(grad_x, numeric), 1e-6)

    def test_batch_gradients_are_summed(self):
        net = DenseNet.build((2, 4, 1), np.random.default_rng(8))
        rows = np.array([[0.1, 0.2], [0.5, -0.3]])
        net.forward(rows)
        batch_tape, _ = net.backward(rows, np.ones((2, 1)))
        total = np.zeros_like(batch_tape.flatten())
        for row in rows:
            net.forward(row)
            tape, _ = net.backward(row, np.ones(1))
            total += tape.flatten()
        np.testing.assert_allclose(batch_tape.flatten(), total)

    def test_build_final_scale(self):
        net = DenseNet.build((2, 64, 64, 1), np.random.default_rng(0),
                             output_activation='sigmoid', final_scale=3e-3)
        self.assertLessEqual(np.abs(net.layers[-1].weights).max(), 3e-3)
        self.assertEqual(net.shapes(), [(2, 64), (64, 64), (64, 1)])


class TestOptimizers(unittest.TestCase):
    """Adaptive-moment and plain gradient steps."""

    def test_zero_gradient_leaves_parameters(self):
        net = DenseNet.build((2, 3, 1), np.random.default_rng(0))
        before = [p.copy() for p in net.parameters()]
        AdamOptimizer(net, lr=1e-2).step(net, GradientTape.zeros_like(net))
        for old, new in zip(before, net.parameters()):
            np.testing.assert_array_equal(old, new)

    def test_positive_gradient_descends(self):
        net = scalar_net(1.0)
        tape = GradientTape([np.array([[0.5]])], [np.array([0.0])])
        AdamOptimizer(net, lr=1e-2).step(net, tape)
        self.assertLess(net.layers[0].weights[0, 0], 1.0)

    def test_quadratic_bowl(self):
        net = scalar_net(2.0)
        optimizer = AdamOptimizer(net, lr=1e-2)
        for _ in range(500):
            w = net.layers[0].weights[0, 0]
            optimizer.step(net, GradientTape([np.array([[2.0 * (w - 3.0)]])], [np.array([0.0])]))
        self.assertLess(abs(net.layers[0].weights[0, 0] - 3.0), 1e-2)

    def test_sgd_step(self):
        net = scalar_net(1.0)
        SGDOptimizer(net, lr=0.1).step(net, GradientTape([np.array([[2.0]])], [np.array([0.0])]))
        self.assertAlmostEqual(net.layers[0].weights[0, 0], 0.8)

    def test_clipping_bounds_step(self):
        net = scalar_net(0.0)
        SGDOptimizer(net, lr=1.0, clip_norm=1.0).step(net, GradientTape([np.array([[100.0]])], [np.array([0.0])]))
        self.assertAlmostEqual(net.layers[0].weights[0, 0], -1.0)

    def test_parameters_stay_finite(self):
        rng = np.random.default_rng(3)
        net = DenseNet.build((3, 16, 16, 1), rng)
        optimizer = AdamOptimizer(net, lr=5e-3, clip_norm=1.0)
        x = rng.uniform(0, 1, size=(64, 3))
        y = rng.uniform(-1, 0, size=64)
        for _ in range(300):
            q = net.forward(x)[:, 0]
            tape, _ = net.backward(x, (-2.0 * (y - q) / y.size).reshape(-1, 1))
            optimizer.step(net, tape)
        self.assertTrue(net.is_finite())


class TestSoftUpdate(unittest.TestCase):
    """Polyak target tracking."""

    def test_full_copy_and_no_op(self):
        online = DenseNet.build((2, 3, 1), np.random.default_rng(0))
        target = DenseNet.build((2, 3, 1), np.random.default_rng(1))
        untouched = target.copy()
        soft_update(target, online, 0.0)
        for a, b in zip(target.parameters(), untouched.parameters()):
            np.testing.assert_array_equal(a, b)
        soft_update(target, online, 1.0)
        for a, b in zip(target.parameters(), online.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_midpoint(self):
        target = scalar_net(0.0)
        soft_update(target, scalar_net(2.0), 0.5)
        self.assertEqual(target.layers[0].weights[0, 0], 1.0)

    def test_geometric_contraction(self):
        target = scalar_net(0.0)
        online = scalar_net(1.0)
        phi = 0.1
        for k in range(1, 30):
            soft_update(target, online, phi)
            self.assertAlmostEqual(1.0 - target.layers[0].weights[0, 0], (1.0 - phi) ** k)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeMismatchError):
            soft_update(DenseNet.build((2, 3, 1), np.random.default_rng(0)),
                        DenseNet.build((2, 4, 1), np.random.default_rng(0)), 0.5)


class TestCheckpoint(unittest.TestCase):
    """JSON checkpoint container."""

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        net = DenseNet.build((3, 4, 1), rng, output_activation='sigmoid')
        optimizer = AdamOptimizer(net, lr=1e-3)
        net.forward(np.ones(3))
        tape, _ = net.backward(np.ones(3), np.ones(1))
        optimizer.step(net, tape)

        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(os.path.join(tmp, 'ckpt.json'), {'actor': net},
                                   {'actor': optimizer}, {'dual': 0.25})
            loaded = load_checkpoint(path)

        restored = loaded['networks']['actor']
        for a, b in zip(restored.parameters(), net.parameters()):
            np.testing.assert_array_equal(a, b)
        self.assertEqual(restored.layers[-1].activation, 'sigmoid')
        self.assertEqual(loaded['extra']['dual'], 0.25)
        fresh = AdamOptimizer(restored, lr=1e-3)
        fresh.load_state_dict(loaded['optimizers']['actor'])
        self.assertEqual(fresh.t, 1)
        np.testing.assert_array_equal(fresh.m[0], optimizer.m[0])

    def test_missing_and_malformed(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CheckpointError):
                load_checkpoint(os.path.join(tmp, 'absent.json'))
            bad = os.path.join(tmp, 'bad.json')
            with open(bad, 'w', encoding='utf-8') as f:
                json.dump({'format_version': 99, 'networks': {}}, f)
            with self.assertRaises(CheckpointError):
                load_checkpoint(bad)


if __name__ == '__main__':
    unittest.main()
