import numpy as np
import pytest

from ntklab import network
from ntklab.data import Dataset, synthetic
from ntklab.network import NetworkState, ShapeError


def _toy_state(W, a):
    W = np.asarray(W, dtype=np.float64)
    return NetworkState(W=W.copy(), a=np.asarray(a, dtype=np.float64), W0=W.copy(), V=W.copy())


class TestInit:
    def test_deterministic(self):
        s1, s2 = network.init(16, 4, 0), network.init(16, 4, 0)
        assert np.array_equal(s1.W, s2.W) and np.array_equal(s1.a, s2.a)

    def test_copies_coincide(self):
        s = network.init(8, 3, 1)
        assert np.array_equal(s.W, s.W0) and np.array_equal(s.W, s.V)
        assert s.W is not s.W0 and s.W is not s.V

    def test_signs_are_pm_one(self):
        s = network.init(64, 2, 2)
        assert set(np.unique(s.a)) <= {-1.0, 1.0}

    def test_weight_entries_standard_normal(self):
        # mean over 10^6 entries has sd 1e-3
        s = network.init(100_000, 10, 5)
        assert abs(s.W.mean()) < 0.01
        assert abs(s.W.std() - 1.0) < 0.01

    def test_bad_sizes(self):
        with pytest.raises(ValueError):
            network.init(0, 3, 0)


class TestForward:
    def test_single_neuron_aligned(self):
        # one neuron, w = x, a = +1: f(x) = relu(<x,x>)/sqrt(1) = 1
        s = _toy_state([[0.6], [0.8]], [1.0])
        out = network.forward(s, np.array([[0.6, 0.8]]))
        assert out[0] == pytest.approx(1.0)

    def test_single_neuron_negative_sign(self):
        s = _toy_state([[0.6], [0.8]], [-1.0])
        out = network.forward(s, np.array([[0.6, 0.8]]))
        assert out[0] == pytest.approx(-1.0)

    def test_inactive_neuron_contributes_zero(self):
        s = _toy_state([[1.0], [0.0]], [1.0])
        out = network.forward(s, np.array([[-1.0, 0.0]]))
        assert out[0] == 0.0

    def test_paired_neurons_cancel(self):
        # identical weights with opposite signs cancel exactly
        w = np.array([0.6, 0.8])
        s = _toy_state(np.column_stack([w, w]), [1.0, -1.0])
        X = network._check_features(s, np.random.default_rng(0).standard_normal((5, 2)))
        assert np.array_equal(network.forward(s, X), np.zeros(5))

    def test_width_scaling(self):
        # duplicating each neuron k times multiplies outputs by k/sqrt(k) = sqrt(k)
        rng = np.random.default_rng(3)
        W = rng.standard_normal((4, 6))
        a = rng.choice([-1.0, 1.0], 6)
        X = network.forward(_toy_state(W, a), np.eye(4))
        X4 = network.forward(_toy_state(np.tile(W, 4), np.tile(a, 4)), np.eye(4))
        assert np.allclose(X4, 2.0 * X)

    def test_shape_check(self):
        s = network.init(4, 3, 0)
        with pytest.raises(ShapeError):
            network.forward(s, np.ones((2, 5)))


class TestLossResidual:
    def test_residual_definition(self):
        ds = synthetic(6, 3, 0)
        s = network.init(10, 3, 1)
        assert np.allclose(network.residual(s, ds), network.forward(s, ds.X) - ds.y)

    def test_loss_no_sample_average(self):
        # loss = 0.5 * sum xi^2, no 1/n: duplicate-free scaling check
        ds = synthetic(8, 3, 0)
        s = network.init(10, 3, 1)
        xi = network.residual(s, ds)
        assert network.loss(s, ds) == pytest.approx(0.5 * float(xi @ xi))

    def test_zero_residual_zero_loss(self):
        s = _toy_state([[0.6], [0.8]], [1.0])
        ds = Dataset(np.array([[0.6, 0.8]]), np.array([1.0]))
        assert network.loss(s, ds) == 0.0
        assert np.array_equal(network.gradient(s, ds), np.zeros((2, 1)))


class TestGradient:
    def test_hand_computed_single_neuron(self):
        # m=1, a=+1, w=x => f=1; y=0 => xi=1; grad = xi * a * x / sqrt(1) = x
        s = _toy_state([[0.6], [0.8]], [1.0])
        ds = Dataset(np.array([[0.6, 0.8]]), np.array([0.0]))
        g = network.gradient(s, ds)
        assert np.allclose(g[:, 0], [0.6, 0.8])

    def test_inactive_neuron_zero_gradient(self):
        s = _toy_state([[-1.0], [0.0]], [1.0])
        ds = Dataset(np.array([[1.0, 0.0]]), np.array([1.0]))
        assert np.array_equal(network.gradient(s, ds), np.zeros((2, 1)))

    def test_kink_counts_as_active(self):
        # preactivation exactly zero: the indicator is 1, not 0
        s = _toy_state([[0.0], [1.0]], [1.0])
        ds = Dataset(np.array([[1.0, 0.0]]), np.array([-1.0]))
        g = network.gradient(s, ds)
        # xi = 0 - (-1) = 1; grad = xi * a * x = (1, 0)
        assert np.allclose(g[:, 0], [1.0, 0.0])

    def test_precomputed_residual_matches(self):
        ds = synthetic(6, 4, 0)
        s = network.init(12, 4, 1)
        xi = network.residual(s, ds)
        assert np.array_equal(network.gradient(s, ds), network.gradient(s, ds, xi))

    def test_column_norm_bound(self):
        # each neuron's gradient has norm <= sqrt(n)*||xi|| / sqrt(m)
        ds = synthetic(20, 5, 2)
        s = network.init(30, 5, 3)
        g = network.gradient(s, ds)
        xi = network.residual(s, ds)
        bound = np.sqrt(ds.n) * np.linalg.norm(xi) / np.sqrt(s.m)
        assert np.linalg.norm(g, axis=0).max() <= bound + 1e-12

    @pytest.mark.parametrize("trial", range(20))
    def test_finite_difference(self, trial):
        rng = np.random.default_rng(trial)
        n, d, m = 5, 4, 6
        ds = synthetic(n, d, trial)
        s = network.init(m, d, trial + 100)
        g = network.gradient(s, ds)
        h = 1e-6
        checked = 0
        for i in range(d):
            for r in range(m):
                # skip coordinates whose perturbation can cross an
                # activation kink: any tiny preactivation disqualifies
                # the whole column r
                if np.abs(ds.X @ s.W[:, r]).min() < 1e-4:
                    continue
                e = np.zeros((d, m))
                e[i, r] = h
                lp = network.loss(_shift(s, e), ds)
                lm = network.loss(_shift(s, -e), ds)
                fd = (lp - lm) / (2 * h)
                assert g[i, r] == pytest.approx(fd, rel=1e-5, abs=1e-9)
                checked += 1
        assert checked > 0


def _shift(s: NetworkState, delta: np.ndarray) -> NetworkState:
    return NetworkState(W=s.W + delta, a=s.a, W0=s.W0, V=s.V)


class TestActivationPattern:
    def test_at_init_vs_current(self):
        ds = synthetic(6, 3, 0)
        s = network.init(8, 3, 1)
        assert np.array_equal(
            network.activation_pattern(s, ds.X),
            network.activation_pattern(s, ds.X, at_init=True),
        )
        s.W = -s.W
        now = network.activation_pattern(s, ds.X)
        init = network.activation_pattern(s, ds.X, at_init=True)
        # negating W flips every strict-sign indicator
        strict = (ds.X @ s.W0) != 0
        assert np.array_equal((now != init), strict)

    def test_shape(self):
        ds = synthetic(6, 3, 0)
        s = network.init(8, 3, 1)
        assert network.activation_pattern(s, ds.X).shape == (6, 8)
