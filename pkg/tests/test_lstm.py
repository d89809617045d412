import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoforecast.errors import DomainError, ShapeError
from thermoforecast.lstm import (
    PARAM_NAMES,
    AdamState,
    DenseParams,
    LstmNetwork,
    LstmParams,
    LstmState,
    TrainingConfig,
    adam_step,
    backward,
    bptt_gradients,
    central_difference,
    finite_diff_gradients,
    global_norm,
    gradient_check,
    init_params,
    load_network,
    lstm_cell_forward,
    max_relative_error,
    mse_loss,
    network_forward,
    save_network,
    train,
)


def sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def scalar_net(w=1.0, r=1.0, b=0.0, w_fc=1.0, b_fc=0.0, mu=0.0, sigma=1.0):
    """H = I = O = 1 network with the same scalar for every gate."""
    lstm = LstmParams(np.full((4, 1), w), np.full((4, 1), r), np.full(4, b))
    return LstmNetwork(lstm, DenseParams(np.array([[w_fc]]), np.array([b_fc])), mu, sigma)


def scalar_chain(xs, w=1.0, r=1.0, b=0.0, w_fc=1.0, b_fc=0.0, h=0.0, c=0.0):
    """Hand-rolled scalar LSTM with math-module activations."""
    outs = []
    for x in xs:
        pre = w * x + r * h + b
        f = i = o = sigmoid(pre)
        g = math.tanh(pre)
        c = f * c + i * g
        h = o * math.tanh(c)
        outs.append(w_fc * h + b_fc)
    return outs, h, c


def zero_net(H=3, b_fc=0.0):
    lstm = LstmParams(np.zeros((4 * H, 1)), np.zeros((4 * H, H)), np.zeros(4 * H))
    return LstmNetwork(lstm, DenseParams(np.zeros((1, H)), np.array([b_fc])))


class TestInit:
    def test_deterministic(self):
        a, b = init_params(8, 1, 1, seed=3), init_params(8, 1, 1, seed=3)
        for name in PARAM_NAMES:
            assert a.parameters()[name].tobytes() == b.parameters()[name].tobytes()

    def test_paper_shapes(self):
        net = init_params(200, 1, 1, seed=0)
        W_f, R_f, b_f = net.lstm.gate("f")
        assert W_f.shape == (200, 1) and R_f.shape == (200, 200) and b_f.shape == (200,)
        assert net.dense.W.shape == (1, 200)

    def test_biases(self):
        net = init_params(16, 2, 1, seed=0)
        assert np.all(net.lstm.gate("f")[2] == 1.0)
        for gate in "gio":
            assert np.all(net.lstm.gate(gate)[2] == 0.0)
        assert np.all(net.dense.b == 0.0)

    def test_glorot_limits(self):
        net = init_params(50, 1, 1, seed=1)
        assert np.abs(net.lstm.gate("i")[0]).max() <= math.sqrt(6 / 51)
        assert np.abs(net.lstm.gate("o")[1]).max() <= math.sqrt(6 / 100)
        assert np.abs(net.dense.W).max() <= math.sqrt(6 / 51)

    def test_rejects_zero(self):
        with pytest.raises(DomainError):
            init_params(0, 1, 1)


class TestCell:
    def test_all_zero(self):
        net = zero_net(H=5)
        state, cache = lstm_cell_forward(net.lstm, [0.0], LstmState.zeros(5))
        for gate in (cache.f, cache.i, cache.o):
            np.testing.assert_array_equal(gate, 0.5)
        np.testing.assert_array_equal(cache.g, 0.0)
        np.testing.assert_array_equal(state.c, 0.0)
        np.testing.assert_array_equal(state.h, 0.0)

    def test_zero_weights_unit_cell(self):
        net = zero_net(H=1)
        state, _ = lstm_cell_forward(net.lstm, [0.0], LstmState(np.zeros(1), np.ones(1)))
        assert state.c[0] == pytest.approx(0.5, abs=1e-15)
        assert state.h[0] == pytest.approx(0.23105857863000487, abs=1e-15)

    def test_unit_weights(self):
        state, cache = lstm_cell_forward(scalar_net().lstm, [1.0], LstmState.zeros(1))
        assert cache.f[0] == pytest.approx(0.7310585786300049, abs=1e-15)
        assert cache.g[0] == pytest.approx(0.7615941559557649, abs=1e-15)
        assert state.c[0] == pytest.approx(0.5567699411459397, abs=1e-15)
        assert state.h[0] == pytest.approx(0.36960635293570576, abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            lstm_cell_forward(init_params(3).lstm, [1.0, 2.0], LstmState.zeros(3))
        with pytest.raises(ShapeError):
            lstm_cell_forward(init_params(3).lstm, [1.0], LstmState.zeros(4))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(-5, 5))
    def test_gate_ranges_and_cell_growth(self, seed, scale):
        rng = np.random.default_rng(seed)
        net = init_params(6, 2, 1, seed=seed)
        state = LstmState(rng.uniform(-1, 1, 6) * 0.99, rng.normal(scale=3, size=6))
        new, cache = lstm_cell_forward(net.lstm, rng.normal(scale=abs(scale) + 0.1, size=2), state)
        for gate in (cache.f, cache.i, cache.o):
            assert np.all((gate > 0) & (gate < 1))
        assert np.all(np.abs(cache.g) < 1)
        assert np.all(np.abs(new.h) < 1)
        assert np.all(np.abs(new.c) <= np.abs(state.c) + 1)


class TestForward:
    def test_zero_weights_emit_bias(self):
        out, _ = network_forward(zero_net(H=4, b_fc=0.3), np.linspace(-2, 2, 17))
        np.testing.assert_array_equal(out, 0.3)

    def test_length_one(self):
        net = init_params(5, 1, 1, seed=2)
        out, _ = network_forward(net, [0.7])
        state, _ = lstm_cell_forward(net.lstm, [0.7], LstmState.zeros(5))
        np.testing.assert_allclose(out[0], net.dense.W @ state.h + net.dense.b, rtol=1e-15)

    def test_scalar_chain(self):
        params = dict(w=0.8, r=-0.6, b=0.1, w_fc=1.7, b_fc=-0.2)
        xs = [0.5, -1.0, 2.0]
        net = scalar_net(**params)
        out, cache = network_forward(net, xs)
        expected, h, c = scalar_chain(xs, **params)
        np.testing.assert_allclose(out[:, 0], expected, rtol=1e-14)
        assert cache.h[-1, 0] == pytest.approx(h, rel=1e-14)
        assert cache.c[-1, 0] == pytest.approx(c, rel=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 40))
    def test_shape_stability(self, T):
        out, cache = network_forward(init_params(3), np.zeros(T))
        assert out.shape == (T, 1) and cache.h.shape == (T + 1, 3)

    def test_rejects_empty(self):
        with pytest.raises(ShapeError):
            network_forward(init_params(3), np.zeros(0))


class TestLoss:
    @pytest.mark.parametrize("p, t, expected", [
        ([1.0, 2.0], [1.0, 2.0], 0.0),
        ([0.0, 0.0], [1.0, 1.0], 1.0),
        ([1.0, 2.0], [1.0, 4.0], 2.0),
    ])
    def test_examples(self, p, t, expected):
        assert mse_loss(p, t) == expected

    def test_mismatch(self):
        with pytest.raises(ShapeError):
            mse_loss([1.0], [1.0, 2.0])


def random_instance(seed, H=4, T=20):
    rng = np.random.default_rng(seed)
    net = init_params(H, 1, 1, seed=seed)
    for p in net.parameters().values():
        p[...] = rng.normal(scale=0.5, size=p.shape)
    return net, rng.normal(size=(T, 1)), rng.normal(size=(T, 1))


class TestGradients:
    def test_zero_at_own_outputs(self):
        net, x, _ = random_instance(1)
        out, _ = network_forward(net, x)
        grads = bptt_gradients(net, x, out)
        for g in grads.values():
            assert np.all(g == 0.0)

    def test_matches_finite_differences(self):
        net, x, y = random_instance(2)
        err = max_relative_error(bptt_gradients(net, x, y), finite_diff_gradients(net, x, y, 1e-5))
        assert err < 1e-4

    @pytest.mark.parametrize("seed", range(10))
    def test_random_small_instances(self, seed):
        rng = np.random.default_rng(100 + seed)
        H, T = int(rng.integers(1, 9)), int(rng.integers(1, 31))
        net, x, y = random_instance(seed, H, T)
        err = max_relative_error(bptt_gradients(net, x, y), finite_diff_gradients(net, x, y, 1e-5))
        assert err < 1e-4, (H, T, err)

    def test_linear_in_output_gradient(self):
        net, x, y = random_instance(4)
        out, cache = network_forward(net, x)
        d = 2 * (out - y) / out.size
        g1, g2 = backward(net, cache, d), backward(net, cache, 2 * d)
        for name in PARAM_NAMES:
            np.testing.assert_allclose(g2[name], 2 * g1[name], rtol=1e-10, atol=1e-300)

    def test_initial_state_respected(self):
        net, x, y = random_instance(5)
        init = LstmState(np.full(4, 0.3), np.full(4, -0.5))
        err = max_relative_error(bptt_gradients(net, x, y, init),
                                 finite_diff_gradients(net, x, y, 1e-5, init))
        assert err < 1e-4

    def test_parameters_untouched_by_fd(self):
        net, x, y = random_instance(6)
        before = {k: v.copy() for k, v in net.parameters().items()}
        finite_diff_gradients(net, x, y)
        for k, v in net.parameters().items():
            assert np.array_equal(v, before[k])


class TestFiniteDifferences:
    def test_quadratic(self):
        theta = np.array([3.0])
        grad = central_difference(lambda t: float(t[0] ** 2), theta, 1e-5)
        assert grad[0] == pytest.approx(6.0, abs=1e-8)
        assert theta[0] == 3.0

    def test_zero_network_bias_gradients(self):
        net = zero_net(H=3)
        x, y = np.zeros((5, 1)), np.zeros((5, 1))
        fd = finite_diff_gradients(net, x, y)
        an = bptt_gradients(net, x, y)
        for name in ("b", "b_fc"):
            np.testing.assert_allclose(fd[name], an[name], rtol=0, atol=1e-8)

    def test_second_order_convergence(self):
        net, x, y = random_instance(7)
        a = finite_diff_gradients(net, x, y, 1e-5)
        b = finite_diff_gradients(net, x, y, 0.5e-5)
        assert max(np.abs(a[k] - b[k]).max() for k in PARAM_NAMES) < 1e-6

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(DomainError):
            central_difference(lambda t: 0.0, np.zeros(1), 0.0)

    def test_gradient_check_helper(self):
        assert gradient_check(0) < 1e-4


class TestAdam:
    cfg = TrainingConfig(learning_rate=0.01, clip_norm=1e9)

    def test_first_step_magnitude(self):
        for g in (0.3, -2.0, 1e-3):
            params = {"p": np.array([1.0])}
            state = AdamState.zeros_like(params)
            new, _ = adam_step(params, {"p": np.array([g])}, state, self.cfg, 1)
            assert new["p"][0] - 1.0 == pytest.approx(-0.01 * math.copysign(1, g), rel=1e-4)

    def test_zero_gradient(self):
        params = {"p": np.array([1.0, -2.0])}
        new, st_ = adam_step(params, {"p": np.zeros(2)}, AdamState.zeros_like(params), self.cfg, 1)
        np.testing.assert_array_equal(new["p"], params["p"])
        np.testing.assert_array_equal(st_.m["p"], 0.0)

    def test_moments_decay(self):
        params = {"p": np.array([1.0, -2.0])}
        state = AdamState({"p": np.array([0.4, 0.2])}, {"p": np.array([0.5, 0.1])})
        _, st_ = adam_step(params, {"p": np.zeros(2)}, state, self.cfg, 3)
        np.testing.assert_allclose(st_.m["p"], [0.36, 0.18], rtol=1e-15)
        np.testing.assert_allclose(st_.v["p"], [0.4995, 0.0999], rtol=1e-15)

    def test_clipping(self):
        cfg = TrainingConfig(clip_norm=1.0)
        g = np.array([6.0, 8.0])  # norm 10
        params = {"p": np.zeros(2)}
        _, st_ = adam_step(params, {"p": g}, AdamState.zeros_like(params), cfg, 1)
        np.testing.assert_allclose(st_.m["p"], 0.1 * 0.1 * g, rtol=1e-15)
        assert global_norm({"p": g}) == 10.0

    def test_rejects_step_zero(self):
        params = {"p": np.zeros(1)}
        with pytest.raises(DomainError):
            adam_step(params, params, AdamState.zeros_like(params), self.cfg, 0)

    def test_config_validation(self):
        for bad in (dict(epochs=0), dict(learning_rate=0), dict(beta1=1.0), dict(beta2=0.0)):
            with pytest.raises(DomainError):
                TrainingConfig(**bad)


class TestTrain:
    def test_constant_zero_series(self):
        cfg = TrainingConfig(epochs=3, hidden_size=8, seed=0)
        _, history = train(np.zeros(50), cfg)
        assert history[0] < 1e-4

    def test_constant_offset_learned_by_bias(self):
        cfg = TrainingConfig(epochs=400, hidden_size=4, seed=0, learning_rate=0.02)
        _, history = train(np.full(40, 0.5), cfg)
        assert history[-1] < 1e-4 < 0.01 < history[0]

    def test_deterministic(self):
        z = np.sin(np.arange(120) / 5)
        cfg = TrainingConfig(epochs=5, hidden_size=6, seed=11)
        a_net, a = train(z, cfg)
        b_net, b = train(z, cfg)
        assert a == b
        for name in PARAM_NAMES:
            assert a_net.parameters()[name].tobytes() == b_net.parameters()[name].tobytes()

    def test_loss_decreases_on_sine(self):
        z = np.sin(np.arange(200) / 4)
        _, history = train(z, TrainingConfig(epochs=60, hidden_size=8, seed=0, learning_rate=0.02))
        assert history[-1] < 0.1 * history[0]

    def test_too_short(self):
        with pytest.raises(DomainError):
            train([1.0], TrainingConfig(epochs=1, hidden_size=2))

    def test_input_not_mutated(self):
        net = init_params(4, seed=0)
        before = net.lstm.R.copy()
        train(np.sin(np.arange(30.0)), TrainingConfig(epochs=2, hidden_size=4), net=net)
        assert np.array_equal(net.lstm.R, before)


class TestPersistence:
    def test_round_trip_is_lossless(self, tmp_path):
        net = init_params(7, 1, 1, seed=3)
        net.mu, net.sigma = 1234.5678901234567, 0.1 + 0.2
        cfg = TrainingConfig(epochs=12, hidden_size=7, seed=3)
        save_network(net, tmp_path / "m.json", cfg, {"train_count": 10})
        loaded, loaded_cfg, meta = load_network(tmp_path / "m.json")
        for name in PARAM_NAMES:
            assert loaded.parameters()[name].tobytes() == net.parameters()[name].tobytes()
        assert loaded.mu == net.mu and loaded.sigma == net.sigma
        assert loaded_cfg == cfg and meta == {"train_count": 10}

    def test_document_layout(self, tmp_path):
        net = init_params(3, 1, 1, seed=0)
        save_network(net, tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        assert (doc["H"], doc["I"], doc["O"]) == (3, 1, 1)
        for g in "fgio":
            assert np.array(doc[f"R_{g}"]).shape == (3, 3)
            assert np.array_equal(np.array(doc[f"W_{g}"]), net.lstm.gate(g)[0])
        assert np.array(doc["W_fc"]).shape == (1, 3)

    def test_byte_identical_saves(self, tmp_path):
        net = init_params(5, seed=1)
        save_network(net, tmp_path / "a.json")
        save_network(net, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_malformed(self, tmp_path):
        (tmp_path / "m.json").write_text('{"H": 2}')
        with pytest.raises(ShapeError):
            load_network(tmp_path / "m.json")
