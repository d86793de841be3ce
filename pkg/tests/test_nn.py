import numpy as np
import pytest

from tashkeel import nn
from tashkeel.nn import (
    Adam,
    AdaGrad,
    CrfParams,
    LstmDirectionParams,
    ParameterSet,
    Tensor,
    average_checkpoints,
    bilstm_forward,
    bng_normalize,
    checkpoint_bytes,
    checkpoint_from_bytes,
    clip_gradients,
    crf_log_likelihood,
    crf_log_partition,
    crf_path_score,
    crf_viterbi,
    cross_entropy,
    dense_forward,
    dropout,
    embedding,
    load_checkpoint,
    lstm_forward,
    no_grad,
    relu,
    save_checkpoint,
    softmax,
    softmax_cross_entropy,
)

from helpers import enumerate_crf, finite_difference_grads, max_relative_error

TOL = 1e-4


def _param(rng, shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True, dtype=np.float64)


def _check_gradients(loss_fn, tensors):
    """loss_fn rebuilds the graph and returns the scalar loss Tensor."""
    loss = loss_fn()
    for t in tensors:
        t.grad = None
    loss.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    numeric = finite_difference_grads(lambda: loss_fn().item(), [t.data for t in tensors])
    for num, ana in zip(numeric, analytic):
        assert max_relative_error(num, ana) <= TOL


class TestElementaryOps:
    def test_softmax_uniform(self):
        y = softmax(Tensor(np.zeros(3)))
        assert np.allclose(y.data, [1 / 3] * 3)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        y = softmax(Tensor(rng.standard_normal((5, 7)) * 10))
        assert np.allclose(y.data.sum(axis=1), 1.0, atol=1e-6)

    def test_relu_values(self):
        y = relu(Tensor(np.array([-1.0, 2.0])))
        assert list(y.data) == [0.0, 2.0]

    def test_relu_gradient_at_two(self):
        x = Tensor(np.array([2.0]), requires_grad=True, dtype=np.float64)
        relu(x).sum().backward()
        assert x.grad[0] == 1.0

    def test_cross_entropy_of_correct_one_hot_is_zero(self):
        probs = Tensor(np.array([[0.0, 1.0, 0.0]]))
        loss = cross_entropy(probs, np.array([1]))
        assert loss.item() == pytest.approx(0.0)

    def test_cross_entropy_nonnegative(self):
        rng = np.random.default_rng(1)
        logits = rng.standard_normal((10, 4))
        probs = softmax(Tensor(logits))
        loss = cross_entropy(probs, rng.integers(0, 4, size=10))
        assert loss.item() >= 0.0

    def test_gradient_of_constant_loss_is_zero(self):
        w = Tensor(np.ones((2, 2)), requires_grad=True, dtype=np.float64)
        loss = Tensor(np.array(5.0), requires_grad=True)
        loss.backward()
        assert w.grad is None  # never touched by the graph


class TestFiniteDifferences:
    def test_dense_layer(self):
        rng = np.random.default_rng(10)
        x = _param(rng, (3, 4))
        w = _param(rng, (4, 2))
        b = _param(rng, (2,))
        _check_gradients(lambda: dense_forward(x, w, b).sum(), [x, w, b])

    def test_relu_chain(self):
        rng = np.random.default_rng(11)
        x = _param(rng, (5, 3))
        _check_gradients(lambda: relu(x).sum(), [x])

    def test_softmax_cross_entropy(self):
        rng = np.random.default_rng(12)
        logits = _param(rng, (6, 5))
        targets = rng.integers(0, 5, size=6)
        _check_gradients(lambda: softmax_cross_entropy(logits, targets)[0], [logits])

    def test_softmax_cross_entropy_with_mask(self):
        rng = np.random.default_rng(13)
        logits = _param(rng, (6, 5))
        targets = rng.integers(0, 5, size=6)
        mask = np.array([1, 1, 0, 1, 0, 1], dtype=np.float64)
        _check_gradients(lambda: softmax_cross_entropy(logits, targets, mask)[0], [logits])

    def test_standalone_softmax(self):
        rng = np.random.default_rng(14)
        x = _param(rng, (4, 3))
        weights = Tensor(rng.standard_normal((4, 3)))
        _check_gradients(lambda: (softmax(x) * weights).sum(), [x])

    def test_dropout_off_is_identity_with_unit_gradient(self):
        rng = np.random.default_rng(15)
        x = _param(rng, (4, 4))
        y = dropout(x, 0.5, train=False, rng=np.random.default_rng(0))
        assert y is x
        _check_gradients(
            lambda: dropout(x, 0.5, train=False, rng=np.random.default_rng(0)).sum(), [x]
        )

    def test_dropout_train_mode_with_fixed_mask(self):
        rng = np.random.default_rng(16)
        x = _param(rng, (6, 6))
        _check_gradients(
            lambda: dropout(x, 0.25, train=True, rng=np.random.default_rng(99)).sum(), [x]
        )

    def test_embedding(self):
        rng = np.random.default_rng(17)
        w = _param(rng, (7, 3))
        ids = rng.integers(0, 7, size=(2, 5))
        weights = Tensor(rng.standard_normal((2, 5, 3)))
        _check_gradients(lambda: (embedding(w, ids) * weights).sum(), [w])

    def test_lstm_cell(self):
        rng = np.random.default_rng(18)
        hidden = 2
        params = LstmDirectionParams(
            wx=_param(rng, (3, 4 * hidden)),
            wh=_param(rng, (hidden, 4 * hidden)),
            b=_param(rng, (4 * hidden,)),
        )
        xs = [Tensor(rng.standard_normal((2, 3))) for _ in range(3)]

        def loss_fn():
            hs = lstm_forward(xs, params)
            return nn.concat(hs, axis=0).sum()

        _check_gradients(loss_fn, [params.wx, params.wh, params.b])

    def test_bilstm(self):
        rng = np.random.default_rng(19)
        hidden = 2
        fwd = LstmDirectionParams(
            wx=_param(rng, (3, 4 * hidden)),
            wh=_param(rng, (hidden, 4 * hidden)),
            b=_param(rng, (4 * hidden,)),
        )
        bwd = LstmDirectionParams(
            wx=_param(rng, (3, 4 * hidden)),
            wh=_param(rng, (hidden, 4 * hidden)),
            b=_param(rng, (4 * hidden,)),
        )
        xs = [Tensor(rng.standard_normal((2, 3))) for _ in range(3)]
        weights = Tensor(rng.standard_normal((6, 2 * hidden)))

        def loss_fn():
            hs = bilstm_forward(xs, fwd, bwd)
            return (nn.concat(hs, axis=0) * weights).sum()

        _check_gradients(loss_fn, [fwd.wx, fwd.wh, fwd.b, bwd.wx, bwd.wh, bwd.b])

    def test_crf_loss(self):
        rng = np.random.default_rng(20)
        n = 4
        emissions = _param(rng, (5, n))
        crf = CrfParams(
            transitions=_param(rng, (n, n)),
            start=_param(rng, (n,)),
            end=_param(rng, (n,)),
        )
        labels = rng.integers(0, n, size=5)
        _check_gradients(
            lambda: crf_log_likelihood(emissions, labels, crf),
            [emissions, crf.transitions, crf.start, crf.end],
        )


class TestLstmBehavior:
    def test_zero_weights_give_zero_hidden(self):
        hidden = 3
        params = LstmDirectionParams(
            wx=Tensor(np.zeros((2, 4 * hidden))),
            wh=Tensor(np.zeros((hidden, 4 * hidden))),
            b=Tensor(np.zeros(4 * hidden)),
        )
        xs = [Tensor(np.ones((1, 2))) for _ in range(4)]
        hs = lstm_forward(xs, params)
        assert all(np.allclose(h.data, 0.0) for h in hs)

    def test_length_one_forward_equals_reversed_backward(self):
        rng = np.random.default_rng(21)
        hidden = 3
        params = LstmDirectionParams(
            wx=Tensor(rng.standard_normal((2, 4 * hidden))),
            wh=Tensor(rng.standard_normal((hidden, 4 * hidden))),
            b=Tensor(rng.standard_normal(4 * hidden)),
        )
        xs = [Tensor(rng.standard_normal((2, 2)))]
        fwd = lstm_forward(xs, params, reverse=False)
        bwd = lstm_forward(xs, params, reverse=True)
        assert np.allclose(fwd[0].data, bwd[0].data)

    def test_reverse_reads_input_backwards(self):
        rng = np.random.default_rng(22)
        hidden = 2
        params = LstmDirectionParams(
            wx=Tensor(rng.standard_normal((2, 4 * hidden))),
            wh=Tensor(rng.standard_normal((hidden, 4 * hidden))),
            b=Tensor(rng.standard_normal(4 * hidden)),
        )
        xs = [Tensor(rng.standard_normal((1, 2))) for _ in range(3)]
        rev = lstm_forward(xs, params, reverse=True)
        flipped = lstm_forward(xs[::-1], params, reverse=False)
        for a, b in zip(rev, flipped[::-1]):
            assert np.allclose(a.data, b.data)


class TestOptimizers:
    def test_zero_gradient_keeps_adam_parameters(self):
        params = ParameterSet()
        params.add("w", np.array([1.0, 2.0], dtype=np.float64))
        opt = Adam()
        opt.step(params, {"w": np.zeros(2)})
        assert np.array_equal(params["w"].data, [1.0, 2.0])

    def test_adam_first_step_closed_form(self):
        params = ParameterSet()
        params.add("w", np.array([0.0], dtype=np.float64))
        opt = Adam(lr=0.001, beta1=0.9, beta2=0.999, eps=1e-7)
        opt.step(params, {"w": np.array([1.0])})
        # bias-corrected first step is -lr / (1 + eps)
        assert params["w"].data[0] == pytest.approx(-0.001, abs=1e-6)

    def test_adagrad_second_step_smaller(self):
        params = ParameterSet()
        params.add("w", np.array([0.0], dtype=np.float64))
        opt = AdaGrad(lr=0.01)
        opt.step(params, {"w": np.array([1.0])})
        first = abs(params["w"].data[0])
        before = params["w"].data[0]
        opt.step(params, {"w": np.array([1.0])})
        second = abs(params["w"].data[0] - before)
        assert second < first

    def test_shape_mismatch_rejected(self):
        params = ParameterSet()
        params.add("w", np.zeros(3))
        with pytest.raises(ValueError):
            Adam().step(params, {"w": np.zeros(2)})


class TestBng:
    def test_three_four_block(self):
        out = bng_normalize({"w": np.array([3.0, 4.0])})
        assert np.allclose(out["w"], [0.6, 0.8], atol=1e-6)

    def test_zero_block_unchanged(self):
        out = bng_normalize({"w": np.zeros(4)})
        assert np.array_equal(out["w"], np.zeros(4))

    def test_unit_norm_and_direction(self):
        rng = np.random.default_rng(30)
        grads = {f"b{i}": rng.standard_normal((3, 4)) * 10.0 ** float(rng.integers(-3, 4))
                 for i in range(8)}
        out = bng_normalize(grads)
        for name, g in grads.items():
            n = np.linalg.norm(out[name])
            assert abs(n - 1.0) <= 1e-6
            cos = float((g * out[name]).sum() / (np.linalg.norm(g) * n))
            assert cos == pytest.approx(1.0, abs=1e-9)

    def test_clip_gradients(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        clipped = clip_gradients(grads, 1.0)
        total = np.sqrt(sum(float(np.sum(g ** 2)) for g in clipped.values()))
        assert total == pytest.approx(1.0)
        untouched = clip_gradients(grads, 10.0)
        assert np.array_equal(untouched["a"], grads["a"])


class TestCrfOracles:
    def test_single_step_zero_transitions(self):
        rng = np.random.default_rng(40)
        n = 4
        emissions = rng.standard_normal((1, n))
        crf = CrfParams(
            transitions=Tensor(np.zeros((n, n)), dtype=np.float64),
            start=Tensor(rng.standard_normal(n), dtype=np.float64),
            end=Tensor(rng.standard_normal(n), dtype=np.float64),
        )
        scores = emissions[0] + crf.start.data + crf.end.data
        m = scores.max()
        expected = m + np.log(np.exp(scores - m).sum())
        log_z = crf_log_partition(Tensor(emissions, dtype=np.float64), crf).item()
        assert log_z == pytest.approx(expected, abs=1e-10)
        assert crf_viterbi(emissions, crf) == [int(scores.argmax())]

    def test_random_instances_match_enumeration(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            steps = int(rng.integers(1, 6))
            n = int(rng.integers(2, 5))
            emissions = rng.standard_normal((steps, n))
            transitions = rng.standard_normal((n, n))
            start = rng.standard_normal(n)
            end = rng.standard_normal(n)
            crf = CrfParams(
                transitions=Tensor(transitions, dtype=np.float64),
                start=Tensor(start, dtype=np.float64),
                end=Tensor(end, dtype=np.float64),
            )
            oracle_log_z, oracle_path = enumerate_crf(emissions, transitions, start, end)
            log_z = crf_log_partition(Tensor(emissions, dtype=np.float64), crf).item()
            assert abs(log_z - oracle_log_z) <= 1e-8
            assert crf_viterbi(emissions, crf) == oracle_path

    def test_uniform_ties_break_to_zero_path(self):
        n = 3
        crf = CrfParams(
            transitions=Tensor(np.zeros((n, n))),
            start=Tensor(np.zeros(n)),
            end=Tensor(np.zeros(n)),
        )
        path = crf_viterbi(np.zeros((4, n)), crf)
        assert path == [0, 0, 0, 0]

    def test_path_score_plus_likelihood_consistency(self):
        rng = np.random.default_rng(42)
        n = 3
        emissions = Tensor(rng.standard_normal((4, n)), dtype=np.float64)
        crf = CrfParams(
            transitions=Tensor(rng.standard_normal((n, n)), dtype=np.float64),
            start=Tensor(rng.standard_normal(n), dtype=np.float64),
            end=Tensor(rng.standard_normal(n), dtype=np.float64),
        )
        labels = np.array([0, 2, 1, 1])
        nll = crf_log_likelihood(emissions, labels, crf).item()
        log_z = crf_log_partition(emissions, crf).item()
        path = crf_path_score(emissions, labels, crf).item()
        assert nll == pytest.approx(log_z - path, abs=1e-10)
        assert nll >= 0.0  # log Z dominates any single path


class TestAveraging:
    def _snapshot(self, rng) -> ParameterSet:
        params = ParameterSet()
        params.add("a", rng.standard_normal((3, 2)))
        params.add("b", rng.standard_normal(4))
        return params

    def test_identical_snapshots(self):
        rng = np.random.default_rng(50)
        snap = self._snapshot(rng)
        out = average_checkpoints([snap.copy(), snap.copy(), snap.copy()])
        for name, t in out.items():
            assert np.allclose(t.data, snap[name].data)

    def test_two_point_mean(self):
        a = ParameterSet()
        a.add("w", np.zeros(3))
        b = ParameterSet()
        b.add("w", np.full(3, 2.0))
        out = average_checkpoints([a, b])
        assert np.array_equal(out["w"].data, np.ones(3))

    def test_matches_elementwise_recomputation(self):
        rng = np.random.default_rng(51)
        snaps = [self._snapshot(np.random.default_rng(i)) for i in range(5)]
        out = average_checkpoints(snaps)
        for name in snaps[0].names():
            stacked = np.stack([s[name].data for s in snaps])
            manual = np.empty_like(stacked[0])
            for idx in np.ndindex(manual.shape):
                manual[idx] = sum(s[name].data[idx] for s in snaps) / len(snaps)
            assert np.allclose(out[name].data, manual, atol=1e-12)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            average_checkpoints([])

    def test_mismatched_names_rejected(self):
        a = ParameterSet()
        a.add("x", np.zeros(2))
        b = ParameterSet()
        b.add("y", np.zeros(2))
        with pytest.raises(ValueError):
            average_checkpoints([a, b])


class TestCheckpointIO:
    def test_bit_exact_roundtrip(self, tmp_path):
        rng = np.random.default_rng(60)
        params = ParameterSet()
        params.add("embedding/W", rng.standard_normal((7, 4)).astype(np.float32))
        params.add("dense/W", rng.standard_normal((4, 3)).astype(np.float64))
        params.add("dense/b", np.zeros(3, dtype=np.float32))
        path = tmp_path / "model.ckpt"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path)
        assert loaded.names() == params.names()
        for name, t in params.items():
            assert loaded[name].data.dtype == t.data.dtype
            assert np.array_equal(loaded[name].data, t.data)

    def test_bytes_roundtrip_stable(self):
        rng = np.random.default_rng(61)
        params = ParameterSet()
        params.add("w", rng.standard_normal((5, 5)).astype(np.float32))
        blob = checkpoint_bytes(params)
        again = checkpoint_bytes(checkpoint_from_bytes(blob))
        assert blob == again

    def test_reject_garbage(self):
        with pytest.raises(ValueError):
            checkpoint_from_bytes(b"not a checkpoint")


class TestNoGrad:
    def test_no_graph_recorded(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            y = relu(x)
        assert y._parents == ()
        assert not y.requires_grad

    def test_duplicate_block_names_rejected(self):
        params = ParameterSet()
        params.add("w", np.zeros(2))
        with pytest.raises(ValueError):
            params.add("w", np.zeros(2))
