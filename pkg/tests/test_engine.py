"""Gradient engine checks: finite differences, brute-force conv oracles,
backend agreement, determinism."""

import numpy as np
import pytest

from rfmsm import engine
from rfmsm.engine import Tensor
from rfmsm.engine import kernels as K
from rfmsm.errors import ValidationError

F64 = np.float64


def brute_conv1d(x, w, stride=1, dilation=1, padding=0):
    """Direct-loop convolution oracle, channels-last [B, L, C]."""
    batch, length, cin = x.shape
    cout, _, kernel = w.shape
    span = dilation * (kernel - 1) + 1
    lout = (length + 2 * padding - span) // stride + 1
    y = np.zeros((batch, lout, cout), dtype=x.dtype)
    for b in range(batch):
        for lo in range(lout):
            for co in range(cout):
                acc = 0.0
                for ci in range(cin):
                    for k in range(kernel):
                        ix = lo * stride + k * dilation - padding
                        if 0 <= ix < length:
                            acc += x[b, ix, ci] * w[co, ci, k]
                y[b, lo, co] = acc
    return y


def brute_convt1d(x, w, stride=1, dilation=1, padding=0):
    """Direct-loop transposed convolution oracle, w layout [in, out, K]."""
    batch, length, cin = x.shape
    _, cout, kernel = w.shape
    span = dilation * (kernel - 1) + 1
    out_len = (length - 1) * stride + span - 2 * padding
    y = np.zeros((batch, out_len, cout), dtype=x.dtype)
    for b in range(batch):
        for l in range(length):
            for k in range(kernel):
                t = l * stride + k * dilation - padding
                if 0 <= t < out_len:
                    for ci in range(cin):
                        for co in range(cout):
                            y[b, t, co] += x[b, l, ci] * w[ci, co, k]
    return y


def numeric_grad(fn, arrays, index, eps=1e-5):
    """Central finite differences of scalar fn wrt arrays[index] (64-bit)."""
    base = arrays[index]
    grad = np.zeros_like(base)
    flat = base.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = fn(*arrays)
        flat[i] = orig - eps
        lo = fn(*arrays)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * eps)
    return grad


def check_op_gradients(build, arrays, rtol=1e-3, atol=1e-8):
    """Compare tape gradients of sum(op(...)) against finite differences."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    out = build(*tensors)
    loss = engine.l2_loss(out, np.zeros_like(out.data))  # smooth scalarizer
    loss.backward()

    def scalar_fn(*arrs):
        consts = [Tensor(a) for a in arrs]
        o = build(*consts)
        return float((o.data**2).mean())

    for idx, t in enumerate(tensors):
        got = t.grad if t.grad is not None else np.zeros_like(t.data)
        want = numeric_grad(scalar_fn, [a.copy() for a in arrays], idx)
        scale = max(np.abs(want).max(), np.abs(got).max(), 1e-12)
        err = np.abs(got - want).max() / scale
        assert err < rtol, f"param {idx}: rel err {err:.2e}"


@pytest.fixture
def rng64():
    return np.random.default_rng(777)


class TestConvForwardOracle:
    @pytest.mark.parametrize(
        "stride,dilation,padding,kernel",
        [(1, 1, 0, 3), (1, 1, 1, 3), (2, 1, 1, 3), (1, 4, 0, 2), (1, 1, 3, 7),
         (2, 1, 0, 1), (3, 2, 2, 3)],
    )
    def test_matches_bruteforce_both_backends(self, rng64, stride, dilation, padding, kernel):
        x = rng64.standard_normal((2, 21, 3))
        w = rng64.standard_normal((4, 3, kernel))
        ref = brute_conv1d(x, w, stride, dilation, padding)
        for name in ("numpy", "native"):
            got = K.conv1d_forward(x, w, stride, dilation, padding, backend=K.get_backend(name))
            np.testing.assert_allclose(got, ref, atol=1e-12, err_msg=name)

    def test_float32_relative_error(self, rng64):
        x = rng64.standard_normal((2, 32, 8)).astype(np.float32)
        w = rng64.standard_normal((6, 8, 3)).astype(np.float32)
        ref = brute_conv1d(x.astype(F64), w.astype(F64), 1, 1, 1)
        for name in ("numpy", "native"):
            got = K.conv1d_forward(x, w, 1, 1, 1, backend=K.get_backend(name))
            rel = np.abs(got - ref).max() / np.abs(ref).max()
            assert rel < 1e-5

    def test_channel_mismatch(self, rng64):
        with pytest.raises(ValidationError, match="channel mismatch"):
            K.conv1d_forward(rng64.standard_normal((1, 8, 3)), rng64.standard_normal((2, 4, 3)))


class TestConvTransposeOracle:
    @pytest.mark.parametrize(
        "stride,dilation,padding,kernel",
        [(1, 1, 0, 3), (2, 1, 1, 3), (2, 1, 0, 4), (1, 2, 1, 3)],
    )
    def test_matches_bruteforce(self, rng64, stride, dilation, padding, kernel):
        x = rng64.standard_normal((2, 9, 4))
        w = rng64.standard_normal((4, 3, kernel))
        ref = brute_convt1d(x, w, stride, dilation, padding)
        got = K.convt1d_forward(x, w, stride, dilation, padding)
        np.testing.assert_allclose(got, ref, atol=1e-12)

    def test_adjoint_identity(self, rng64):
        # <conv(x; w), y> == <x, convT(y; w)> for matching geometry
        x = rng64.standard_normal((2, 16, 3))
        w = rng64.standard_normal((5, 3, 3))
        y = rng64.standard_normal((2, 8, 5))
        cx = K.conv1d_forward(x, w, 2, 1, 1)
        ty = K._spread(y, w, 2, 1, 1, 16)
        assert float((cx * y).sum()) == pytest.approx(float((x * ty).sum()), rel=1e-10)


class TestOpGradients:
    """Central finite differences (64-bit, step 1e-5), rel error < 1e-3."""

    def test_conv1d_variants(self, rng64):
        for stride, dilation, padding in [(1, 1, 1), (2, 1, 1), (1, 4, 0), (2, 2, 2)]:
            x = rng64.standard_normal((2, 12, 3))
            w = rng64.standard_normal((4, 3, 3))
            b = rng64.standard_normal(4)
            check_op_gradients(
                lambda xt, wt, bt: engine.conv1d(xt, wt, bt, stride=stride,
                                                 dilation=dilation, padding=padding),
                [x, w, b],
            )

    def test_conv_transpose1d(self, rng64):
        for stride, padding in [(1, 0), (2, 1), (2, 0)]:
            x = rng64.standard_normal((2, 6, 4))
            w = rng64.standard_normal((4, 3, 3))
            b = rng64.standard_normal(3)
            check_op_gradients(
                lambda xt, wt, bt: engine.conv_transpose1d(xt, wt, bt, stride=stride,
                                                           padding=padding),
                [x, w, b],
            )

    def test_residual_add(self, rng64):
        a = rng64.standard_normal((2, 5, 3))
        b = rng64.standard_normal((2, 5, 3))
        check_op_gradients(engine.add, [a, b])

    def test_mul_gated(self, rng64):
        a = rng64.standard_normal((2, 5, 3))
        b = rng64.standard_normal((2, 5, 3))
        check_op_gradients(lambda x, y: engine.mul(engine.tanh(x), engine.sigmoid(y)), [a, b])

    def test_relu(self, rng64):
        x = rng64.standard_normal((2, 6, 3))
        x[np.abs(x) < 0.05] += 0.1  # keep clear of the kink
        check_op_gradients(engine.relu, [x])

    def test_tanh_sigmoid(self, rng64):
        x = rng64.standard_normal((2, 6, 3))
        check_op_gradients(engine.tanh, [x])
        check_op_gradients(engine.sigmoid, [x])

    def test_pad_and_crop(self, rng64):
        x = rng64.standard_normal((2, 6, 3))
        check_op_gradients(lambda t: engine.pad1d(t, 3, 0), [x])

    def test_avg_pool(self, rng64):
        x = rng64.standard_normal((2, 8, 3))
        check_op_gradients(lambda t: engine.avg_pool1d(t, 4), [x])

    def test_upsample(self, rng64):
        x = rng64.standard_normal((2, 4, 3))
        check_op_gradients(lambda t: engine.upsample_nearest(t, 2), [x])

    def test_flatten_affine(self, rng64):
        x = rng64.standard_normal((3, 4, 2))
        w = rng64.standard_normal((8, 5))
        b = rng64.standard_normal(5)
        check_op_gradients(lambda xt, wt, bt: engine.affine(engine.flatten(xt), wt, bt), [x, w, b])


class TestLossGradients:
    def _fd_loss(self, build, arrays, rtol=1e-3):
        tensors = [Tensor(a, requires_grad=True) for a in arrays]
        loss = build(*tensors)
        loss.backward()
        def scalar(*arrs):
            return float(build(*[Tensor(a) for a in arrs]).data)
        for idx, t in enumerate(tensors):
            want = numeric_grad(scalar, [a.copy() for a in arrays], idx)
            got = t.grad
            scale = max(np.abs(want).max(), 1e-12)
            assert np.abs(got - want).max() / scale < rtol

    def test_l1(self, rng64):
        pred = rng64.standard_normal((2, 8, 2))
        target = rng64.standard_normal((2, 8, 2))  # pred != target: away from kink
        self._fd_loss(lambda p: engine.l1_loss(p, target), [pred])

    def test_l1_sign_convention_at_zero(self):
        pred = Tensor(np.zeros((2, 2)), requires_grad=True)
        loss = engine.l1_loss(pred, np.zeros((2, 2)))
        loss.backward()
        np.testing.assert_array_equal(pred.grad, np.zeros((2, 2)))

    def test_l2(self, rng64):
        pred = rng64.standard_normal((2, 8, 2))
        target = rng64.standard_normal((2, 8, 2))
        self._fd_loss(lambda p: engine.l2_loss(p, target), [pred])

    def test_weighted_l1(self, rng64):
        pred = rng64.standard_normal((3, 6, 2))
        target = rng64.standard_normal((3, 6, 2))
        weight = (rng64.random((3, 6, 2)) < 0.5).astype(F64)
        self._fd_loss(lambda p: engine.l1_loss(p, target, weight), [pred])

    def test_weighted_all_zero_weight(self, rng64):
        pred = Tensor(rng64.standard_normal((2, 4)), requires_grad=True)
        loss = engine.l1_loss(pred, np.zeros((2, 4)), np.zeros((2, 4)))
        assert float(loss.data) == 0.0
        loss.backward()
        assert pred.grad is None or np.all(pred.grad == 0)

    def test_cross_entropy(self, rng64):
        logits = rng64.standard_normal((6, 4))
        labels = np.array([0, 1, 2, 3, 1, 2])
        self._fd_loss(lambda z: engine.cross_entropy(z, labels), [logits])

    def test_cross_entropy_uniform(self):
        logits = Tensor(np.zeros((3, 5)))
        loss = engine.cross_entropy(logits, np.array([0, 2, 4]))
        assert float(loss.data) == pytest.approx(np.log(5), rel=1e-9)

    def test_cross_entropy_margin_monotone(self):
        losses = []
        for margin in (0.0, 1.0, 4.0, 16.0):
            z = np.zeros((1, 3))
            z[0, 1] = margin
            losses.append(float(engine.cross_entropy(Tensor(z), np.array([1])).data))
        assert all(b < a for a, b in zip(losses, losses[1:]))
        assert losses[-1] < 1e-6

    def test_cross_entropy_label_range(self):
        with pytest.raises(ValidationError, match="label out of range"):
            engine.cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))

    def test_loss_shape_mismatch(self, rng64):
        with pytest.raises(ValidationError, match="shape mismatch"):
            engine.l1_loss(Tensor(np.zeros((2, 3))), np.zeros((3, 2)))

    def test_l1_l2_numeric_examples(self, rng64):
        t = rng64.standard_normal((4, 5))
        one = engine.l1_loss(Tensor(t + 1.0), t)
        two = engine.l2_loss(Tensor(t + 1.0), t)
        assert float(one.data) == pytest.approx(1.0, rel=1e-9)
        assert float(two.data) == pytest.approx(1.0, rel=1e-9)
        assert float(engine.l1_loss(Tensor(t), t).data) == 0.0

    def test_loss_matches_bruteforce_accumulation(self, rng64):
        a = rng64.standard_normal((3, 7, 2))
        b = rng64.standard_normal((3, 7, 2))
        want_l1 = sum(abs(x - y) for x, y in zip(a.ravel(), b.ravel())) / a.size
        want_l2 = sum((x - y) ** 2 for x, y in zip(a.ravel(), b.ravel())) / a.size
        assert float(engine.l1_loss(Tensor(a), b).data) == pytest.approx(want_l1, rel=1e-12)
        assert float(engine.l2_loss(Tensor(a), b).data) == pytest.approx(want_l2, rel=1e-12)

    def test_permutation_invariance(self, rng64):
        a = rng64.standard_normal(24)
        b = rng64.standard_normal(24)
        perm = np.random.default_rng(3).permutation(24)
        assert float(engine.l1_loss(Tensor(a), b).data) == pytest.approx(
            float(engine.l1_loss(Tensor(a[perm]), b[perm]).data), rel=1e-12
        )


class TestEngineMisc:
    def test_frozen_tensor_receives_no_gradient(self, rng64):
        x = Tensor(rng64.standard_normal((2, 8, 3)))
        w_frozen = Tensor(rng64.standard_normal((4, 3, 3)), requires_grad=False)
        w_live = Tensor(rng64.standard_normal((4, 4, 1)), requires_grad=True)
        h = engine.conv1d(x, w_frozen, padding=1)
        out = engine.conv1d(h, w_live)
        loss = engine.l2_loss(out, np.zeros_like(out.data))
        loss.backward()
        assert w_frozen.grad is None
        assert w_live.grad is not None

    def test_forward_determinism_bitwise(self, rng64):
        x = rng64.standard_normal((4, 32, 2)).astype(np.float32)
        w = rng64.standard_normal((8, 2, 7)).astype(np.float32)
        a = K.conv1d_forward(x, w, 1, 1, 3)
        b = K.conv1d_forward(x, w, 1, 1, 3)
        assert np.array_equal(a.view(np.uint32), b.view(np.uint32))

    def test_backends_agree_f64(self, rng64):
        if not K.have_native():
            pytest.skip("native backend not built")
        x = rng64.standard_normal((3, 40, 6))
        w = rng64.standard_normal((5, 6, 3))
        gy = rng64.standard_normal((3, 20, 5))
        for name in ("conv",):
            a = K.conv1d_forward(x, w, 2, 1, 1, backend=K.get_backend("native"))
            b = K.conv1d_forward(x, w, 2, 1, 1, backend=K.get_backend("numpy"))
            np.testing.assert_allclose(a, b, atol=1e-13)
        ga, gwa = K.conv1d_backward(x, w, gy, 2, 1, 1, backend=K.get_backend("native"))
        gb, gwb = K.conv1d_backward(x, w, gy, 2, 1, 1, backend=K.get_backend("numpy"))
        np.testing.assert_allclose(ga, gb, atol=1e-13)
        np.testing.assert_allclose(gwa, gwb, atol=1e-13)

    def test_scalar_loss_required(self, rng64):
        t = Tensor(rng64.standard_normal((2, 2)), requires_grad=True)
        with pytest.raises(ValidationError):
            t.backward()

    def test_gradient_accumulation_through_shared_input(self, rng64):
        x = Tensor(rng64.standard_normal((2, 6, 3)), requires_grad=True)
        out = engine.add(engine.relu(x), engine.tanh(x))
        loss = engine.l2_loss(out, np.zeros_like(out.data))
        loss.backward()
        def scalar(a):
            o = engine.add(engine.relu(Tensor(a)), engine.tanh(Tensor(a)))
            return float((o.data**2).mean())
        want = numeric_grad(scalar, [x.data.copy()], 0)
        np.testing.assert_allclose(x.grad, want, rtol=1e-3, atol=1e-8)
