import numpy as np
import pytest

from soundvista import ndiff
from soundvista.dsp import StftConfig
from soundvista.ndiff import Tensor
from soundvista.ndiff.gradcheck import finite_difference_check


def t64(rng, *shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_softmax_symmetry():
    y = ndiff.softmax(Tensor([0.0, 0.0]))
    assert np.allclose(y.data, [0.5, 0.5])


def test_matmul_identity(rng):
    a = rng.standard_normal((4, 4))
    out = ndiff.matmul(Tensor(np.eye(4)), Tensor(a))
    assert np.allclose(out.data, a)


def test_conv2d_output_shape(rng):
    x = Tensor(rng.standard_normal((1, 1, 4, 4)))
    w = Tensor(rng.standard_normal((3, 1, 3, 3)))
    out = ndiff.conv2d(x, w, stride=2, pad=1)
    assert out.shape == (1, 3, 2, 2)


def test_conv2d_matches_hand_computation():
    # 3x3 kernel of ones over a constant image, stride 2, pad 1: interior taps
    x = Tensor(np.ones((1, 1, 4, 4)))
    w = Tensor(np.ones((1, 1, 3, 3)))
    out = ndiff.conv2d(x, w, stride=2, pad=1).data[0, 0]
    # corner (0,0) sees a 2x2 patch of the padded image, (0,1) a 2x3, (1,1) a 3x3
    assert out[0, 0] == 4.0
    assert out[0, 1] == 6.0
    assert out[1, 1] == 9.0


def test_conv2d_transpose_doubles_resolution(rng):
    x = Tensor(rng.standard_normal((2, 3, 5, 7)))
    w = Tensor(rng.standard_normal((3, 4, 3, 3)))
    out = ndiff.conv2d_transpose(x, w, stride=2, pad=1, output_padding=1)
    assert out.shape == (2, 4, 10, 14)


def test_backward_sum_gives_ones(rng):
    x = t64(rng, 5)
    ndiff.tsum(x).backward()
    assert np.allclose(x.grad, np.ones(5))


def test_backward_mse_closed_form():
    x = Tensor(np.array([3.0]), requires_grad=True)
    ndiff.mse(x, Tensor(np.array([0.0]))).backward()
    assert np.allclose(x.grad, [6.0])


def test_backward_requires_scalar(rng):
    x = t64(rng, 3)
    with pytest.raises(ValueError):
        (x * 2.0).backward()


def test_gradients_accumulate_across_uses(rng):
    x = t64(rng, 4)
    y = ndiff.tsum(x * 2.0) + ndiff.tsum(x * 3.0)
    y.backward()
    assert np.allclose(x.grad, np.full(4, 5.0))


def test_dropout_eval_is_identity(rng):
    x = t64(rng, 10)
    out = ndiff.dropout(x, 0.5, np.random.default_rng(0), training=False)
    assert out is x


def test_dropout_train_deterministic_by_seed(rng):
    x = Tensor(np.ones(1000))
    a = ndiff.dropout(x, 0.3, np.random.default_rng(7), training=True).data
    b = ndiff.dropout(x, 0.3, np.random.default_rng(7), training=True).data
    assert np.array_equal(a, b)
    assert abs(a.mean() - 1.0) < 0.1  # inverted scaling keeps the mean


def test_no_grad_blocks_graph(rng):
    x = t64(rng, 3)
    with ndiff.no_grad():
        y = x * 2.0
    assert not y.requires_grad


def test_adam_zero_gradient_keeps_params():
    p = ndiff.Parameter(np.array([1.0, 2.0]), name="p")
    opt = ndiff.Adam([p], lr=0.1)
    p.grad = np.zeros(2)
    opt.step()
    assert np.allclose(p.data, [1.0, 2.0])
    assert opt.step_count == 1


def test_adam_single_step_approx_sign_update():
    p = ndiff.Parameter(np.array([0.0]), name="p")
    opt = ndiff.Adam([p], lr=0.01)
    p.grad = np.array([3.7])
    opt.step()
    # bias correction makes the first step ~ -lr * sign(g)
    assert np.allclose(p.data, [-0.01], atol=1e-6)


def test_adam_strict_raises_on_nan():
    p = ndiff.Parameter(np.array([0.0]), name="p")
    opt = ndiff.Adam([p], lr=0.01, strict=True)
    p.grad = np.array([np.nan])
    with pytest.raises(FloatingPointError):
        opt.step()


def test_lr_schedule_endpoint():
    assert ndiff.lr_at_epoch(1e-4, 1, 60) == pytest.approx(1e-4)
    assert ndiff.lr_at_epoch(1e-4, 60, 60) == pytest.approx(1e-5)


def test_checkpoint_roundtrip(tmp_path, rng):
    groups = {
        "enc": {"w": rng.standard_normal((3, 4)).astype(np.float32), "b": np.zeros(4, np.float32)},
        "head": {"w": rng.standard_normal((4, 1))},
    }
    base = str(tmp_path / "ckpt")
    ndiff.save_checkpoint(base, groups, tag="vab-v1", extra={"dim": 64})
    loaded, manifest = ndiff.load_checkpoint(base)
    assert manifest["tag"] == "vab-v1"
    assert manifest["extra"]["dim"] == 64
    for g in groups:
        for k in groups[g]:
            assert np.allclose(loaded[g][k], groups[g][k])
    assert loaded["head"]["w"].dtype == np.float64
    assert loaded["enc"]["w"].dtype == np.float32


# finite-difference checks over the whole op closure -------------------------------

def _w(rng, *shape):
    # fixed projection so reductions see non-uniform weights; bound at build time
    return Tensor(rng.standard_normal(shape))


def _fd_cases(rng):
    cfg_small = StftConfig(fft_size=16, win_length=16, hop=4)
    return {
        "add": (lambda a, b: ndiff.tsum(a + b), [t64(rng, 3, 4), t64(rng, 3, 4)]),
        "add_broadcast": (lambda a, b: ndiff.tsum(a + b), [t64(rng, 3, 4), t64(rng, 4)]),
        "mul": (lambda a, b: ndiff.tsum(a * b), [t64(rng, 3, 4), t64(rng, 3, 4)]),
        "matmul": (lambda a, b: ndiff.tsum(ndiff.matmul(a, b)), [t64(rng, 3, 4), t64(rng, 4, 2)]),
        "matmul_batched": (
            lambda a, b: ndiff.tsum(ndiff.matmul(a, b)),
            [t64(rng, 2, 3, 4), t64(rng, 4, 2)],
        ),
        "conv2d": (
            lambda x, w, b: ndiff.tsum(ndiff.conv2d(x, w, b, stride=2, pad=1)),
            [t64(rng, 2, 3, 6, 6), t64(rng, 4, 3, 3, 3), t64(rng, 4)],
        ),
        "conv2d_s1": (
            lambda x, w, b: ndiff.tsum(ndiff.conv2d(x, w, b, stride=1, pad=1)),
            [t64(rng, 1, 2, 5, 5), t64(rng, 3, 2, 3, 3), t64(rng, 3)],
        ),
        "conv2d_transpose": (
            lambda x, w, b: ndiff.tsum(ndiff.conv2d_transpose(x, w, b)),
            [t64(rng, 2, 3, 4, 4), t64(rng, 3, 2, 3, 3), t64(rng, 2)],
        ),
        "concat": (
            lambda a, b: ndiff.tsum(ndiff.mul(ndiff.concat([a, b], axis=1), ndiff.concat([b, a], axis=1))),
            [t64(rng, 2, 3), t64(rng, 2, 3)],
        ),
        "slice": (lambda a: ndiff.tsum(a[:, 1:3] * 2.0), [t64(rng, 3, 5)]),
        "softmax": (
            lambda a, w=_w(rng, 3, 5): ndiff.tsum(ndiff.softmax(a, axis=-1) * w),
            [t64(rng, 3, 5)],
        ),
        "relu": (lambda a: ndiff.tsum(ndiff.relu(a)), [t64(rng, 4, 4)]),
        "leaky_relu": (lambda a: ndiff.tsum(ndiff.leaky_relu(a, 0.2)), [t64(rng, 4, 4)]),
        "layer_norm": (
            lambda a, w=_w(rng, 3, 6): ndiff.tsum(ndiff.layer_norm(a, axes=(-1,)) * w),
            [t64(rng, 3, 6)],
        ),
        "layer_norm_chan": (
            lambda a, w=_w(rng, 2, 4, 3, 3): ndiff.tsum(ndiff.layer_norm(a, axes=(1,)) * w),
            [t64(rng, 2, 4, 3, 3)],
        ),
        "mean": (
            lambda a, w=_w(rng, 4): ndiff.tsum(ndiff.mean(a, axes=(0, 2)) * w),
            [t64(rng, 2, 4, 3)],
        ),
        "sum_axes": (lambda a: ndiff.tsum(ndiff.tsum(a, axes=(1,)) * 3.0), [t64(rng, 2, 4)]),
        "mse": (lambda a, b: ndiff.mse(a, b), [t64(rng, 5), t64(rng, 5)]),
        "l1": (lambda a, b: ndiff.l1(a, b), [t64(rng, 5), t64(rng, 5)]),
        "log": (lambda a: ndiff.tsum(ndiff.log(a)), [Tensor(rng.uniform(0.5, 2.0, (3, 3)), requires_grad=True)]),
        "exp": (lambda a: ndiff.tsum(ndiff.exp(a)), [t64(rng, 3, 3)]),
        "abs": (lambda a: ndiff.tsum(ndiff.tabs(a)), [Tensor(rng.uniform(0.2, 1.0, 7) * rng.choice([-1, 1], 7), requires_grad=True)]),
        "sin": (lambda a: ndiff.tsum(ndiff.sin(a)), [t64(rng, 6)]),
        "cos": (lambda a: ndiff.tsum(ndiff.cos(a)), [t64(rng, 6)]),
        "sqrt": (lambda a: ndiff.tsum(ndiff.sqrt(a)), [Tensor(rng.uniform(0.5, 2.0, 6), requires_grad=True)]),
        "softplus": (lambda a: ndiff.tsum(ndiff.softplus(a)), [t64(rng, 6)]),
        "reshape_transpose": (
            lambda a, w=_w(rng, 4, 3): ndiff.tsum(ndiff.transpose(ndiff.reshape(a, (3, 4)), (1, 0)) * w),
            [t64(rng, 12)],
        ),
        "frame": (
            lambda a, w=_w(rng, 2, 5, 6): ndiff.tsum(ndiff.frame_signal(a, 6, 3) * w),
            [t64(rng, 2, 18)],
        ),
        "stft": (
            lambda a, w=_w(rng, 2, 2, 9, 9): ndiff.tsum(ndiff.stft_op(a, cfg_small) * w),
            [t64(rng, 2, 32)],
        ),
        "istft": (
            lambda s, w=_w(rng, 2, 32): ndiff.tsum(ndiff.istft_op(s, cfg_small, 32) * w),
            [t64(rng, 2, 2, 9, 9)],
        ),
    }


FD_CASE_NAMES = sorted(_fd_cases(np.random.default_rng(0)).keys())


@pytest.mark.parametrize("name", FD_CASE_NAMES)
def test_op_gradients_match_finite_differences(name):
    import zlib

    rng = np.random.default_rng(zlib.crc32(name.encode()))
    build, inputs = _fd_cases(rng)[name]
    finite_difference_check(build, inputs, rtol=1e-3)


def test_stft_istft_roundtrip_inside_graph(rng):
    cfg = StftConfig(fft_size=16, win_length=16, hop=4)
    x = t64(rng, 1, 40)
    y = ndiff.istft_op(ndiff.stft_op(x, cfg), cfg, 40)
    assert np.max(np.abs(y.data - x.data)) < 1e-9
