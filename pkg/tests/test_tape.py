import numpy as np
import pytest

from smoothrnn import tape as T
from smoothrnn.errors import UsageError
from smoothrnn.initializers import glorot_uniform, make_rng, orthogonal


def test_matvec_identity():
    assert np.allclose(T.matvec(np.eye(3), np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])


def test_matvec_zeros():
    assert np.array_equal(T.matvec(np.zeros((2, 3)), np.array([4.0, -1.0, 2.0])), [0.0, 0.0])


def test_matvec_hand_value():
    out = T.matvec(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1.0, 1.0]))
    assert np.array_equal(out, [3.0, 7.0])


def test_matvec_dimension_mismatch():
    with pytest.raises(UsageError):
        T.matvec(np.eye(2), np.ones(3))


def test_tanh_values():
    assert T.tanh(np.array([0.0]))[0] == 0.0
    # reference math-library value
    assert T.tanh(np.array([1.0]))[0] == pytest.approx(np.tanh(1.0), abs=0)
    big = T.tanh(np.array([50.0, -50.0, 700.0]))
    assert np.all(np.abs(big) <= 1.0)
    assert np.all(np.isfinite(big))


def test_sigmoid_values():
    assert T.sigmoid(np.array([0.0]))[0] == 0.5
    assert T.sigmoid(np.array([2.0]))[0] == pytest.approx(1.0 / (1.0 + np.exp(-2.0)), rel=1e-15)
    x = np.linspace(-7, 7, 31)
    np.testing.assert_allclose(T.sigmoid(-x), 1.0 - T.sigmoid(x), atol=1e-15)
    extreme = T.sigmoid(np.array([-1e6, 1e6]))
    assert 0.0 <= extreme[0] < 1e-25 and 1.0 - 1e-15 < extreme[1] <= 1.0


def test_softplus_values():
    assert T.softplus(np.array([0.0]))[0] == pytest.approx(np.log(2.0), rel=1e-15)
    assert T.softplus(np.array([100.0]))[0] == 100.0


def test_backward_sum_gives_ones():
    tp = T.Tape()
    v = tp.param(np.array([1.0, -2.0, 3.0]))
    grads = tp.backward(T.vsum(v))
    assert np.array_equal(grads[v], np.ones(3))


def test_backward_tanh_at_zero():
    tp = T.Tape()
    x = tp.param(np.array(0.0))
    grads = tp.backward(T.tanh(x))
    assert grads[x] == pytest.approx(1.0, abs=0)


def test_backward_rejects_nonscalar_loss():
    tp = T.Tape()
    v = tp.param(np.ones(3))
    with pytest.raises(UsageError):
        tp.backward(T.tanh(v))


def test_backward_unreached_param_gets_zero():
    tp = T.Tape()
    a = tp.param(np.ones(2))
    b = tp.param(np.ones(2))
    grads = tp.backward(T.vsum(a * a))
    assert np.array_equal(grads[b], np.zeros(2))


def _random_graph(arrs):
    """A composed graph exercising every primitive; works on Vars or ndarrays."""
    w, u, b, x = arrs
    h = T.tanh(w @ x + b)
    g = T.sigmoid(u @ h + 0.5 * b)
    mix = g * h + (1.0 - g) * (h * h)
    z = T.softplus(u @ mix) - T.vabs(w @ x)
    core = T.vsum(z) + T.vmean(T.square(mix)) + T.vsum(T.exp(-0.5 * T.square(h)))
    return core + T.vsum(T.log(1.0 + T.square(g))) + T.vsum(T.reshape(mix, (1, -1)) @ h)


def test_gradient_matches_finite_differences_property():
    """Tape gradients equal central finite differences at 20 random points."""
    rng = make_rng(42)
    for _ in range(20):
        w = rng.standard_normal((3, 2))
        u = rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 1))
        x = rng.standard_normal((2, 1))

        tp = T.Tape()
        params = [tp.param(a) for a in (w, u, b)]
        loss = _random_graph(params + [x])
        grads = tp.backward(loss)

        def f(arrs):
            return float(T.value_of(_random_graph(list(arrs) + [x])))

        fd = T.finite_difference_gradient(f, [w, u, b])
        for var, g_fd in zip(params, fd):
            g = grads[var]
            err = max(
                T.relative_error(a, b_) for a, b_ in zip(g.reshape(-1), g_fd.reshape(-1))
            )
            assert err < 1e-4


def test_glorot_bounds_and_moments():
    rng = make_rng(7)
    rows, cols = 250, 400
    m = glorot_uniform(rng, rows, cols)
    limit = np.sqrt(6.0 / (rows + cols))
    assert np.all(m >= -limit) and np.all(m <= limit)
    # Monte Carlo oracle: mean of 1e5 uniform draws is 0 within 3 standard errors
    se = limit / np.sqrt(3.0 * m.size)
    assert abs(m.mean()) < 3.0 * se


def test_glorot_deterministic():
    a = glorot_uniform(make_rng(3), 10, 4)
    b = glorot_uniform(make_rng(3), 10, 4)
    assert np.array_equal(a, b)


def test_orthogonal_n1():
    q = orthogonal(make_rng(0), 1)
    assert q.shape == (1, 1) and abs(abs(q[0, 0]) - 1.0) < 1e-12


def test_orthogonal_columns():
    q = orthogonal(make_rng(5), 12)
    gram = q.T @ q
    off = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off)) < 1e-10
    assert np.max(np.abs(np.diag(gram) - 1.0)) < 1e-10


def _power_iteration_extremes(a: np.ndarray, iters: int = 500):
    """Largest and smallest eigenvalue of a symmetric PSD matrix, without
    calling any library eigensolver."""
    n = a.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(iters):
        v = a @ v
        v /= np.linalg.norm(v)
    lam_max = float(v @ (a @ v))
    shift = lam_max + 1.0
    b = shift * np.eye(n) - a
    v = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(iters):
        v = b @ v
        v /= np.linalg.norm(v)
    lam_min = shift - float(v @ (b @ v))
    return lam_max, lam_min


def test_orthogonal_singular_values_power_iteration_oracle():
    q = orthogonal(make_rng(11), 15)
    lam_max, lam_min = _power_iteration_extremes(q.T @ q)
    # eigenvalues of Q^T Q are squared singular values
    assert abs(np.sqrt(lam_max) - 1.0) < 1e-8
    assert abs(np.sqrt(lam_min) - 1.0) < 1e-8


def test_var_mixing_with_plain_arrays():
    tp = T.Tape()
    x = tp.param(np.array([1.0, 2.0]))
    const = np.array([3.0, 4.0])
    out = const - x  # ndarray on the left must defer to Var
    assert isinstance(out, T.Var)
    grads = tp.backward(T.vsum(out * out))
    np.testing.assert_allclose(grads[x], -2.0 * (const - x.value))
