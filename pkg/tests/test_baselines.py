import warnings

import numpy as np
import pytest
import scipy.interpolate
from hypothesis import given, settings
from hypothesis import strategies as st

from rktvinr import baselines, odesim
from rktvinr.metrics import rel_error
from rktvinr.noise import NoiseSpec, corrupt
from rktvinr.siren import SirenConfig


@pytest.fixture(scope="module")
def noisy():
    def make(name, sigma2=1e-2, seed=0):
        clean = odesim.simulate(odesim.make_system(name))
        return clean, corrupt(clean, NoiseSpec(sigma2, "Gaussian", seed))
    return make


# Savitzky-Golay ------------------------------------------------------------


def test_sg_reproduces_linear_column_everywhere():
    t = np.arange(40) * 0.1
    X = np.column_stack([2.0 * t - 1.0, -0.5 * t])
    out = baselines.savitzky_golay(X, h=0.1, window=7, degree=2)
    assert np.allclose(out.states, X, atol=1e-12)
    assert np.allclose(out.derivs, [[2.0, -0.5]] * 40, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(degree=st.integers(1, 5), half=st.integers(3, 7), seed=st.integers(0, 10**6))
def test_sg_polynomial_reproduction(degree, half, seed):
    window = 2 * half + 1
    if degree >= window:
        return
    coefs = np.random.default_rng(seed).normal(size=degree + 1)
    t = np.arange(50) * 0.05
    X = np.polyval(coefs, t)[:, None]
    dX = np.polyval(np.polyder(coefs), t)[:, None]
    out = baselines.savitzky_golay(X, h=0.05, window=window, degree=degree)
    assert np.allclose(out.states, X, rtol=1e-8, atol=1e-8)
    assert np.allclose(out.derivs, dX, rtol=1e-6, atol=1e-6)


def test_sg_saturated_degree_interpolates():
    X = np.random.default_rng(1).normal(size=(30, 2))
    out = baselines.savitzky_golay(X, h=1.0, window=5, degree=4)
    assert np.allclose(out.states, X, atol=1e-12)


def test_sg_sine_derivative():
    t = np.arange(0, 6.0, 0.05)
    out = baselines.savitzky_golay(np.sin(t)[:, None], h=0.05, window=11, degree=3)
    interior = slice(5, -5)
    assert np.abs(out.derivs[interior, 0] - np.cos(t[interior])).max() < 1e-3


@pytest.mark.parametrize("window,degree", [(4, 2), (0, 0), (101, 3), (7, 7), (7, -1)])
def test_sg_invalid_arguments(window, degree):
    with pytest.raises(ValueError):
        baselines.savitzky_golay(np.zeros((50, 1)), 1.0, window, degree)


# TV-regularized differentiation ---------------------------------------------


def test_trapezoid_operator():
    A = baselines.trapezoid_operator(5, 0.5)
    u = np.array([1.0, 3.0, 2.0, 0.0, 4.0])
    want = np.concatenate([[0.0], np.cumsum(0.25 * (u[1:] + u[:-1]))])
    assert np.allclose(A @ u, want)


def test_tv_constant_signal_has_zero_derivative():
    out = baselines.tvr_differentiate(np.full((60, 1), 2.5), 0.1, alpha=1.0)
    assert np.abs(out.derivs).max() < 1e-6
    assert np.allclose(out.states, 2.5)


def test_tv_linear_ramp():
    t = np.arange(101) * 0.05
    out = baselines.tvr_differentiate(t[:, None], 0.05, alpha=1e-6)
    assert np.abs(out.derivs[5:-5, 0] - 1.0).max() < 1e-3


def test_tv_energy_never_increases():
    gen = np.random.default_rng(3)
    t = np.arange(80) * 0.1
    f = np.sin(t) + 0.05 * gen.normal(size=t.size)
    A = baselines.trapezoid_operator(t.size, 0.1)
    res = baselines.tv_derivative(f - f[0], A, alpha=0.05, iterations=30)
    hist = np.array(res.objective)
    assert np.all(np.diff(hist) <= 1e-12 * np.abs(hist[:-1]))


def test_tv_non_convergence_warns_and_returns_best():
    t = np.arange(80) * 0.1
    with pytest.warns(RuntimeWarning):
        out = baselines.tvr_differentiate(np.sin(t)[:, None], 0.1, alpha=1e-2, iterations=1)
    assert out.info["converged"] == [False]


def test_tv_rejects_non_positive_alpha():
    with pytest.raises(ValueError):
        baselines.tvr_differentiate(np.zeros((10, 1)), 0.1, alpha=0.0)


def test_tv_linear_oscillator_band(noisy):
    clean, data = noisy("LinearOsc")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        out = baselines.tvr_differentiate(data.states, data.h)
    assert rel_error(clean.states, out.states) <= 3 * 8.02e-2


# smoothing spline ------------------------------------------------------------


def test_spline_interpolation_limit():
    gen = np.random.default_rng(4)
    t = np.sort(gen.uniform(0, 5, 30))
    y = gen.normal(size=30)
    out = baselines.smoothing_spline(y, t, lam=1e-15)
    assert np.sum((out.states[:, 0] - y) ** 2) < 1e-10


def test_spline_large_penalty_gives_regression_line():
    gen = np.random.default_rng(5)
    t = np.linspace(0, 3, 40)
    y = 0.7 * t - 0.2 + 0.1 * gen.normal(size=t.size)
    out = baselines.smoothing_spline(y, t, lam=1e12)
    slope, icept = np.polyfit(t, y, 1)
    assert np.abs(out.states[:, 0] - (slope * t + icept)).max() < 1e-6
    assert np.abs(out.derivs[:, 0] - slope).max() < 1e-6


@pytest.mark.parametrize("lam", [1e-3, 1e-1, 10.0])
def test_spline_agrees_with_scipy(lam):
    gen = np.random.default_rng(6)
    t = np.linspace(0, 4, 50)
    y = np.sin(2 * t) + 0.1 * gen.normal(size=t.size)
    ours = baselines.smoothing_spline(y, t, lam=lam)
    ref = scipy.interpolate.make_smoothing_spline(t, y, lam=lam)
    assert np.allclose(ours.states[:, 0], ref(t), rtol=1e-8, atol=1e-9)
    assert np.allclose(ours.derivs[:, 0], ref.derivative()(t), rtol=1e-7, atol=1e-8)


def test_spline_gcv_choice_is_grid_argmin():
    gen = np.random.default_rng(7)
    t = np.linspace(0, 4, 60)
    y = np.cos(t) + 0.05 * gen.normal(size=t.size)
    out = baselines.smoothing_spline(y, t, return_scores=True)
    scores, grid = out.info["gcv"][0], out.info["grid"]
    assert out.info["lambda"][0] == grid[int(np.argmin(scores))]
    assert len(grid) == 121


def test_spline_derivative_is_analytic_not_differenced():
    t = np.linspace(0, 2 * np.pi, 80)
    out = baselines.smoothing_spline(np.sin(t), t, lam=1e-10)
    assert np.abs(out.derivs[:, 0] - np.cos(t)).max() < 1e-3


def test_spline_gcv_failure_falls_back(monkeypatch):
    monkeypatch.setattr(baselines._SplineSystem, "gcv", lambda self, y, lams: np.full(len(lams), np.nan))
    t = np.linspace(0, 1, 20)
    with pytest.warns(RuntimeWarning, match="GCV failed"):
        out = baselines.smoothing_spline(np.sin(t), t)
    assert out.info["lambda"] == [1.0]
    assert np.array_equal(out.states, baselines.smoothing_spline(np.sin(t), t, lam=1.0).states)


def test_spline_needs_four_samples():
    with pytest.raises(ValueError):
        baselines.smoothing_spline(np.zeros(3), np.arange(3.0))


def test_spline_seir_band(noisy):
    clean, data = noisy("SEIR")
    out = baselines.smoothing_spline(data.states, data.times)
    assert rel_error(clean.states, out.states) <= 3 * 3.75e-3


# shape and grid contract -----------------------------------------------------


@pytest.mark.parametrize("method", ["SavitzkyGolay", "TVR", "Spline"])
def test_outputs_preserve_shape(noisy, method):
    _, data = noisy("VanDerPol")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if method == "SavitzkyGolay":
            out = baselines.savitzky_golay(data.states, data.h)
        elif method == "TVR":
            out = baselines.tvr_differentiate(data.states, data.h)
        else:
            out = baselines.smoothing_spline(data.states, data.times)
    assert out.states.shape == out.derivs.shape == data.states.shape
    traj = out.trajectory(data)
    assert traj.t0 == data.t0 and traj.h == data.h


# standard INR -----------------------------------------------------------------


def test_std_inr_fits_clean_data_without_decay():
    clean = odesim.simulate(odesim.make_system("LinearOsc"))
    cfg = SirenConfig(out_dim=2, t_domain=(clean.t0, clean.t1), omega0=10.0)
    out, _, hist = baselines.std_inr(clean.with_states(clean.states), cfg, iters=1000,
                                     weight_decay=0.0, return_params=True)
    assert hist[-1, 1] < 1e-3
    assert out.states.shape == clean.states.shape


def test_std_inr_regularization_path():
    clean = odesim.simulate(odesim.make_system("LinearOsc"))
    cfg = SirenConfig(out_dim=2, t_domain=(clean.t0, clean.t1), hidden_layers=2, width=32, omega0=10.0)
    norms = []
    for wd in (1e-6, 1e-4, 1e-2):
        _, params, _ = baselines.std_inr(clean, cfg, iters=300, lr=1e-3, weight_decay=wd,
                                         return_params=True)
        norms.append(np.linalg.norm(params.flat()))
    assert norms[0] > norms[1] > norms[2]


def test_std_inr_linear_oscillator_band(noisy):
    clean, data = noisy("LinearOsc")
    cfg = SirenConfig(out_dim=2, t_domain=(data.t0, data.t1), omega0=2.0)
    out = baselines.std_inr(data, cfg)
    assert rel_error(clean.states, out.states) <= 3 * 3.35e-2
