import numpy as np
import pytest

from deepris.core import DomainError
from deepris.dataset import Dataset, split_dataset
from deepris.surrogate import (AdamState, ModelFormatError, TrainingConfig, TrainingError, adam_step,
                               evaluate_mse, forward, gradients, init_parameters, load_model, loss,
                               predict_moments, save_model, train)
from oracles import gradient_relative_error, random_instance


def test_gradients_match_finite_differences(rng):
    for _ in range(20):
        p, x, y, lam = random_instance(rng)
        assert gradient_relative_error(p, x, y, lam) < 1e-4


def test_init_shapes_and_scale():
    p = init_parameters(21, (64, 64), 30, seed=0)
    assert p.dims == (21, 64, 64, 30)
    assert p.activations == ("relu", "relu", "linear")
    assert all(np.all(b == 0) for b in p.biases)
    for w in p.weights:
        assert np.max(np.abs(w)) <= np.sqrt(6 / w.shape[0])
    assert np.array_equal(p.weights[0], init_parameters(21, (64, 64), 30, seed=0).weights[0])


def test_forward_of_hand_built_network():
    from deepris.surrogate import MlpParameters
    w1 = np.array([[1.0, -1.0], [2.0, 0.5]])
    w2 = np.array([[1.0], [3.0]])
    p = MlpParameters((w1, w2), (np.array([0.0, 0.5]), np.array([-1.0])), ("relu", "linear"), 2.0)
    x = np.array([1.0, 1.0])
    # hidden = relu([3, -0.5 + 0.5]) = [3, 0]; out = 3 - 1 = 2
    assert forward(p, x).tolist() == [2.0]
    assert predict_moments(p, x).tolist() == [4.0]


def test_loss_without_penalty_is_sum_of_squares(rng):
    p, x, y, _ = random_instance(rng)
    err = forward(p, x) - y
    assert loss(p, x, y, 0.0) == pytest.approx(np.sum(err**2))
    assert evaluate_mse(p, x, y) == pytest.approx(np.mean(err**2))
    assert loss(p, x, y, 0.1) == pytest.approx(np.sum(err**2) + 0.1 * sum(np.sum(w**2) for w in p.weights))


def test_penalty_gradient_excludes_biases(rng):
    p, x, y, _ = random_instance(rng)
    g0, g1 = gradients(p, x, y, 0.0), gradients(p, x, y, 0.3)
    for a, b, w in zip(g0.weights, g1.weights, p.weights):
        assert np.allclose(b - a, 0.6 * w)
    for a, b in zip(g0.biases, g1.biases):
        assert np.array_equal(a, b)


def test_first_adam_step_moves_by_learning_rate(rng):
    p, x, y, _ = random_instance(rng)
    g = gradients(p, x, y)
    new, state = adam_step(p, g, AdamState.zeros_like(p), 1, 0.01)
    # bias-corrected first step is lr * g / (|g| + eps)
    for w0, w1, gw in zip(p.weights, new.weights, g.weights):
        assert np.allclose(w0 - w1, 0.01 * gw / (np.abs(gw) + 1e-8))
    assert np.allclose(state.m.weights[0], 0.1 * g.weights[0])
    with pytest.raises(DomainError):
        adam_step(p, g, state, 0, 0.01)


def _linear_split(seed=0, c=60, n=5, b=3):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, (c, n)).astype(np.uint8)
    a = rng.uniform(0.5, 1.5, (n, b))
    return split_dataset(Dataset(x, 1.0 + x @ a), seed=seed)


def test_training_fits_a_learnable_target():
    split = _linear_split(c=200)
    params, rep = train(split, TrainingConfig(learning_rate=1e-2, max_epochs=1500, hidden=(16,), l2_lambda=0.0))
    assert rep.test_mse < 1e-2
    assert rep.train_loss_history[-1] < rep.train_loss_history[0]
    assert rep.best_validation_mse == min(rep.validation_mse_history)
    assert params.target_scale == pytest.approx(np.mean(split.train.targets))


def test_training_limits_and_determinism():
    split = _linear_split()
    _, rep = train(split, TrainingConfig(max_epochs=1))
    assert rep.epochs_run == 1 and rep.best_epoch == 1
    _, rep = train(split, TrainingConfig(learning_rate=1e-2, max_epochs=3000, patience=5, hidden=(8,)))
    assert rep.epochs_run - rep.best_epoch <= 5
    a, _ = train(split, TrainingConfig(max_epochs=20, batch_size=7))
    b, _ = train(split, TrainingConfig(max_epochs=20, batch_size=7))
    assert all(np.array_equal(u, v) for u, v in zip(a.weights, b.weights))


def test_divergence_raises():
    with pytest.raises(TrainingError, match="epoch"):
        train(_linear_split(), TrainingConfig(learning_rate=1e200, max_epochs=50))


def test_model_file_round_trip(tmp_path, rng):
    p = init_parameters(4, (5,), 3, seed=1)
    save_model(p, tmp_path / "m.txt")
    q = load_model(tmp_path / "m.txt", n=4, b=3)
    x = rng.integers(0, 2, (5, 4))
    assert np.array_equal(forward(p, x), forward(q, x))
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "m.txt", n=5)
    text = (tmp_path / "m.txt").read_text().splitlines()
    (tmp_path / "t.txt").write_text("\n".join(text[:-2]) + "\n")
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "t.txt")
    (tmp_path / "v.txt").write_text("\n".join(["# deepris-mlp schema=7"] + text[1:]) + "\n")
    with pytest.raises(ModelFormatError, match="version"):
        load_model(tmp_path / "v.txt")
