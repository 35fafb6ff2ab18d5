import math
from dataclasses import replace

import numpy as np
import pytest

from semf.config import TrainConfig
from semf.data import AlignedFrame, TrackedSplit, make_windows, synthesize_dataset
from semf.errors import ContractError, FormatError, ShapeError, TrainingError, UsageError
from semf.gradcheck import gradcheck
from semf.model import SemfModel
from semf.training import (
    evaluate,
    featurize,
    load_model,
    mse_multi_horizon,
    persistence_baseline,
    predict_standardized,
    prepare_splits,
    save_model,
    train,
)

TINY = TrainConfig(
    seq_len=30, n_scales=16, patch_size=8, d_model=16, n_heads=2, n_layers=1, batch_size=16, max_epochs=3, patience=5, learning_rate=2e-3
)


@pytest.fixture(scope="module")
def frame():
    return synthesize_dataset(3, 260)


@pytest.fixture(scope="module")
def splits(frame):
    return prepare_splits(frame, TINY)


@pytest.fixture(scope="module")
def trained(splits):
    return train(TINY, splits)


# ------------------------------------------------------------------ loss


def test_mse_cases():
    t = np.random.default_rng(0).standard_normal((5, 6))
    assert mse_multi_horizon(t, t).item() == 0.0
    assert mse_multi_horizon(t + 1.0, t).item() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ShapeError):
        mse_multi_horizon(t, t[:, :5])


def test_mse_matches_double_loop():
    rng = np.random.default_rng(1)
    p, y = rng.standard_normal((7, 6)), rng.standard_normal((7, 6))
    total = 0.0
    for i in range(7):
        for k in range(6):
            total += (p[i, k] - y[i, k]) ** 2
    assert abs(mse_multi_horizon(p, y).item() - total / 42) < 1e-12


# ------------------------------------------------------------------ config


def test_config_text_round_trip(tmp_path):
    cfg = TINY.replace(image_kind="stft", revin_affine=True, dropout=0.25)
    cfg.save(tmp_path / "c.txt")
    assert TrainConfig.load(tmp_path / "c.txt") == cfg


@pytest.mark.parametrize(
    "changes",
    [{"image_kind": "wavelet"}, {"fusion_kind": "tri"}, {"d_model": 10, "n_heads": 3}, {"dropout": 1.0}, {"batch_size": 0}],
)
def test_config_validation(changes):
    with pytest.raises(UsageError):
        TINY.replace(**changes)


def test_config_unknown_key():
    with pytest.raises(UsageError, match="bogus"):
        TrainConfig.from_mapping({"bogus": "1"})


# ------------------------------------------------------------------ model


def test_model_output_shape_and_eval_determinism(splits):
    model = SemfModel(TINY, splits.n_vars)
    feats = featurize(splits.val[:4], TINY)
    a = model.predict(feats.images, feats.exo)
    b = model.predict(feats.images, feats.exo)
    assert a.shape == (4, 6) and np.array_equal(a, b)
    model.train()
    assert not np.array_equal(model(feats.images, feats.exo).data, a)  # dropout active


def test_attention_rows_in_full_model(splits):
    model = SemfModel(TINY.replace(n_layers=2), splits.n_vars)
    feats = featurize(splits.val[:3], TINY)
    model.predict(feats.images, feats.exo)
    mods = model.attention_modules()
    assert len(mods) == 2 + 2 + 2
    for m in mods:
        np.testing.assert_allclose(m.last_probs.sum(axis=-1), 1.0, atol=1e-6)


def test_same_seed_same_init(splits):
    a = SemfModel(TINY, splits.n_vars).state_dict()
    b = SemfModel(TINY, splits.n_vars).state_dict()
    c = SemfModel(TINY.replace(seed=8), splits.n_vars).state_dict()
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not all(np.array_equal(a[k], c[k]) for k in a)


@pytest.mark.parametrize("exo,fusion", [("transformer", "bi"), ("mlp", "single")])
def test_full_model_gradcheck(splits, exo, fusion):
    cfg = TrainConfig(seq_len=16, n_scales=8, patch_size=8, d_model=8, n_heads=2, n_layers=1, exo_encoder_kind=exo, fusion_kind=fusion, revin_affine=True)
    model = SemfModel(cfg, splits.n_vars)
    model.eval()
    rng = np.random.default_rng(0)
    images, exo_w, y = rng.standard_normal((2, 8, 16)), rng.standard_normal((2, 16, splits.n_vars)), rng.standard_normal((2, 6))
    res = gradcheck(lambda *_: mse_multi_horizon(model(images, exo_w), y), model.parameters())
    assert res.max_error < 1e-3


# ------------------------------------------------------------------ training


def test_training_log_and_best_checkpoint(trained, splits):
    log = trained.log
    assert [r.epoch for r in log] == list(range(1, len(log) + 1))
    best = min(log, key=lambda r: r.val_mse)
    assert trained.best_epoch == best.epoch
    feats = featurize(splits.val, TINY)
    val_mse = float(np.mean((predict_standardized(trained.model, feats) - feats.targets) ** 2))
    assert val_mse == best.val_mse
    assert trained.log_csv().splitlines()[0] == "epoch,train_mse,val_mse"


def test_same_seed_identical_logs(trained, splits):
    again = train(TINY, splits)
    assert again.log_csv() == trained.log_csv()


def test_patience_zero_runs_one_epoch(splits):
    res = train(TINY.replace(patience=0, max_epochs=5), splits)
    assert len(res.log) == 1


def test_test_split_is_never_read(splits):
    tracked = TrackedSplit(splits.test, "test")
    guarded = replace(splits, test=tracked)
    train(TINY.replace(max_epochs=1), guarded)
    assert tracked.accesses == 0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_training_error(splits):
    with pytest.raises(TrainingError, match="epoch 1"):
        train(TINY.replace(learning_rate=1e300, max_epochs=2), splits)


def test_empty_splits_rejected(splits):
    with pytest.raises(ContractError):
        train(TINY, replace(splits, val=[]))


def test_prepare_splits_counts(frame):
    s = prepare_splits(frame, TINY)
    n = len(s.train) + len(s.val) + len(s.test)
    assert n == 260 - 30 - 35 + 1
    assert len(s.train) == math.floor(0.65 * n) and len(s.test) == math.floor(0.2 * n)
    assert s.n_vars == 10


# ------------------------------------------------------------------ evaluation


def test_evaluate_leaves_parameters_alone(trained, splits):
    before = trained.model.state_dict()
    r1 = evaluate(trained.model, splits.test, splits.standardizer)
    r2 = evaluate(trained.model, splits.test, splits.standardizer)
    after = trained.model.state_dict()
    assert all(np.array_equal(before[k], after[k]) for k in before)
    assert r1.same_values(r2)
    with pytest.raises(ContractError):
        evaluate(trained.model, [], splits.standardizer)
    with pytest.raises(ContractError):
        evaluate(trained.model, splits.test, None)


def test_persistence_constant_series():
    n = 120
    frame = AlignedFrame(
        tuple(range(n)), np.full(n, 42.0), np.random.default_rng(0).standard_normal((n, 2)), ("a", "b")
    )
    windows = make_windows(frame, 20)
    rep = persistence_baseline(windows)
    assert all(row["rmse"] == 0 and row["mape"] == 0 for row in rep.per_horizon)


def test_persistence_random_walk_grows_with_horizon():
    n = 3000
    walk = 100 + np.cumsum(np.random.default_rng(5).standard_normal(n))
    frame = AlignedFrame(tuple(range(n)), walk, np.zeros((n, 1)), ("z",))
    rep = persistence_baseline(make_windows(frame, 10))
    rmses = [row["rmse"] for row in rep.per_horizon]
    assert rmses[0] <= rmses[-1]
    # random-walk oracle: error variance at horizon h is h
    assert abs(rmses[0] - 1.0) < 0.1 and abs(rmses[-1] / math.sqrt(35) - 1.0) < 0.25


# ------------------------------------------------------------------ checkpoints


def test_checkpoint_round_trip(tmp_path, trained, splits):
    save_model(tmp_path / "m.semf", trained.model, trained.standardizer)
    model, std = load_model(tmp_path / "m.semf", TINY)
    assert std.checksum() == trained.standardizer.checksum()
    assert evaluate(model, splits.test, std).same_values(evaluate(trained.model, splits.test, trained.standardizer))


def test_checkpoint_config_mismatch(tmp_path, trained):
    save_model(tmp_path / "m.semf", trained.model, trained.standardizer)
    with pytest.raises(FormatError):
        load_model(tmp_path / "m.semf", TINY.replace(d_model=32))


def test_corrupt_checkpoint(tmp_path, trained):
    path = tmp_path / "m.semf"
    save_model(path, trained.model, trained.standardizer)
    raw = bytearray(path.read_bytes())
    path.write_bytes(bytes(raw[:-5]))
    with pytest.raises(FormatError):
        load_model(path, TINY)
