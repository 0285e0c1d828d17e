import json
from dataclasses import replace

import numpy as np
import pytest

from dygpp.autodiff import NumericError
from dygpp.autodiff.checkpoint import CheckpointError
from dygpp.events import DataError, EventLog, chronological_split
from dygpp.model import DyGPPModel, ModelConfig
from dygpp.synthetic import generate_events, preset
from dygpp.trainer import TrainConfig, load_model, progress_line, train

TINY = ModelConfig(num_neighbors=4, dim_node=6, dim_edge=4, dim_time=4, dim_channel=3, dim_embed=6,
                   dim_out=4)


@pytest.fixture(scope="module")
def split():
    log = EventLog.from_array(generate_events(preset("tiny", seed=1, days=6)))
    return chronological_split(log, inductive_fraction=0.2, seed=0)


def _hook(aps):
    calls = []

    def hook(epoch, model):
        calls.append(epoch)
        return aps[epoch - 1], 0.5
    return hook, calls


@pytest.mark.parametrize("aps, patience, stop", [
    ([0.5, 0.6, 0.6, 0.6, 0.6], 1, 3),
    ([0.5, 0.6, 0.55, 0.61, 0.6, 0.6, 0.6, 0.6], 3, 7),
    ([0.9] * 30, 20, 21),
    ([0.1 * k for k in range(10)], 2, 10),
])
def test_early_stopping_halts_patience_epochs_after_last_improvement(split, aps, patience, stop):
    hook, calls = _hook(aps)
    res = train(split, TINY, TrainConfig(max_epochs=len(aps), patience=patience, seed=0),
                validation_hook=hook)
    assert calls == list(range(1, stop + 1))
    assert res.best_epoch == int(np.argmax(aps[:stop])) + 1
    if stop < len(aps):
        assert res.history[-1]["patience_left"] == 0


def test_best_parameters_are_returned(split, tmp_path):
    aps = [0.5, 0.9, 0.4]
    snapshots = []

    def hook(epoch, model):
        snapshots.append(model.store["head.w2"].value.copy())
        return aps[epoch - 1], 0.5
    path = tmp_path / "best.ckpt"
    res = train(split, TINY, TrainConfig(max_epochs=3, seed=0, checkpoint_path=str(path)),
                validation_hook=hook)
    assert res.best_epoch == 2
    np.testing.assert_array_equal(res.model.store["head.w2"].value, snapshots[1])
    model, adam = load_model(path, TINY, split.full.num_passengers, split.full.num_stations)
    np.testing.assert_array_equal(model.store["head.w2"].value, snapshots[1])
    assert adam.step_count == res.adam.step_count


def test_single_epoch_writes_one_checkpoint(split, tmp_path):
    path = tmp_path / "one.ckpt"
    res = train(split, TINY, TrainConfig(max_epochs=1, seed=0, checkpoint_path=str(path)))
    assert len(res.history) == 1 and path.exists()
    entry = res.history[0]
    assert set(entry) == {"epoch", "train_loss", "val_ap", "val_auc", "patience_left"}
    assert progress_line(entry).startswith("epoch=1 train_loss=")
    assert json.loads(res.history_jsonl()) == entry


def test_identical_seeds_give_identical_histories(split):
    runs = [train(split, TINY, TrainConfig(max_epochs=2, seed=5)) for _ in range(2)]
    assert runs[0].history_jsonl() == runs[1].history_jsonl()
    other = train(split, TINY, TrainConfig(max_epochs=2, seed=6))
    assert other.history_jsonl() != runs[0].history_jsonl()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_names_epoch_and_batch(split):
    model = DyGPPModel.initialize(TINY, split.full.num_passengers, split.full.num_stations, 0)
    model.store["head.b2"].value[...] = np.nan
    with pytest.raises(NumericError, match=r"epoch 1, batch 0"):
        train(split, TINY, TrainConfig(max_epochs=1), model=model)


def test_checkpoint_from_other_width_names_the_parameter(split, tmp_path):
    path = tmp_path / "w.ckpt"
    train(split, TINY, TrainConfig(max_epochs=1, checkpoint_path=str(path)))
    wider = replace(TINY, dim_node=8)
    with pytest.raises(CheckpointError, match="'node.passenger'"):
        load_model(path, wider, split.full.num_passengers, split.full.num_stations)


def test_config_and_data_errors(split):
    with pytest.raises(ValueError):
        TrainConfig(patience=0)
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)
    empty_val = chronological_split(split.full, (0.9, 0.0, 0.1))
    with pytest.raises(DataError, match="validation"):
        train(empty_val, TINY, TrainConfig(max_epochs=1))


def test_withheld_stations_are_never_training_negatives(split, monkeypatch):
    import dygpp.model as model_module
    seen = []
    original = model_module.sample_negatives

    def spy(num_stations, stations, rng, candidates=None):
        out = original(num_stations, stations, rng, candidates)
        seen.append(out)
        return out
    monkeypatch.setattr(model_module, "sample_negatives", spy)
    assert split.inductive_stations
    train(split, TINY, TrainConfig(max_epochs=1), validation_hook=lambda e, m: (0.5, 0.5))
    drawn = set(np.concatenate(seen).tolist())
    assert drawn <= set(split.train.stations.tolist())
    assert not drawn & split.inductive_stations
