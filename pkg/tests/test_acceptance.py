"""Acceptance criteria, one test per criterion, each recording a PASS/FAIL line.

The lines are repeated in the ``acceptance criteria`` section of the pytest
summary. Criteria 6 and 7 train on the desk preset and take minutes.
"""
import json
import os
import time

import numpy as np
import pytest

from dygpp import cli
from dygpp.baselines import PersonalTopBaseline, TopBaseline
from dygpp.encoders import compute_cooccurrence
from dygpp.events import PASSENGER, STATION, EventLog, chronological_split
from dygpp.metrics import auc, average_precision, evaluate
from dygpp.model import ModelConfig
from dygpp.sampling import NeighborSequence, partition_time_batches, sample_recent_neighbors
from dygpp.synthetic import generate_events, preset
from dygpp.toy import toy_config, toy_gradcheck
from dygpp.trainer import TrainConfig, load_model, save_checkpoint, train

from .conftest import random_log
from .oracles import ap_oracle, auc_oracle, batches_oracle, neighbors_oracle

DESK_SEED = 7
# criterion 7 fixes no epoch budget; each of the six runs is capped here
ABLATION_EPOCHS = 3
ABLATION_SEEDS = (7, 8, 9)


def desk_split(noise_rate=None, inductive_fraction=0.1):
    overrides = {} if noise_rate is None else {"noise_rate": noise_rate}
    log = EventLog.from_array(generate_events(preset("desk", seed=DESK_SEED, **overrides)))
    return chronological_split(log, inductive_fraction=inductive_fraction)


def test_criterion_1_gradcheck(acceptance):
    cfg = toy_config(ModelConfig())
    start = time.perf_counter()
    reports = toy_gradcheck(cfg, seed=0, h=1e-6)
    elapsed = time.perf_counter() - start
    worst = max(reports.values(), key=lambda r: r.max_rel_error)
    required = {"node.passenger", "node.station", "time.omega", "co.weight", "co.bias",
                "proj.weight", "proj.bias", "ffn.0.weight", "ffn.0.bias", "out.weight",
                "out.bias", "head.w1", "head.b1", "head.w2", "head.b2"}
    ok = (required <= set(reports) and worst.max_rel_error < 1e-4 and elapsed < 10.0
          and cfg.num_neighbors == 4 and max(cfg.dim_node, cfg.dim_edge, cfg.dim_time,
                                               cfg.dim_channel, cfg.dim_embed, cfg.dim_out) <= 8)
    acceptance("1", ok, f"{len(reports)} blocks, worst {worst.name} {worst.max_rel_error:.2e} "
                        f"(< 1e-4), {elapsed:.1f} s (< 10 s)")
    assert ok


def _figure_seq(kind, ids):
    ids = np.asarray(ids)
    zeros = np.zeros_like(ids)
    return NeighborSequence(owner_id=int(ids[0]), owner_kind=kind, time=0, ids=ids, labels=zeros,
                            times=zeros, padding=np.zeros(len(ids), bool))


def test_criterion_2_figure_3(acceptance):
    co_u, co_s = compute_cooccurrence(_figure_seq(PASSENGER, [1, 1, 2, 1, 3]),
                                      _figure_seq(STATION, [2, 2, 1, 1]))
    ok = (co_u.tolist() == [[1, 2], [2, 0], [1, 1], [2, 0], [1, 0]]
          and co_s.tolist() == [[1, 1], [1, 0], [2, 1], [2, 1]])
    acceptance("2", ok, f"Co_u1={co_u.tolist()} Co_s2={co_s.tolist()}")
    assert ok


def test_criterion_3_metric_oracles(acceptance):
    rng = np.random.default_rng(3)
    worst, monotone_bad = 0.0, 0
    for _ in range(1000):
        n = int(rng.integers(2, 13))
        y = rng.integers(0, 2, n)
        y[rng.choice(n, 2, replace=False)] = [0, 1]
        s = rng.integers(0, 4, n).astype(float) if rng.random() < 0.5 else rng.normal(size=n)
        worst = max(worst, abs(average_precision(s, y) - ap_oracle(s, y)),
                    abs(auc(s, y) - auc_oracle(s, y)))
        # strictly increasing map: random positive slope and exponent plus a shift
        a, b, c = rng.uniform(0.1, 3.0, 3)
        f = a * np.sign(s) * np.abs(s) ** b + np.exp(c * s) + rng.normal()
        if (abs(average_precision(f, y) - average_precision(s, y)) > 1e-12
                or abs(auc(f, y) - auc(s, y)) > 1e-12):
            monotone_bad += 1
    ok = worst <= 1e-12 and monotone_bad == 0
    acceptance("3", ok, f"1000 instances, max |metric - oracle| = {worst:.1e}; "
                        f"{monotone_bad}/1000 monotone maps changed a metric")
    assert ok


def test_criterion_4_batching(acceptance):
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(1000):
        gap = int(rng.integers(1, 50))
        ts = np.cumsum(rng.integers(0, 30, int(rng.integers(0, 80))))
        batches = partition_time_batches(ts, gap)
        idx = [i for b in batches for i in range(b.start, b.stop)]
        if (idx != list(range(len(ts))) or any(b.span > gap for b in batches)
                or [list(range(b.start, b.stop)) for b in batches] != batches_oracle(ts.tolist(), gap)):
            bad += 1
    acceptance("4", bad == 0, f"{1000 - bad}/1000 streams concatenate, respect the span and match the scan")
    assert bad == 0


def test_criterion_5_sampling(acceptance):
    rng = np.random.default_rng(5)
    bad = leaks = 0
    for _ in range(1000):
        log = random_log(rng, n=4, m=4, k=int(rng.integers(1, 40)), t_max=30)
        rows = log.to_array().tolist()
        kind = PASSENGER if rng.random() < 0.5 else STATION
        node = int(rng.integers(1, (log.num_passengers if kind == PASSENGER else log.num_stations) + 1))
        t = int(rng.integers(0, 33))
        length = int(rng.integers(2, 10))
        seq = sample_recent_neighbors(log, node, kind, t, length)
        got = [(i, lab, ts) for i, lab, ts, pad in seq.entries[1:] if not pad]
        bad += got != neighbors_oracle(rows, node, kind, t, length)
        leaks += any(ts >= t for _, _, ts in got)
    ok = bad == 0 and leaks == 0
    acceptance("5", ok, f"{1000 - bad}/1000 logs match the full scan; {leaks} sequences hold t' >= t")
    assert ok


@pytest.mark.slow
def test_criterion_6_pipeline_calibration(acceptance):
    # plain chronological holdout: withheld stations would hide transitions by construction
    clean = desk_split(noise_rate=0.0, inductive_fraction=0.0)
    ptop = evaluate(PersonalTopBaseline().fit(clean.train), clean, "test", seed=0)
    ptop_ok = abs(ptop["ap"] - 1.0) <= 1e-9
    acceptance("6a", ptop_ok, f"Personal TOP at noise 0: test AP {ptop['ap']:.12f} (1 +- 1e-9)")

    split = desk_split()
    top = evaluate(TopBaseline().fit(split.train), split, "test", seed=0)
    start = time.perf_counter()
    result = train(split, ModelConfig(), TrainConfig(max_epochs=50, seed=DESK_SEED))
    metrics = evaluate(result.model, split, "test", seed=0)
    elapsed = time.perf_counter() - start
    auc_ok = metrics["auc"] >= 0.85
    margin = metrics["ap"] - top["ap"]
    margin_ok = margin >= 0.05
    acceptance("6b", auc_ok, f"DyGPP test AUC {metrics['auc']:.4f} (>= 0.85), "
                             f"best epoch {result.best_epoch}/{len(result.history)}")
    acceptance("6c", margin_ok, f"DyGPP test AP {metrics['ap']:.4f} - TOP AP {top['ap']:.4f} "
                                f"= {margin:+.4f} (>= 0.05)")
    cores = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1
    time_ok = elapsed < 600
    acceptance("6d", time_ok, f"train + evaluate {elapsed:.0f} s (< 600 s stated for 4 cores; "
                              f"this host has {cores})")
    assert ptop_ok and auc_ok
    assert margin_ok
    if not time_ok and cores < 4:
        pytest.xfail(f"wall-time bound is stated for a 4-core CPU; this host has {cores}")
    assert time_ok


@pytest.mark.slow
def test_criterion_7_cooccurrence_ablation(acceptance):
    split = desk_split()
    drops = []
    for seed in ABLATION_SEEDS:
        aps = []
        for ablate in (False, True):
            res = train(split, ModelConfig(ablate_co=ablate),
                        TrainConfig(max_epochs=ABLATION_EPOCHS, seed=seed))
            aps.append(evaluate(res.model, split, "test", seed=0)["ap"])
        drops.append(aps[0] - aps[1])
    mean_drop = float(np.mean(drops))
    ok = mean_drop >= 0.02
    acceptance("7", ok, f"AP(full) - AP(ablate.co) per seed {[round(d, 4) for d in drops]}, "
                        f"mean {mean_drop:+.4f} (>= 0.02), {ABLATION_EPOCHS} epochs per run")
    assert ok


TINY_CFG = """\
model.num_neighbors = 5
model.dim_node = 8
model.dim_edge = 6
model.dim_time = 6
model.dim_channel = 4
model.dim_embed = 8
model.dim_out = 6
train.max_epochs = 2
train.seed = 11
"""


def test_criterion_8_determinism_and_persistence(acceptance, tmp_path, capsys):
    data = tmp_path / "data.csv"
    (tmp_path / "run.cfg").write_text(TINY_CFG)
    assert cli.main(["generate", "--preset", "tiny", "--seed", "5", "--days", "30",
                     "--out", str(data)]) == 0
    outputs = []
    for run in ("a", "b"):
        ckpt = tmp_path / f"{run}.ckpt"
        assert cli.main(["train", "--data", str(data), "--config", str(tmp_path / "run.cfg"),
                         "--out", str(ckpt)]) == 0
        capsys.readouterr()
        assert cli.main(["evaluate", "--data", str(data), "--ckpt", str(ckpt)]) == 0
        outputs.append(capsys.readouterr().out)
    same_json = outputs[0] == outputs[1] and json.loads(outputs[0])["n"] > 0
    same_ckpt = (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    log = EventLog.from_array(generate_events(preset("tiny", seed=5, days=30)))
    split = chronological_split(log, inductive_fraction=0.1)
    cfg = ModelConfig(num_neighbors=5, dim_node=8, dim_edge=6, dim_time=6, dim_channel=4,
                      dim_embed=8, dim_out=6)
    result = train(split, cfg, TrainConfig(max_epochs=1, seed=3))
    save_checkpoint(result.model.store, tmp_path / "m.ckpt", result.adam)
    loaded, _ = load_model(tmp_path / "m.ckpt", cfg, log.num_passengers, log.num_stations)
    q = np.random.default_rng(8).choice(len(log), 1000, replace=False)
    args = (log, log.passengers[q], log.stations[q], log.timestamps[q])
    before = result.model.predict_proba(*args)
    after = loaded.predict_proba(*args)
    bitwise = before.tobytes() == after.tobytes()
    ok = same_json and same_ckpt and bitwise
    acceptance("8", ok, f"metric JSON identical across runs: {same_json}; checkpoints identical: "
                        f"{same_ckpt}; 1000 round-trip predictions bitwise equal: {bitwise}")
    assert ok


def test_criterion_9_early_stopping(acceptance):
    log = EventLog.from_array(generate_events(preset("tiny", seed=1, days=3)))
    split = chronological_split(log)
    cfg = ModelConfig(num_neighbors=3, dim_node=4, dim_edge=4, dim_time=4, dim_channel=2,
                      dim_embed=4, dim_out=4)
    run = TrainConfig(max_epochs=100)
    # improvements at epochs 1, 2, 4 and 7, then a plateau below the peak
    aps = [0.50, 0.60, 0.55, 0.62, 0.61, 0.62, 0.70] + [0.69] * 93
    calls = []

    def hook(epoch, model):
        calls.append(epoch)
        return aps[epoch - 1], 0.5

    result = train(split, cfg, run, validation_hook=hook)
    ok = (run.patience == 20 and result.best_epoch == 7 and calls[-1] == 7 + run.patience
          and len(result.history) == 27 and result.history[-1]["patience_left"] == 0)
    acceptance("9", ok, f"default patience {run.patience}; last improvement at epoch "
                        f"{result.best_epoch}, halted after epoch {calls[-1]}")
    assert ok
