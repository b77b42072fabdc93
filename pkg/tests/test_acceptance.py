"""Acceptance suite: one test per primary criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
"""

import time

import numpy as np
import pytest

from embryonet import nn
from embryonet.config import ExperimentConfig
from embryonet.cv import fold_split, grouped_kfold
from embryonet.evaluation import auc, auc_pair_oracle, bootstrap_auc, random_baseline, roc_curve, scored_examples
from embryonet.experiment import embed_records, finetune, pretrain_autoencoder, run_experiment, train_grader
from embryonet.records import EmbryoRecord
from embryonet.report import FILES, emit_report, load_report, report_json
from embryonet.storage import load_checkpoint, load_dataset, quantize_frames, save_checkpoint, save_dataset
from embryonet.synthdata import generate_dataset
from embryonet.utils import derive_seed

RESULTS: list[str] = []

EPS = 1e-3
GRAD_TOL = 1e-4
INSTANCES = 20


def record(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# 1. gradient checks ---------------------------------------------------------

def separated_uniform(rng, shape, gap=5e-3):
    """Uniform [-1, 1] values at least ``gap`` apart, so max pooling has no kink within eps."""
    n = int(np.prod(shape))
    grid = np.linspace(-1, 1, int(2 / gap))
    return rng.choice(grid, size=n, replace=False).reshape(shape) + rng.uniform(0, gap / 10)


def grad_error(f, analytic: dict, inputs: dict) -> float:
    worst = 0.0
    for name, x in inputs.items():
        num = nn.finite_diff_grad(lambda v: f(**dict(inputs, **{name: v})), x, EPS)
        worst = max(worst, nn.max_relative_error(analytic[name], num))
    return worst


def conv_case(rng):
    c, o = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    k, stride, pad = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(0, 2))
    x = rng.uniform(-1, 1, (c, int(rng.integers(k, 8)), int(rng.integers(k, 8))))
    kernel = rng.uniform(-1, 1, (o, c, k, k))
    g = rng.uniform(-1, 1, nn.conv2d(x, kernel, stride, pad).shape)
    gx, gk = nn.conv2d_backward(g, x, kernel, stride, pad)
    return grad_error(lambda x, kernel: np.sum(g * nn.conv2d(x, kernel, stride, pad)),
                      {"x": gx, "kernel": gk}, {"x": x, "kernel": kernel})


def dense_case(rng):
    n, d, u = (int(v) for v in rng.integers(1, 6, size=3))
    x, w, b = rng.uniform(-1, 1, (n, d)), rng.uniform(-1, 1, (u, d)), rng.uniform(-1, 1, u)
    g = rng.uniform(-1, 1, (n, u))
    gx, gw, gb = nn.dense_backward(g, x, w)
    return grad_error(lambda x, w, b: np.sum(g * nn.dense(x, w, b)),
                      {"x": gx, "w": gw, "b": gb}, {"x": x, "w": w, "b": b})


def pool_case(rng):
    size = int(rng.integers(2, 4))
    shape = (int(rng.integers(1, 4)), size * int(rng.integers(1, 4)), size * int(rng.integers(1, 4)))
    x = separated_uniform(rng, shape)
    g = rng.uniform(-1, 1, nn.max_pool2d(x, size).shape)
    err_max = grad_error(lambda x: np.sum(g * nn.max_pool2d(x, size)),
                         {"x": nn.max_pool2d_backward(g, x, size)}, {"x": x})
    err_avg = grad_error(lambda x: np.sum(g * nn.avg_pool2d(x, size)),
                         {"x": nn.avg_pool2d_backward(g, x, size)}, {"x": x})
    return max(err_max, err_avg)


def lstm_case(rng):
    d, u = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    params = {k: rng.uniform(-1, 1, v.shape) for k, v in nn.init_lstm(rng, d, u).items()}
    x, h, c = rng.uniform(-1, 1, d), rng.uniform(-1, 1, u), rng.uniform(-1, 1, u)
    dh, dc = rng.uniform(-1, 1, u), rng.uniform(-1, 1, u)
    gx, gh, gc, gp = nn.lstm_step_backward(dh, dc, x, h, c, params)

    def f(x, h, c, **p):
        h2, c2 = nn.lstm_step(x, h, c, p)
        return np.sum(dh * h2 + dc * c2)
    return grad_error(f, {"x": gx, "h": gh, "c": gc, **gp}, {"x": x, "h": h, "c": c, **params})


def loss_case(rng):
    shape = tuple(int(v) for v in rng.integers(1, 5, size=2))
    p, t = rng.uniform(-1, 1, shape), rng.uniform(-1, 1, shape)
    err_l2 = grad_error(lambda p: nn.l2_loss(p, t).value, {"p": nn.l2_loss(p, t).gradient}, {"p": p})
    k = int(rng.integers(2, 7))
    logits, target = rng.uniform(-1, 1, (shape[0], k)), rng.dirichlet(np.ones(k), size=shape[0])
    err_ce = grad_error(lambda z: nn.softmax_cross_entropy(z, target).value,
                        {"z": nn.softmax_cross_entropy(logits, target).gradient}, {"z": logits})
    z, y = rng.uniform(-1, 1, shape[0]), rng.integers(0, 2, shape[0])
    err_bce = grad_error(lambda z: nn.binary_cross_entropy(z, y).value,
                         {"z": nn.binary_cross_entropy(z, y).gradient}, {"z": z})
    return max(err_l2, err_ce, err_bce)


def test_gradient_checks():
    cases = {"conv2d": conv_case, "dense": dense_case, "pooling": pool_case,
             "lstm_step": lstm_case, "losses": loss_case}
    start = time.perf_counter()
    worst = {name: max(fn(np.random.default_rng(seed)) for seed in range(INSTANCES))
             for name, fn in cases.items()}
    elapsed = time.perf_counter() - start
    ok = all(v < GRAD_TOL for v in worst.values()) and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record("gradient checks", ok, f"worst relative error {detail} (< {GRAD_TOL:g}, "
                                  f"{INSTANCES} instances each, {elapsed:.1f}s)")


# 2. AUC oracle ----------------------------------------------------------------

def test_auc_matches_pair_oracle():
    rng = np.random.default_rng(0)
    worst = 0.0
    for i in range(200):
        n = int(rng.integers(2, 101))
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        scores = rng.integers(0, 6, n) / 5 if i % 2 else rng.uniform(size=n)
        ex = scored_examples(scores, rng.permutation(labels))
        worst = max(worst, abs(auc(roc_curve(ex)) - auc_pair_oracle(ex)))
    record("trapezoid AUC == pair-count AUC", worst <= 1e-12, f"max |diff| {worst:.1e} over 200 instances")


# 3. grouped CV ------------------------------------------------------------------

def test_grouped_cv_properties():
    blank = np.zeros((1, 1, 1), dtype=np.float32)
    failures = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        records, n = [], 0
        for p in range(int(rng.integers(10, 80))):
            for _ in range(int(rng.integers(1, 6))):
                records.append(EmbryoRecord(f"E{n}", f"P{p}", blank, "kid", label=0))
                n += 1
        k = int(rng.integers(2, 11))
        a = grouped_kfold(records, k, seed)
        covered = []
        patient_folds = {}
        for f in range(k):
            train, val = fold_split(records, a, f)
            failures += bool({r.patient_id for r in train} & {r.patient_id for r in val})
            covered += [r.embryo_id for r in val]
            for r in val:
                patient_folds[r.patient_id] = f
        failures += sorted(covered) != sorted(r.embryo_id for r in records)
        counts = np.bincount(list(patient_folds.values()), minlength=k)
        failures += counts.max() - counts.min() > 1
    record("grouped CV", failures == 0, f"{failures} violations over 100 random datasets")


# 4. prevalence baseline -----------------------------------------------------------

def test_random_baseline_prevalence():
    pv = random_baseline(scored_examples(np.zeros(272), [1] * 216 + [0] * 56))
    record("random baseline", pv.ppv == 216 / 272 and pv.npv == 56 / 272,
           f"PPV {pv.ppv!r}, NPV {pv.npv!r}")


# 7. bootstrap ------------------------------------------------------------------------

def test_bootstrap_behaviour():
    perfect = bootstrap_auc(scored_examples(np.arange(40.0), [0] * 20 + [1] * 20), 1000, seed=0)
    noisy = scored_examples(np.random.default_rng(1).normal(size=60), [0, 1] * 30)
    a, b = bootstrap_auc(noisy, 1000, seed=5), bootstrap_auc(noisy, 1000, seed=5)

    def std_at(n, seed):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        return bootstrap_auc(scored_examples(labels + rng.normal(size=n), labels), 1000, seed).std
    small = float(np.median([std_at(20, s) for s in range(20)]))
    large = float(np.median([std_at(200, s) for s in range(20)]))
    ok = (perfect.mean, perfect.std) == (1.0, 0.0) and a == b and large < small
    record("bootstrap", ok, f"perfect mean {perfect.mean} std {perfect.std}; reproducible {a == b}; "
                            f"median std n=20 {small:.4f} > n=200 {large:.4f}")


# 5, 6, 8, 9. desk-scale end-to-end -------------------------------------------------

DESK = ExperimentConfig()
SEED = 0


@pytest.fixture(scope="module")
def desk_signal():
    start = time.perf_counter()
    dataset = generate_dataset(DESK.synthetic(SEED))
    ae, _ = pretrain_autoencoder(dataset, DESK, SEED)
    report = run_experiment(dataset, DESK, SEED, autoencoder=ae)
    return dataset, ae, report, time.perf_counter() - start


@pytest.fixture(scope="module")
def desk_null():
    start = time.perf_counter()
    cfg = DESK.replace(signal_strength=0.0)
    report = run_experiment(generate_dataset(cfg.synthetic(SEED)), cfg, SEED)
    return cfg, report, time.perf_counter() - start


@pytest.mark.slow
def test_end_to_end_signal_detection(desk_signal, desk_null):
    dataset, _, report, t_signal = desk_signal
    null_cfg, null_report, t_null = desk_null
    start = time.perf_counter()
    signal_again = run_experiment(dataset, DESK, SEED)
    null_again = run_experiment(generate_dataset(null_cfg.synthetic(SEED)), null_cfg, SEED)
    t_repeat = time.perf_counter() - start
    deterministic = (report_json(signal_again) == report_json(report)
                     and report_json(null_again) == report_json(null_report))
    signal_auc = report.pooled["model"]["auc"]
    null_auc = null_report.pooled["model"]["auc"]
    combined = t_signal + t_null
    ok = signal_auc >= 0.75 and 0.4 <= null_auc <= 0.6 and deterministic and combined <= 900
    record("end-to-end signal detection", ok,
           f"signal AUC {signal_auc:.4f} (>= 0.75), zero-signal AUC {null_auc:.4f} (in [0.4, 0.6]), "
           f"deterministic {deterministic}, runtime {combined:.0f}s (+{t_repeat:.0f}s repeat)")


@pytest.mark.slow
def test_transfer_contract(desk_signal):
    dataset, ae, _, _ = desk_signal
    embeddings = embed_records(ae, dataset.graded + dataset.kid)
    grader = train_grader(dataset.graded, embeddings, DESK, derive_seed(SEED, "grade", "all"))
    seed = derive_seed(SEED, "binary", "all")
    head_only = finetune(grader, dataset.kid, embeddings, DESK.replace(transfer_policy="head-only"), seed)
    full = finetune(grader, dataset.kid, embeddings, DESK.replace(transfer_policy="full-finetune"), seed)
    frozen = all(head_only.trunk[k].tobytes() == grader.trunk[k].tobytes() for k in grader.trunk)
    moved = any(not np.array_equal(full.trunk[k], grader.trunk[k]) for k in grader.trunk)
    record("transfer contract", frozen and moved,
           f"head-only trunk bit-identical {frozen}, full-finetune trunk changed {moved}")


@pytest.mark.slow
def test_round_trips(desk_signal, tmp_path):
    dataset, ae, report, _ = desk_signal
    save_dataset(dataset, tmp_path / "data")
    loaded = load_dataset(tmp_path / "data")
    data_ok = len(loaded) == len(dataset) and all(
        (a.embryo_id, a.patient_id, a.grades, a.label) == (b.embryo_id, b.patient_id, b.grades, b.label)
        and np.abs(a.frames.astype(np.float64) - b.frames).max() <= 1 / 255
        and np.array_equal(quantize_frames(a.frames), quantize_frames(b.frames))
        for a, b in zip(dataset, loaded))

    embeddings = embed_records(ae, dataset.graded[:40] + dataset.kid[:40])
    grader = train_grader(dataset.graded[:40], embeddings, DESK.replace(grade_epochs=1), 1)
    binary = finetune(grader, dataset.kid[:40], embeddings, DESK.replace(binary_epochs=1), 2)
    ckpt_ok = True
    for name, model in (("ae", ae), ("grade", grader), ("binary", binary)):
        back = load_checkpoint(save_checkpoint(model, tmp_path / f"{name}.ckpt"))
        before = getattr(model, "params", None) or {**model.trunk, **{"head." + k: v for k, v in model.head.items()}}
        after = getattr(back, "params", None) or {**back.trunk, **{"head." + k: v for k, v in back.head.items()}}
        ckpt_ok &= before.keys() == after.keys() and all(before[k].tobytes() == after[k].tobytes() for k in before)

    emit_report(report, tmp_path / "r1")
    emit_report(load_report(tmp_path / "r1" / "report.json"), tmp_path / "r2")
    report_ok = all((tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes() for f in FILES)
    record("round trips", data_ok and ckpt_ok and report_ok,
           f"dataset within 1/255 {data_ok}, checkpoints bit-exact {ckpt_ok}, report byte-identical {report_ok}")


@pytest.mark.slow
def test_reference_annotations(desk_signal, tmp_path):
    _, _, report, _ = desk_signal
    emit_report(report, tmp_path)
    text = (tmp_path / "report.json").read_text()
    ref = load_report(tmp_path / "report.json").reference_values
    ok = (ref["status"] == "reference, not reproduced"
          and ref["model_auc"] == {"mean": 0.82, "std": 0.07}
          and ref["panel_auc"] == {"mean": 0.58, "std": 0.04}
          and (ref["model_ppv"], ref["model_npv"]) == (0.93, 0.58)
          and ref["panel_ppv"] == {"mean": 0.81, "std": 0.01}
          and ref["panel_npv"] == {"mean": 0.23, "std": 0.08}
          and '"reference, not reproduced"' in text)
    record("reference annotations", ok, "AUC 0.82+-0.07 / 0.58+-0.04, PPV 0.93 / 0.81+-0.01, "
                                        "NPV 0.58 / 0.23+-0.08 marked 'reference, not reproduced'")
