import pytest

from embryonet.errors import StageError
from embryonet.experiment import pretrain_autoencoder, run_experiment
from embryonet.records import Dataset
from embryonet.report import report_json
from embryonet.synthdata import generate_dataset


def test_report_structure(small_report, small_experiment_config):
    r = small_report
    assert len(r.folds) == small_experiment_config.folds
    assert len(r.predictions) == small_experiment_config.n_kid
    assert len({p["embryo_id"] for p in r.predictions}) == len(r.predictions)
    assert set(r.pooled["model"]["predictive_values"]) == {"fixed", "youden"}
    assert set(r.panel["pooled_mean_score"]["predictive_values"]) == {"recommend_transfer", "youden"}
    assert len(r.panel["per_grader"]["auc"]) == 5
    assert 0.0 <= r.pooled["model"]["auc"] <= 1.0
    assert all(0.0 <= p["score"] <= 1.0 for p in r.predictions)


def test_run_is_deterministic(small_report, small_experiment_config):
    cfg = small_experiment_config
    again = run_experiment(generate_dataset(cfg.synthetic()), cfg)
    assert report_json(again) == report_json(small_report)


def test_supplied_autoencoder_gives_same_report(small_report, small_experiment_config):
    cfg = small_experiment_config
    dataset = generate_dataset(cfg.synthetic())
    ae, _ = pretrain_autoencoder(dataset, cfg, cfg.seed)
    assert report_json(run_experiment(dataset, cfg, autoencoder=ae)) == report_json(small_report)


def test_missing_dataset_is_stage_error(tmp_path, small_experiment_config):
    with pytest.raises(StageError) as err:
        run_experiment(tmp_path / "nothing", small_experiment_config)
    assert err.value.stage == "load"


def test_empty_kid_is_stage_error(small_experiment_config):
    ds = generate_dataset(small_experiment_config.synthetic())
    with pytest.raises(StageError):
        run_experiment(Dataset(ds.unlabeled, ds.graded, []), small_experiment_config)
