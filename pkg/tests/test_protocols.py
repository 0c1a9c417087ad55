import numpy as np
import pytest

from fracop.data import DatasetFile, gen_heat1d
from fracop.errors import ConfigError, UnknownVariant
from fracop.model import ConoConfig, ConoModel
from fracop.protocols import (downsample, mean_by, protocol_ablation, protocol_data_ratio,
                              protocol_noise, protocol_resolution, resolution_family, rows_to_csv)
from fracop.train import TrainConfig, evaluate, prepare_data, train_loop

CFG = ConoConfig(width=4, modes=4)
TCFG = TrainConfig(epochs=2, batch_size=6)


@pytest.fixture(scope="module")
def data():
    return gen_heat1d(24, grid_n=32, seed=0)


def test_resolution_family_strides_finest():
    fam = resolution_family(lambda n: gen_heat1d(3, grid_n=n, seed=1), [16, 64, 32])
    assert sorted(fam) == [16, 32, 64]
    np.testing.assert_array_equal(fam[16].inputs, fam[64].inputs[:, ::4])
    with pytest.raises(ConfigError):
        resolution_family(lambda n: gen_heat1d(2, grid_n=n), [24, 64])
    grid2d = DatasetFile(np.arange(2 * 9 * 9).reshape(2, 9, 9, 1).astype(float), np.ones((2, 9, 9, 1)))
    fam2 = resolution_family(lambda n: grid2d, [5, 9], endpoint=True)
    assert fam2[5].input_shape == (5, 5, 1)
    np.testing.assert_array_equal(fam2[5].inputs[:, -1, -1], grid2d.inputs[:, -1, -1])
    assert downsample(grid2d, 1) is grid2d


def test_resolution_protocol_rows(data):
    model = ConoModel.create(CFG, seed=0)
    fam = resolution_family(lambda n: gen_heat1d(12, grid_n=n, seed=0), [16, 32])
    rows = protocol_resolution(model, fam)
    assert [r["resolution"] for r in rows] == [16, 32]
    assert rows[1]["rel_l2"] == evaluate(model, fam[32].split()[1])
    with pytest.raises(ConfigError):
        protocol_resolution(model, {4: downsample(fam[16], 4)})
    assert protocol_resolution(model, {}) == []


def test_resolution_at_training_grid_reproduces_logged_metric(data):
    model = ConoModel.create(CFG, seed=0)
    train, test = prepare_data(data, TCFG)
    res = train_loop(model, train, test, TCFG)
    rows = protocol_resolution(res.model, {32: data})
    assert abs(rows[0]["rel_l2"] - res.metrics.rows[-1]["test_rel_l2"]) < 1e-12


def test_noise_grid_rows(data):
    rows = protocol_noise(data, CFG, TCFG, [0, 0.001, 0.01])
    assert [r["gamma"] for r in rows] == [0.0, 0.001, 0.01]
    assert all(np.isfinite(r["rel_l2"]) for r in rows)


def test_ratio_one_matches_plain_run(data):
    rows = protocol_data_ratio(data, CFG, TCFG, [1.0, 0.5], seeds=[2])
    tcfg = TrainConfig(epochs=2, batch_size=6, seed=2)
    train, test = prepare_data(data, tcfg)
    plain = train_loop(ConoModel.create(CFG, 2), train, test, tcfg)
    assert rows[0]["rel_l2"] == plain.metrics.rows[-1]["test_rel_l2"]
    assert rows[1]["ratio"] == 0.5 and rows[1]["seed"] == 2


def test_ablation_rows_and_unknown(data):
    rows = protocol_ablation(data, CFG, TCFG, variants=("full", "no_frft"), seeds=(0, 1))
    assert [(r["variant"], r["seed"]) for r in rows] == [
        ("full", 0), ("full", 1), ("no_frft", 0), ("no_frft", 1)]
    means = mean_by(rows, "variant")
    assert set(means) == {"full", "no_frft"}
    assert means["full"] == pytest.approx((rows[0]["rel_l2"] + rows[1]["rel_l2"]) / 2)
    with pytest.raises(UnknownVariant):
        protocol_ablation(data, CFG, TCFG, variants=("bogus",))


def test_rows_to_csv():
    text = rows_to_csv([{"a": 1, "b": 0.1}, {"a": 2, "b": np.float64(1 / 3)}])
    assert text == "a,b\n1,0.1\n2,0.3333333333333333\n"
    assert rows_to_csv([]) == ""
