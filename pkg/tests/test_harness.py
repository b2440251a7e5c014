import json
import math
import warnings
from pathlib import Path

import numpy as np
import pytest

from robust_mud.ber import single_user_ber
from robust_mud.harness import (CSV_COLUMNS, AnalyticRecord, BerCurve, BerRecord, ConfigError,
                                ExperimentConfig, analytic_inputs, chip_noise, dump_config,
                                emit_results, format_results, load_config, mc_oracle_interference,
                                penalty_for,
                                parse_config, read_results, run_analytic_curve, run_ber_sweep,
                                run_oracle_curve, target_profile)
from robust_mud.interference import count_transitions
from robust_mud.cdma import build_composite_matrix, generate_fading, make_signatures
from robust_mud.detectors import decorrelate, detect_symbols, m_estimate_batch
from robust_mud.noise import sample_noise

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_config_round_trip():
    cfg = ExperimentConfig(n=63, num_users=5, snr_grid_db=(0.5, 3.25), epsilon=0.05, seed=2**63 + 7,
                           detectors=("huber", "least_squares"), tol=1e-9)
    assert cfg.detectors == ("huber", "decorrelator")
    assert parse_config(dump_config(cfg)) == cfg


def test_parse_comments_and_overrides():
    cfg = parse_config("n = 7  # short code\n\n# full comment\nnum_users=2\nsnr_grid_db = 1, 2,3\n",
                       seed=9, trials=None)
    assert (cfg.n, cfg.num_users, cfg.snr_grid_db, cfg.seed) == (7, 2, (1.0, 2.0, 3.0), 9)
    assert cfg.trials == ExperimentConfig().trials


@pytest.mark.parametrize("text", [
    "bogus = 1", "n 31", "n = thirty", "trials = 0", "snr_grid_db = 3, 1",
    "num_users = 40", "epsilon = 1.5", "kappa = 0.5", "detectors = huber, tukey",
    "cf_mode = wrong", "delays_mode = fractional", "n = 30", "pole_radius = 1.0",
    "peak_freq = 9000", "hampel_b = 1.0", "seed = -1",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.conf")


@pytest.mark.parametrize("name,eps,seed", [("fig_eps0p1.conf", 0.1, 1), ("fig_eps0p01.conf", 0.01, 2)])
def test_shipped_figure_configs(name, eps, seed):
    cfg = load_config(CONFIGS / name)
    assert (cfg.n, cfg.num_users, cfg.epsilon, cfg.kappa, cfg.seed) == (127, 6, eps, 100.0, seed)
    assert cfg.snr_grid_db == tuple(float(s) for s in range(0, 21, 4))
    assert cfg.trials == 100_000
    assert (cfg.pole_radius, cfg.peak_freq, cfg.symbol_rate) == (0.998, 80.0, 10_000.0)


def test_small_config_loads():
    cfg = load_config(CONFIGS / "small.conf")
    assert (cfg.n, cfg.num_users, cfg.seed) == (31, 4, 20230917)


@pytest.mark.parametrize("snr_db", [0.0, 8.0, 20.0])
@pytest.mark.parametrize("eps", [0.0, 0.1])
def test_chip_noise_convention(snr_db, eps):
    cfg = ExperimentConfig(epsilon=eps)
    p = chip_noise(cfg, snr_db)
    assert 1.0 / (2 * p.variance) == pytest.approx(10 ** (snr_db / 10), rel=1e-12)
    assert (p.epsilon, p.kappa) == (eps, 100.0)


def test_analytic_inputs_scaling():
    cfg = ExperimentConfig(n=7, num_users=2, epsilon=0.0)
    inp = analytic_inputs(cfg, 10.0)
    assert inp.noise.v == pytest.approx(chip_noise(cfg, 10.0).v * 7 * math.sqrt(2))
    assert inp.prof == target_profile(cfg)


SMALL = ExperimentConfig(n=7, num_users=2, snr_grid_db=(4.0, 12.0), trials=2 * 2**14 + 57, seed=11)


def _sweep_csv(cfg, workers=1):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return format_results(run_ber_sweep(cfg, workers), "csv")


@pytest.mark.slow
def test_sweep_is_deterministic():
    a = _sweep_csv(SMALL)
    assert a == _sweep_csv(SMALL)
    assert a != _sweep_csv(SMALL.replace(seed=12))


@pytest.mark.slow
def test_sweep_independent_of_workers():
    assert _sweep_csv(SMALL, 1) == _sweep_csv(SMALL, 2)


def test_sweep_record_types():
    cfg = SMALL.replace(trials=300)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        curves = run_ber_sweep(cfg)
    assert [c.detector for c in curves] == list(cfg.detectors)
    for c in curves:
        assert len(c.records) == 2
        for r in c.records:
            assert isinstance(r.errors, int) and isinstance(r.trials, int)
            assert 0 <= r.errors <= r.trials == 300 - c.excluded


@pytest.mark.slow
def test_single_user_high_snr():
    cfg = ExperimentConfig(n=31, num_users=1, snr_grid_db=(20.0,), epsilon=0.0, trials=10**5, seed=5)
    for c in run_ber_sweep(cfg):
        assert c.records[0].ber < 1e-2 and c.excluded == 0


@pytest.mark.slow
def test_single_user_decisions_agree():
    # Clipping residuals beyond a few noise stds moves the estimate slightly,
    # so decisions differ from least squares only in the deepest fades.
    cfg = ExperimentConfig(n=31, num_users=1, epsilon=0.0)
    rng = np.random.default_rng(21)
    T = 10**5
    M = build_composite_matrix(make_signatures(31, 1), [0])
    g = generate_fading(T, cfg.fading, rng)
    b = 2 * rng.integers(0, 2, T) - 1
    p = chip_noise(cfg, 20.0)
    Y = (b * g / math.sqrt(31))[:, None] * M[:, 0] + sample_noise(p, (T, 31), rng)
    ref = detect_symbols(decorrelate(Y, M)[:, 0], g)
    for det in cfg.detectors[1:]:
        dec = detect_symbols(m_estimate_batch(Y, M, penalty_for(cfg, det, p.v))[0][:, 0], g)
        assert np.mean(dec != b) < 1e-2
        assert np.count_nonzero(dec != ref) <= 1e-3 * T


def test_single_user_zero_delays_fewer_columns():
    cfg = ExperimentConfig(n=7, num_users=3, snr_grid_db=(30.0,), epsilon=0.0, trials=2000,
                           delays_mode="zero", seed=3)
    curves = run_ber_sweep(cfg)
    for c in curves:
        assert c.excluded == 0
        assert c.records[0].ber < 0.01


def test_analytic_single_user_closed_form():
    cfg = ExperimentConfig(n=31, num_users=1, snr_grid_db=(-5.0, 0.0, 5.0), epsilon=0.0, cf_mode="exact")
    curve = run_analytic_curve(cfg)
    for snr, rec in zip(cfg.snr_grid_db, curve.records):
        inp = analytic_inputs(cfg, snr)
        assert isinstance(rec, AnalyticRecord) and rec.stderr == 0.0
        assert rec.ber == pytest.approx(single_user_ber(31, inp.sigma_n1), abs=1e-6)


@pytest.mark.parametrize("mode", ["paper", "exact"])
def test_analytic_curve_monotone(mode):
    cfg = ExperimentConfig(n=31, num_users=4, snr_grid_db=(0.0, 5.0, 10.0, 15.0), cf_mode=mode)
    ber = run_analytic_curve(cfg).ber()
    assert np.all(np.diff(ber) < 0) and np.all((ber > 0) & (ber < 0.5))


@pytest.mark.slow
@pytest.mark.parametrize("mode", ["paper", "exact"])
def test_analytic_curve_matches_oracle(mode):
    cfg = ExperimentConfig(n=7, num_users=3, snr_grid_db=(0.0, 10.0), epsilon=0.1, cf_mode=mode,
                           trials=2 * 10**6, seed=4)
    an = run_analytic_curve(cfg)
    mc = run_oracle_curve(cfg)
    for a, m in zip(an.records, mc.records):
        assert abs(a.ber - m.ber) <= 4 * m.stderr


@pytest.mark.slow
def test_oracle_single_user_reference():
    est = mc_oracle_interference(count_transitions(make_signatures(7, 1).chips[0]), 1, 1.0,
                                 10**7, seed=17)
    ref = single_user_ber(7, 1.0)
    assert ref == pytest.approx(0.0050252, abs=1e-7)
    assert abs(est.ber - ref) <= 3 * est.stderr


def test_oracle_noiseless_single_user():
    prof = count_transitions(make_signatures(31, 1).chips[0])
    assert mc_oracle_interference(prof, 1, 0.0, 10**4).errors == 0
    with pytest.raises(ValueError):
        mc_oracle_interference(prof, 1, 1.0, 0)


def test_oracle_deterministic():
    prof = count_transitions(make_signatures(7, 1).chips[0])
    a = mc_oracle_interference(prof, 3, 2.0, 3 * 10**4, seed=8)
    assert a == mc_oracle_interference(prof, 3, 2.0, 3 * 10**4, seed=8)


def _curves():
    return [BerCurve("huber", [BerRecord(0.0, 1000, 17), BerRecord(2.5, 1000, 3)], 2, 5),
            BerCurve("analytic", [AnalyticRecord(0.0, 0, 0, 0.1 / 3)])]


def test_emit_empty_csv(tmp_path):
    path = emit_results([], "csv", tmp_path / "e.csv")
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"
    assert read_results(path) == []


def test_csv_rows_and_precision(tmp_path):
    path = emit_results(_curves(), "csv", tmp_path / "r.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert lines[3].split(",")[4] == repr(0.1 / 3)
    back = read_results(path)
    assert back[0] == _curves()[0].__class__("huber", _curves()[0].records)
    assert back[1].records[0].ber == 0.1 / 3


def test_json_round_trip(tmp_path):
    cfg = ExperimentConfig(seed=99)
    path = emit_results(_curves(), "json", tmp_path / "r.json", cfg)
    doc = json.loads(path.read_text())
    assert doc["seed"] == 99 and doc["config"]["n"] == 31
    back = read_results(path)
    assert back[0] == _curves()[0]
    assert back[1].records[0].ber == 0.1 / 3


def test_bad_format_and_path(tmp_path):
    with pytest.raises(ValueError):
        format_results(_curves(), "xml")
    with pytest.raises(OSError):
        emit_results(_curves(), "csv", tmp_path / "missing" / "x.csv")
