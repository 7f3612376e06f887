import dataclasses
import json
import math

import numpy as np
import pytest

from dsmpa import _kernels
from dsmpa.cli import CSV_HEADER, curves_to_csv, main
from dsmpa.errors import ConfigurationError, DomainError
from dsmpa.montecarlo import (
    BerCurve,
    BerPoint,
    monte_carlo_ber,
    point_seed,
    run_ber_sweep,
    run_theory_sweep,
)
from dsmpa.scenarios import DEPLOYMENTS, ScenarioConfig, apply_overrides, load_config, preset

# small budgets keep these runs to a fraction of a second
FAST = dict(max_bits=400_000, min_bit_errors=100, min_frames=100, frames_per_batch=100)


def fast(**kw):
    return ScenarioConfig(**{**FAST, **kw})


class TestScenarioConfig:
    def test_defaults(self):
        sc = ScenarioConfig()
        assert sc.position_x == (1.5, 7.5, 18.5)
        assert sc.carrier_freq == 28e9 and sc.rician_factor == 5.0 and sc.path_loss_exponent == 2.2
        assert sc.codebook().size == 256 and sc.modulation == "BPSK"
        assert np.array_equal(sc.snr_grid(), np.arange(0, 41, 2.0))

    def test_grid(self):
        assert np.array_equal(fast(snr_min_db=1, snr_max_db=2, snr_step_db=0.5).snr_grid(), [1, 1.5, 2])
        assert fast(snr_min_db=3, snr_max_db=3).snr_grid().tolist() == [3.0]

    @pytest.mark.parametrize("kw", [
        dict(scheme="ofdm"),
        dict(snr_min_db=5, snr_max_db=1),
        dict(snr_step_db=0),
        dict(position_x=(1.0, 2.0)),
        dict(min_bit_errors=0),
        dict(seed=-1),
        dict(snr_reference="peak"),
        dict(modulation_order=3),
        dict(quad_nodes=2),
        dict(frames_per_batch=0),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            ScenarioConfig(**kw)

    def test_noise_reference(self):
        rx, tx = ScenarioConfig(), ScenarioConfig(snr_reference="transmit")
        gain = np.mean(rx.channel_stats().path_gain)
        assert tx.noise_level(0) == pytest.approx(0.75)
        assert rx.noise_level(10) == pytest.approx(0.075 * gain)

    def test_presets(self):
        assert [s.modulation_order for s in preset("fig3")] == [2, 4]
        assert all(s.theory for s in preset("fig3"))
        assert [s.scheme for s in preset("fig4")] == ["dsm_pa", "dsm_pa_no_alamouti", "coherent_sm_pa"]
        assert [s.position_x for s in preset("fig5")] == list(DEPLOYMENTS.values())
        assert len({s.name for s in preset("fig5")}) == 3
        with pytest.raises(ConfigurationError):
            preset("fig9")

    def test_overrides(self):
        out = apply_overrides(preset("fig4"), seed=5, snr_max_db=None)
        assert all(s.seed == 5 and s.snr_max_db == 40 for s in out)
        with pytest.raises(ConfigurationError):
            apply_overrides(preset("fig4"), colour="red")


class TestConfigFile:
    def test_flat_yaml(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("seed: 11\nposition_x: [2.0, 10.0, 18.0]\nrician_factor: 3\n")
        cfg = load_config(p)
        sc = apply_overrides(preset("custom"), **cfg)[0]
        assert sc.seed == 11 and sc.position_x == (2.0, 10.0, 18.0) and sc.rician_factor == 3

    def test_empty(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("")
        assert load_config(p) == {}

    @pytest.mark.parametrize("text", ["colour: red\n", "geometry:\n  x: 1\n", "- 1\n- 2\n", "a: [\n"])
    def test_rejected(self, tmp_path, text):
        p = tmp_path / "c.yaml"
        p.write_text(text)
        with pytest.raises(ConfigurationError):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "nope.yaml")


class TestMonteCarlo:
    def test_noiseless(self):
        p = monte_carlo_ber(fast(min_frames=0, max_bits=100_000), 80.0, np.random.default_rng(0))
        assert p.bits_sent >= 100_000 and p.bit_errors == 0 and p.ber_sim == 0

    def test_mid_range(self):
        p = monte_carlo_ber(fast(), 8.0, np.random.default_rng(0))
        assert 0 < p.ber_sim < 0.5

    def test_same_seed_same_point(self):
        a = monte_carlo_ber(fast(), 10.0, np.random.default_rng(4))
        b = monte_carlo_ber(fast(), 10.0, np.random.default_rng(4))
        assert (a.bits_sent, a.bit_errors) == (b.bits_sent, b.bit_errors)

    def test_bit_accounting(self):
        sc = fast(blocks_per_frame=7, frames_per_batch=3, min_frames=0, min_bit_errors=10**9,
                  max_bits=1000)
        p = monte_carlo_ber(sc, 10.0, np.random.default_rng(0))
        # data blocks only: the reference block of each frame carries no bits
        per_frame = 7 * 8
        assert p.bits_sent % per_frame == 0
        assert p.bits_sent == math.ceil(1000 / per_frame) * per_frame

    def test_stopping_rule(self):
        sc = fast(min_bit_errors=50, min_frames=0, max_bits=10**7)
        p = monte_carlo_ber(sc, 4.0, np.random.default_rng(1))
        assert p.bit_errors >= 50 and p.bits_sent < 10**7
        assert p.rel_std_error <= 1 / math.sqrt(50)

    @pytest.mark.parametrize("scheme", ["dsm_pa", "dsm_pa_no_alamouti", "coherent_sm_pa"])
    def test_schemes_run(self, scheme):
        p = monte_carlo_ber(fast(scheme=scheme), 6.0, np.random.default_rng(2))
        assert 0 < p.ber_sim < 0.5

    def test_normalisation_shift_is_exact(self):
        # measuring Eb at the transmitter shifts the grid by the mean path gain in dB
        rx = fast()
        tx = dataclasses.replace(rx, snr_reference="transmit")
        offset = -10 * np.log10(np.mean(rx.channel_stats().path_gain))
        assert tx.noise_level(10 + offset) == pytest.approx(rx.noise_level(10), rel=1e-12)
        a = monte_carlo_ber(rx, 10.0, np.random.default_rng(3))
        b = monte_carlo_ber(tx, 10.0 + offset, np.random.default_rng(3))
        assert (a.bits_sent, a.bit_errors) == (b.bits_sent, b.bit_errors)

    @pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable")
    def test_backends_agree(self):
        for scheme in ("dsm_pa", "coherent_sm_pa"):
            sc = fast(scheme=scheme, modulation_order=4)
            a = monte_carlo_ber(sc, 12.0, np.random.default_rng(7), backend="numba")
            b = monte_carlo_ber(sc, 12.0, np.random.default_rng(7), backend="numpy")
            assert (a.bits_sent, a.bit_errors) == (b.bits_sent, b.bit_errors)


class TestSweeps:
    def test_single_point_sweep(self):
        sc = fast(snr_min_db=6, snr_max_db=6, name="one")
        curve = run_ber_sweep(sc)
        p = monte_carlo_ber(sc, 6.0, np.random.default_rng(point_seed(sc.seed, "one", 0)))
        assert len(curve.points) == 1
        assert (curve.points[0].bits_sent, curve.points[0].bit_errors) == (p.bits_sent, p.bit_errors)

    def test_point_seeds_are_distinct(self):
        seeds = {point_seed(0, n, k).generate_state(2).tobytes()
                 for n in ("a", "b") for k in range(3)}
        assert len(seeds) == 6

    def test_theory_sweep_decreasing(self):
        sc = fast(snr_min_db=0, snr_max_db=30, snr_step_db=5, num_past_states=40)
        b = run_theory_sweep(sc).bound()
        assert np.all(np.diff(b) < 0)
        with pytest.raises(DomainError):
            run_theory_sweep(fast(scheme="coherent_sm_pa"))

    def test_coherent_sweep_skips_bound(self):
        sc = fast(scheme="coherent_sm_pa", theory=True, snr_min_db=6, snr_max_db=6)
        assert run_ber_sweep(sc).points[0].ber_bound is None

    def test_snr_at_ber(self):
        curve = BerCurve(fast(), [BerPoint(10, 100, 10), BerPoint(20, 1000, 1)])
        assert curve.snr_at_ber(1e-2) == pytest.approx(15.0)
        with pytest.raises(DomainError):
            curve.snr_at_ber(1e-6)

    def test_point_statistics(self):
        p = BerPoint(0.0, 10_000, 100)
        assert p.ber_sim == 0.01
        assert p.rel_std_error == pytest.approx(math.sqrt(0.99 / 100))
        lo, hi = p.confidence_interval()
        assert lo < 0.01 < hi
        assert BerPoint(0.0).ber_sim is None and BerPoint(0.0, 10, 0).rel_std_error is None

    def test_batch_means_error(self, rng):
        bits = np.array([800, 800, 800, 480])
        errs = np.array([3, 40, 0, 7])
        p = BerPoint(10.0)
        for b, e in zip(bits, errs):
            p.add_batch(int(b), int(e))
        ber = errs.sum() / bits.sum()
        resid = errs - ber * bits
        want = np.sqrt(np.sum(resid ** 2) * 4 / 3) / bits.sum()
        assert (p.bits_sent, p.bit_errors) == (bits.sum(), errs.sum())
        assert p.batch_std_error == pytest.approx(want, rel=1e-12)
        assert p.rel_batch_error == pytest.approx(want / ber)
        assert BerPoint(0.0, 100, 1).batch_std_error is None

    def test_bursty_errors_widen_batch_error(self):
        # one channel per 50 blocks: batch-means error exceeds the binomial one
        p = monte_carlo_ber(fast(max_bits=4_000_000, min_bit_errors=10**6), 14.0,
                            np.random.default_rng(0))
        assert p.rel_batch_error > 1.5 * p.rel_std_error


class TestCli:
    ARGS = ["--snr-min", "4", "--snr-max", "8", "--snr-step", "4", "--trials-max-bits", "40000",
            "--min-errors", "20", "--min-frames", "20"]

    def run(self, tmp_path, *extra, name="out"):
        out = tmp_path / name
        assert main([*self.ARGS, "--out", str(out), *extra]) == 0
        return out.read_bytes()

    def test_csv_format(self, tmp_path):
        data = self.run(tmp_path, "--scenario", "fig4", "--seed", "42")
        assert b"\r" not in data
        lines = data.decode().splitlines()
        assert lines[0] == CSV_HEADER
        rows = [l.split(",") for l in lines[1:]]
        assert len(rows) == 6
        keys = [(r[1], float(r[3])) for r in rows]
        assert keys == sorted(keys)
        assert all(r[7] == "" and r[8] == "42" for r in rows)
        assert {r[2] for r in rows} == {"BPSK"}
        for r in rows:
            assert float(r[6]) == pytest.approx(int(r[5]) / int(r[4]), rel=1e-5)

    def test_theory_column(self, tmp_path):
        data = self.run(tmp_path, "--scenario", "custom", "--theory", "--past-samples", "20")
        rows = [l.split(",") for l in data.decode().splitlines()[1:]]
        assert all(float(r[7]) > 0 for r in rows)

    def test_determinism(self, tmp_path):
        a = self.run(tmp_path, "--scenario", "fig5", "--seed", "9", name="a.csv")
        b = self.run(tmp_path, "--scenario", "fig5", "--seed", "9", name="b.csv")
        c = self.run(tmp_path, "--scenario", "fig5", "--seed", "10", name="c.csv")
        assert a == b and a != c

    def test_json(self, tmp_path):
        data = json.loads(self.run(tmp_path, "--scenario", "fig5", "--format", "json"))
        assert isinstance(data, list) and len(data) == 3
        assert {c["scenario"] for c in data} == {"fig5/close", "fig5/equal", "fig5/nonuniform"}
        pt = data[0]["points"][0]
        assert {"ebn0_db", "bits_sent", "bit_errors", "ber_sim", "ber_bound", "rel_std_error"} <= set(pt)

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("name: mine\nscheme: coherent_sm_pa\n")
        data = self.run(tmp_path, "--scenario", "custom", "--config", str(cfg))
        assert data.decode().splitlines()[1].startswith("mine,coherent_sm_pa,BPSK,4,")

    def test_missing_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code != 0
        assert "usage" in capsys.readouterr().err

    def test_unknown_scenario(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--scenario", "fig9"])
        assert exc.value.code != 0

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("colour: red\n")
        assert main(["--scenario", "custom", "--config", str(cfg)]) != 0
        assert "colour" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, capsys):
        assert main(["--scenario", "custom", "--out", str(tmp_path / "no" / "x.csv")]) != 0
        assert "error" in capsys.readouterr().err

    def test_csv_of_empty_bound(self):
        sc = fast(name="z")
        text = curves_to_csv([BerCurve(sc, [BerPoint(2.5, 80, 1)])])
        assert text == CSV_HEADER + "\nz,dsm_pa,BPSK,2.5,80,1,0.0125,,0\n"
