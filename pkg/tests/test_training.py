import csv

import numpy as np
import pytest

from fmresynth import autodiff as ad
from fmresynth import dataset as ds
from fmresynth import fmsynth as fm
from fmresynth import reverb as rv
from fmresynth import training as tr

from conftest import packaged_config, piecewise_envelopes


@pytest.fixture
def tiny_run(tmp_path, two_osc_config):
    ds.synth_corpus(two_osc_config, 1, seed=0, out_dir=tmp_path / "corpus",
                    split_fractions=(1.0, 0.0, 0.0))
    return tr.RunConfig(corpus_dir=str(tmp_path / "corpus"),
                        patch_path=packaged_config("strings1_2"),
                        steps=6, batch=1, checkpoint_every=3, seed=0)


class TestSchedule:
    def test_lr_staircase_exact(self):
        assert tr.lr_at(0) == 3e-4
        assert tr.lr_at(9999) == 3e-4
        assert tr.lr_at(10000) == 3e-4 * 0.98
        assert tr.lr_at(120000) == 3e-4 * 0.98 ** 12

    def test_negative_step_rejected(self):
        with pytest.raises(ValueError):
            tr.lr_at(-1)


class TestClipping:
    def test_rescales_large_gradients(self):
        g = {"a": np.full(25, 2.0)}  # norm 10
        clipped = tr.clip_gradients(g, max_norm=2.0)
        norm = np.sqrt(sum(np.sum(v * v) for v in clipped.values()))
        assert abs(norm - 2.0) < 1e-12

    def test_leaves_small_gradients_alone(self):
        g = {"a": np.array([0.1, 0.2])}
        assert tr.clip_gradients(g, 2.0) is g

    def test_global_norm_spans_all_entries(self):
        g = {"a": np.full(16, 1.0), "b": np.full(9, 1.0)}  # norm 5
        clipped = tr.clip_gradients(g, 2.0)
        assert np.allclose(clipped["a"], 0.4)
        assert np.allclose(clipped["b"], 0.4)

    def test_non_finite_rejected(self):
        with pytest.raises(FloatingPointError):
            tr.clip_gradients({"a": np.array([np.inf])}, 2.0)


class TestAdam:
    def test_first_step_moves_by_lr(self):
        # with bias correction, |step 1| == lr for any gradient scale
        p = ad.parameter(np.array([1.0, -2.0]))
        g = np.array([0.3, -7.0])
        tr.adam_step({"p": p}, {"p": g}, tr.AdamState(), lr=0.1)
        assert np.allclose(p.values, [1.0 - 0.1, -2.0 + 0.1], atol=1e-6)

    def test_matches_reference_trajectory(self):
        # hand-rolled Adam on f(x) = x^2 for a few steps
        p = ad.parameter(np.array([2.0]))
        state = tr.AdamState()
        m = v = 0.0
        x = 2.0
        for t in range(1, 5):
            g = 2.0 * p.values.copy()
            tr.adam_step({"p": p}, {"p": g}, state, lr=0.05)
            gm = 2.0 * x
            m = 0.9 * m + 0.1 * gm
            v = 0.999 * v + 0.001 * gm * gm
            x -= 0.05 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
            assert p.values[0] == pytest.approx(x, abs=1e-12)


class TestCheckpoints:
    def _model(self, run):
        config = fm.load_config(run.patch_path)
        return tr.build_model(run, config)

    def test_roundtrip_byte_identical(self, tmp_path, tiny_run):
        spec, params, reverb_params = self._model(tiny_run)
        adam = tr.AdamState()
        adam.m = {k: np.zeros_like(p.values) for k, p in params.items()}
        adam.v = {k: np.zeros_like(p.values) for k, p in params.items()}
        p1 = tmp_path / "a.ckpt"
        tr.save_checkpoint(p1, tiny_run, 42, params, reverb_params, adam)
        step, blobs = tr.load_checkpoint(p1, tiny_run)
        assert step == 42
        spec2, params2, reverb2 = self._model(tiny_run)
        adam2 = tr.AdamState()
        tr._restore_state(blobs, params2, reverb2, adam2)
        p2 = tmp_path / "b.ckpt"
        tr.save_checkpoint(p2, tiny_run, 42, params2, reverb2, adam2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_magic_checked(self, tmp_path, tiny_run):
        bad = tmp_path / "x.ckpt"
        bad.write_bytes(b"JUNKJUNKJUNK")
        with pytest.raises(ValueError, match="not a checkpoint"):
            tr.load_checkpoint(bad)

    def test_runconfig_digest_checked(self, tmp_path, tiny_run):
        spec, params, reverb_params = self._model(tiny_run)
        path = tmp_path / "a.ckpt"
        tr.save_checkpoint(path, tiny_run, 1, params, reverb_params,
                           tr.AdamState())
        from dataclasses import replace
        other = replace(tiny_run, seed=99)
        with pytest.raises(ValueError, match="different RunConfig"):
            tr.load_checkpoint(path, other)

    def test_runconfig_json_roundtrip(self, tiny_run):
        back = tr.RunConfig.from_json(tiny_run.to_json())
        assert back == tiny_run
        assert back.digest() == tiny_run.digest()


class TestTrainLoop:
    def test_short_run_logs_and_checkpoints(self, tmp_path, tiny_run):
        out = tmp_path / "run"
        final = tr.train(tiny_run, out)
        assert final.name == "checkpoint_00000006.ckpt"
        assert (out / "checkpoint_00000003.ckpt").exists()
        rows = list(csv.DictReader(open(out / "loss_log.csv")))
        assert len(rows) == 6
        assert [r["step"] for r in rows] == [str(i) for i in range(6)]
        losses = [float(r["train_loss"]) for r in rows]
        assert all(np.isfinite(losses))
        assert float(rows[0]["lr"]) == 3e-4

    def test_rerun_is_deterministic(self, tmp_path, tiny_run):
        tr.train(tiny_run, tmp_path / "r1")
        tr.train(tiny_run, tmp_path / "r2")
        assert ((tmp_path / "r1" / "loss_log.csv").read_text()
                == (tmp_path / "r2" / "loss_log.csv").read_text())
        assert ((tmp_path / "r1" / "checkpoint_00000006.ckpt").read_bytes()
                == (tmp_path / "r2" / "checkpoint_00000006.ckpt").read_bytes())

    def test_resume_reproduces_straight_run(self, tmp_path, tiny_run):
        out = tmp_path / "straight"
        tr.train(tiny_run, out)
        resumed = tmp_path / "resumed"
        tr.train(tiny_run, resumed,
                 resume_from=out / "checkpoint_00000003.ckpt")
        straight = {r["step"]: r for r in
                    csv.DictReader(open(out / "loss_log.csv"))}
        again = {r["step"]: r for r in
                 csv.DictReader(open(resumed / "loss_log.csv"))}
        assert set(again) == {"3", "4", "5"}
        for step, row in again.items():
            assert row["train_loss"] == straight[step]["train_loss"]
        assert ((out / "checkpoint_00000006.ckpt").read_bytes()
                == (resumed / "checkpoint_00000006.ckpt").read_bytes())

    def test_empty_train_split_rejected(self, tmp_path, two_osc_config):
        ds.synth_corpus(two_osc_config, 1, seed=0, out_dir=tmp_path / "c",
                        split_fractions=(0.0, 0.0, 1.0))
        run = tr.RunConfig(corpus_dir=str(tmp_path / "c"),
                           patch_path=packaged_config("strings1_2"),
                           steps=1, batch=1)
        with pytest.raises(ValueError, match="train split"):
            tr.train(run, tmp_path / "out")


class TestMatchEnvelopes:
    def test_loss_decreases_on_short_fit(self, two_osc_config):
        t_frames = 125
        env_true = piecewise_envelopes(two_osc_config, t_frames, seed=1)
        f0 = np.full(t_frames, 300.0)
        spec = fm.RenderSpec(f0_frames=f0)
        target = fm.render(two_osc_config, env_true, spec, i_max=2.0).values
        env, history = tr.match_envelopes(
            two_osc_config, target, f0, i_max=2.0, steps=300,
            lr=0.05, lr_half_every=60, seed=0)
        assert history[-1] < 0.6 * history[0]
        assert env.shape == (t_frames, 2)
        a_max = two_osc_config.a_max(2.0)
        assert np.all(env >= 0.0) and np.all(env <= a_max[None, :])
