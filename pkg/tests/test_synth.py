import numpy as np
import pytest

from handcam import synth
from handcam.core import LabelSpace, Task


def config(**overrides):
    base = dict(
        seed=0,
        num_states=3,
        dim=4,
        n_frames=200,
        min_dwell=20,
        centers=synth.orthonormal_centers(3, 4, 99),
        noise_sigma=0.5,
    )
    base.update(overrides)
    return synth.SynthConfig(**base)


class TestFeatureStreamGen:
    def test_noiseless_frames_equal_centers(self):
        cfg = config(noise_sigma=0.0)
        stream, truth = synth.gen_feature_stream(cfg)
        assert np.array_equal(stream.values, cfg.centers[truth.states])

    def test_same_seed_identical(self):
        a_s, a_t = synth.gen_feature_stream(config())
        b_s, b_t = synth.gen_feature_stream(config())
        assert np.array_equal(a_s.values, b_s.values)
        assert np.array_equal(a_t.states, b_t.states)

    def test_different_seed_differs(self):
        a_s, _ = synth.gen_feature_stream(config(seed=1))
        b_s, _ = synth.gen_feature_stream(config(seed=2))
        assert not np.array_equal(a_s.values, b_s.values)

    def test_min_dwell_respected(self):
        for seed in range(10):
            _, truth = synth.gen_feature_stream(config(seed=seed, min_dwell=20, n_frames=200))
            s = truth.states
            runs = np.diff(np.concatenate([[0], np.nonzero(np.diff(s))[0] + 1, [len(s)]]))
            assert runs.min() >= 20

    def test_consecutive_states_differ(self):
        _, truth = synth.gen_feature_stream(config(seed=3))
        s = truth.states
        changes = np.nonzero(np.diff(s))[0]
        assert len(changes) > 0
        for c in changes:
            assert s[c] != s[c + 1]

    def test_ramp_blends_centers(self):
        cfg = config(noise_sigma=0.0, transition_ramp=4)
        stream, truth = synth.gen_feature_stream(cfg)
        t = int(np.nonzero(np.diff(truth.states))[0][0] + 1)
        old_c = cfg.centers[truth.states[t - 1]]
        new_c = cfg.centers[truth.states[t]]
        # halfway through the ramp the feature is the midpoint blend
        mid = stream.values[t]
        assert np.allclose(mid, 0.5 * old_c + 0.5 * new_c)
        # outside the ramp the feature sits exactly on the center
        assert np.array_equal(stream.values[t - 5], old_c)

    def test_label_space_attachment(self):
        space = LabelSpace(
            Task.GESTURE, ("free",) + tuple(f"g{i}" for i in range(12)), 0
        )
        _, truth = synth.gen_feature_stream(config(), label_space=space)
        assert truth.label_space == space

    def test_invalid_configs(self):
        with pytest.raises(ValueError):
            config(min_dwell=0)
        with pytest.raises(ValueError):
            config(noise_sigma=-1.0)
        with pytest.raises(ValueError):
            config(centers=np.zeros((3, 4)))  # identical rows


class TestVideoGen:
    def test_identity_composite(self):
        hand = synth.smooth_patch(10, 10, seed=1)
        videos, truth = synth.gen_video_set(
            hand, [synth.VideoSpec("v", 1.0, 5, 7)], (40, 30),
            n_frames=3, noise_sigma=0.0, jitter=0, seed=2,
        )
        frames = videos["v"]
        assert len(frames) == 3
        for f in frames[1:]:
            assert np.array_equal(f.pixels, frames[0].pixels)
        assert np.array_equal(frames[0].pixels[7:17, 5:15], hand.pixels)
        assert truth["v"] == {"scale": 1.0, "dx": 5, "dy": 7}

    def test_same_seed_identical_pixels(self):
        hand = synth.textured_patch(8, 8, seed=3)
        spec = [synth.VideoSpec("v", 1.1, 6, 6)]
        a, _ = synth.gen_video_set(hand, spec, (40, 30), 4, 30.0, 1, seed=5)
        b, _ = synth.gen_video_set(hand, spec, (40, 30), 4, 30.0, 1, seed=5)
        for fa, fb in zip(a["v"], b["v"]):
            assert np.array_equal(fa.pixels, fb.pixels)

    def test_hand_out_of_frame(self):
        hand = synth.textured_patch(20, 20, seed=0)
        with pytest.raises(ValueError, match="out of frame"):
            synth.gen_video_set(hand, [synth.VideoSpec("v", 1.0, 35, 5)], (40, 30),
                                2, 0.0, 0, seed=0)

    def test_written_to_disk(self, tmp_path):
        hand = synth.smooth_patch(8, 8, seed=4)
        synth.gen_video_set(hand, [synth.VideoSpec("v", 1.0, 3, 3)], (30, 20),
                            2, 0.0, 0, seed=1, out_dir=tmp_path)
        assert (tmp_path / "v" / "frame_000000.ppm").exists()
        assert (tmp_path / "v" / "frame_000001.ppm").exists()


class TestCenters:
    def test_orthonormal(self):
        c = synth.orthonormal_centers(3, 6, 0)
        assert np.allclose(c @ c.T, np.eye(3), atol=1e-12)

    def test_random_unit_norm(self):
        c = synth.random_centers(4, 5, 1)
        assert np.allclose(np.linalg.norm(c, axis=1), 1.0)

    def test_deterministic(self):
        assert np.array_equal(synth.orthonormal_centers(2, 4, 7),
                              synth.orthonormal_centers(2, 4, 7))
