"""Regenerate the committed test fixtures.

    python tests/fixtures/make_fixtures.py
"""

from pathlib import Path

from foregan.data import SceneParams, augment, synth_generate
from foregan.gan import GanArch, TrainConfig, train

HERE = Path(__file__).parent

TINY_ARCH = GanArch(image_size=16, channels=3, latent_dim=8, base_width=16, n_layers=3, feature_layer=2)
TINY_CONFIG = TrainConfig(epochs=100, batch_size=16, latent_dim=8, seed=7)


def tiny_scene() -> SceneParams:
    return SceneParams(size=16, n_frames=40, object_size=(4, 4), enter_frame=10, start=(4.0, 2.0),
                       velocity=(0.5, 1.0), name="tiny")


def make_tiny_gan():
    seq = synth_generate(3, tiny_scene())
    ckpt = train(augment(seq.frames), TINY_CONFIG, TINY_ARCH, modality="rgb", scene="tiny")
    ckpt.save(HERE / "tiny_gan.npz")
    return ckpt


if __name__ == "__main__":
    make_tiny_gan()
