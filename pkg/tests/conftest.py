import numpy as np
import pytest
import torch
from hypothesis import HealthCheck, settings

from cookgen.cis import EmbeddingNet, EmbeddingNetConfig
from cookgen.sessions import CookingSession, Frame, SyntheticRecipeSpec, synth_session

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    max_examples=50,
)
settings.load_profile("suite")


def make_session(ts, session_id="s", recipe_id="r", annotations=None, img_size=2):
    """Hand-built session with flat dummy frames at the given timestamps."""
    frames = [
        Frame(image=np.full((img_size, img_size, 3), -1.0, dtype=np.float32), t_seconds=float(t))
        for t in ts
    ]
    return CookingSession(
        session_id=session_id,
        recipe_id=recipe_id,
        frames=frames,
        duration_T=float(ts[-1]) if len(ts) else 0.0,
        annotations={"raw": 0} if annotations is None else annotations,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def disc_spec():
    return SyntheticRecipeSpec(name="pancake", shape_kind="disc", seed=7)


@pytest.fixture
def rect_spec():
    return SyntheticRecipeSpec(
        name="toast",
        shape_kind="rectangle",
        raw_color=(0.95, 0.85, 0.65),
        extended_color=(0.30, 0.16, 0.05),
        browning_rate=6.0,
        size_factor=0.8,
        seed=11,
    )


@pytest.fixture
def blob_spec():
    return SyntheticRecipeSpec(
        name="cookies",
        shape_kind="blob-cluster",
        raw_color=(0.85, 0.75, 0.55),
        extended_color=(0.40, 0.22, 0.10),
        browning_rate=10.0,
        browning_midpoint=0.6,
        size_factor=1.4,
        seed=23,
    )


@pytest.fixture
def tiny_session(disc_spec):
    return synth_session(disc_spec, n_frames=8, interval_s=30.0, img_size=32)


@pytest.fixture(scope="session")
def tiny_cis():
    """Small untrained embedding net for plumbing tests (32 px inputs)."""
    torch.manual_seed(0)
    net = EmbeddingNet(EmbeddingNetConfig(embed_dim=64, proj_dims=(64, 32), img_size=32))
    net.eval()
    return net
