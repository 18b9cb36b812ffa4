import numpy as np
import pytest

from miscue.streams import BLENDSHAPE_DIM, KEYPOINT_DIM, FeatureStream


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    criterion = getattr(item.function, "_criterion", None)
    if criterion and report.when == "call":
        status = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE [{status}] {criterion}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_stream(
    n_frames: int,
    *,
    source_id: str = "test",
    fps: float = 60.0,
    blendshapes: bool = True,
    keypoints: bool = False,
    embedding_dim: int | None = None,
    seed: int = 0,
) -> FeatureStream:
    gen = np.random.default_rng(seed)
    channels = {}
    if blendshapes:
        channels["blendshapes"] = gen.uniform(0.0, 1.0, size=(n_frames, BLENDSHAPE_DIM))
    if keypoints:
        channels["keypoints"] = gen.uniform(0.0, 1.0, size=(n_frames, KEYPOINT_DIM))
    if embedding_dim:
        channels["embedding"] = gen.normal(size=(n_frames, embedding_dim))
    return FeatureStream(source_id=source_id, fps=fps, channels=channels)


def blendshape_stream_from_matrix(values, fps: float = 60.0, source_id: str = "sig"):
    values = np.asarray(values, dtype=np.float64)
    return FeatureStream(source_id=source_id, fps=fps, channels={"blendshapes": values})
