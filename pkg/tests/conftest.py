import numpy as np
import pytest

from tfs3d.models.point_cloud import PointCloud
from tfs3d.schemas.encoder import EncoderConfig

from tests.helpers import random_cloud


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg() -> EncoderConfig:
    """Cheap encoder: d=2 gives 180 channels, k=4 needs 32 points."""
    return EncoderConfig(d=2, k=4)


@pytest.fixture
def labeled_cloud(rng) -> PointCloud:
    return random_cloud(rng, 64, rng.integers(0, 3, size=64))


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """Small synthetic dataset on disk: 24 blocks of 300 points, 4 unseen classes."""
    from tfs3d.data.synthetic import default_dataset_spec
    from tfs3d.schemas.synth import SynthDatasetSpec
    from tfs3d.services.synth import synth_dataset

    spec = SynthDatasetSpec.model_validate(
        {**default_dataset_spec(blocks=24, seed=3).model_dump(), "points_per_block": 300}
    )
    out = tmp_path_factory.mktemp("synth")
    synth_dataset(spec, out)
    return out


@pytest.fixture
def manifest(synth_dir):
    from tfs3d.schemas.manifest import SplitManifest
    from tfs3d.services.synth import MANIFEST_NAME

    return SplitManifest.load(synth_dir / MANIFEST_NAME)
