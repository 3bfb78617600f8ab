from tfs3d.schemas.encoder import EncoderConfig, PEMode
from tfs3d.schemas.head import HeadConfig
from tfs3d.schemas.manifest import SplitManifest
from tfs3d.schemas.quest import CombineMode, QuestConfig
from tfs3d.schemas.run import EpisodeSettings, PathSettings, RunConfig, load_run_config
from tfs3d.schemas.synth import ClusterDescriptor, SynthClass, SynthDatasetSpec

__all__ = [
    "ClusterDescriptor",
    "CombineMode",
    "EncoderConfig",
    "EpisodeSettings",
    "HeadConfig",
    "PEMode",
    "PathSettings",
    "QuestConfig",
    "RunConfig",
    "SplitManifest",
    "SynthClass",
    "SynthDatasetSpec",
    "load_run_config",
]
