from tfs3d.models.encoded import EncodedCloud, PyramidLevel
from tfs3d.models.episode import Episode, remap_episode_labels, remap_labels
from tfs3d.models.frequency import FrequencyDistribution, FrequencyVector
from tfs3d.models.metrics import MetricAccumulator
from tfs3d.models.neighbors import NeighborTable
from tfs3d.models.point_cloud import FeatureMatrix, PointCloud
from tfs3d.models.prototypes import PrototypeSet

__all__ = [
    "EncodedCloud",
    "Episode",
    "FeatureMatrix",
    "FrequencyDistribution",
    "FrequencyVector",
    "MetricAccumulator",
    "NeighborTable",
    "PointCloud",
    "PrototypeSet",
    "PyramidLevel",
    "remap_episode_labels",
    "remap_labels",
]
