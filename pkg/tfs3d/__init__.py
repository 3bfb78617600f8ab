"""Training-free few-shot 3D point-cloud segmentation (TFS3D / TFS3D-T)."""

__version__ = "0.1.0"
