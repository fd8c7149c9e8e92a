"""Reference backend for the caption-evaluation wire protocol.

Serves the four capabilities the engine expects (question generation,
textual QA, visual QA, similarity) plus span extraction. Visual QA is an
abstractive model: projected detector features and question tokens share one
encoder, and answers are generated free-form rather than classified.
"""

from .errors import AdapterError, BackendUnavailable, FeatureShapeError, UnknownImage
from .features import (
    FEATURE_DIM,
    NUM_BOXES,
    FeatureStore,
    VisualFeatures,
    random_features,
    read_vfea,
    write_vfea,
)
from .model import AbstractiveVqa, ModelConfig
from .server import AdapterService, WireServer
from .tokenizer import Tokenizer

__version__ = "0.1.0"

__all__ = [
    "AbstractiveVqa",
    "AdapterError",
    "AdapterService",
    "BackendUnavailable",
    "FEATURE_DIM",
    "FeatureShapeError",
    "FeatureStore",
    "ModelConfig",
    "NUM_BOXES",
    "Tokenizer",
    "UnknownImage",
    "VisualFeatures",
    "WireServer",
    "random_features",
    "read_vfea",
    "write_vfea",
]
