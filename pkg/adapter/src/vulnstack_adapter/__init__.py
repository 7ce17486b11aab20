"""Transformer bridge for the stacking pipeline.

Converts the upstream HDF5 corpus to the canonical JSONL format,
fine-tunes pre-trained code transformers for five-class classification,
and exports their softmax outputs in the probability wire format the
pipeline consumes.  Coupled to the pipeline only through those files.
"""

__version__ = "0.1.0"

from .convert import CLASS_FLAGS, ConversionReport, convert_corpus
from .corpus_io import NUM_CLASSES, CodeRow, read_corpus
from .errors import AdapterError
from .export import export_probs
from .finetune import KNOWN_CHECKPOINTS, FinetuneSpec, finetune

__all__ = [
    "AdapterError",
    "CLASS_FLAGS",
    "CodeRow",
    "ConversionReport",
    "FinetuneSpec",
    "KNOWN_CHECKPOINTS",
    "NUM_CLASSES",
    "convert_corpus",
    "export_probs",
    "finetune",
    "read_corpus",
    "__version__",
]
