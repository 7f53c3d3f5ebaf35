"""Export per-token contextual vectors and blank-slot context vectors from
pretrained transformer encoders into bundle JSONL files."""

from .extract import (
    AlignmentError,
    CapabilityError,
    Encoder,
    ExtractError,
    ExtractionSpec,
    extract,
    extract_context_vectors,
    load_instances,
)

__version__ = "0.1.0"
