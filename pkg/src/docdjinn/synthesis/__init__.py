from .backends import (
    BackendError,
    BackendResponse,
    GenerationBackend,
    GenerationResult,
    RetryPolicy,
    TransientBackendError,
    generate,
)
from .parsing import (
    Drop,
    extract_handwriting_regions,
    extract_macro_gt,
    extract_micro_annotations,
    extract_placeholders,
    parse_response,
    split_response,
)
from .prompts import PromptSpec, instantiate_prompt
from .stub import StubBackend

__all__ = [
    "BackendError", "BackendResponse", "GenerationBackend", "GenerationResult", "RetryPolicy",
    "TransientBackendError", "generate", "Drop", "extract_handwriting_regions", "extract_macro_gt",
    "extract_micro_annotations", "extract_placeholders", "parse_response", "split_response",
    "PromptSpec", "instantiate_prompt", "StubBackend",
]
