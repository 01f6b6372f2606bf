"""Natural-language robustness specifications grounded into verification queries."""

from .core import (
    DenseLayer,
    FeatureRange,
    GroundedSpec,
    Grounding,
    InputSample,
    Network,
    PixelBox,
    SemanticSpec,
    TimeInterval,
    Verdict,
    forward,
    load_network,
    predict,
    save_network,
)
from .detection import DetectorConfig, Detection, detect, ground_image, prune_containing
from .parser import Parser, ParserConfig, ParseResult, parse_llm, parse_rules
from .specgen import OpParams, emit_vnnlib, generate
from .tabular import DatasetSchema, ground_tabular, load_schema
from .verifier import BoundsBox, VerifierConfig, find_counterexample, ibp_forward, verify

__version__ = "0.1.0"

__all__ = [
    "DenseLayer", "FeatureRange", "GroundedSpec", "Grounding", "InputSample",
    "Network", "PixelBox", "SemanticSpec", "TimeInterval", "Verdict",
    "forward", "load_network", "predict", "save_network",
    "DetectorConfig", "Detection", "detect", "ground_image", "prune_containing",
    "Parser", "ParserConfig", "ParseResult", "parse_llm", "parse_rules",
    "OpParams", "emit_vnnlib", "generate",
    "DatasetSchema", "ground_tabular", "load_schema",
    "BoundsBox", "VerifierConfig", "find_counterexample", "ibp_forward", "verify",
    "__version__",
]
