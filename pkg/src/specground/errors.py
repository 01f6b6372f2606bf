"""Typed error taxonomy, one branch per pipeline stage.

Every error raised by a pipeline stage derives from SpecGroundError and
carries a ``stage`` tag so the CLI can attribute failures without string
matching.
"""


class SpecGroundError(Exception):
    stage = "general"


# ---- parsing --------------------------------------------------------------

class ParseError(SpecGroundError):
    stage = "parse"


class NoActionFound(ParseError):
    pass


class NoObjectFound(ParseError):
    pass


class ConflictingActions(ParseError):
    pass


class MalformedResponse(ParseError):
    pass


class UnsupportedAction(ParseError):
    pass


class FixtureMiss(ParseError):
    pass


# ---- grounding ------------------------------------------------------------

class GroundingError(SpecGroundError):
    stage = "ground"


class UnknownAttribute(GroundingError):
    pass


class AmbiguousAttribute(GroundingError):
    pass


class NoDetections(GroundingError):
    pass


class RegionOutOfBounds(GroundingError):
    pass


# ---- transport (shared by the LLM and detector clients) --------------------

class TransportError(SpecGroundError):
    stage = "transport"


# ---- specification generation ----------------------------------------------

class SpecGenError(SpecGroundError):
    stage = "genspec"


class UnsupportedOperation(SpecGenError):
    pass


class RegionKindMismatch(SpecGenError):
    pass


# ---- verification -----------------------------------------------------------

class VerifierError(SpecGroundError):
    stage = "verify"


class DimensionMismatch(VerifierError):
    pass
