"""Grounded specification construction and query text emission.

Starts from the degenerate box at the reference input and widens only the
coordinates inside the grounded regions, per operation. Operations whose
exact constraint family is not box-shaped (contrast, amplification) get a
coordinate-wise interval envelope: a sound over-approximation, so SAFE
verdicts remain sound and UNSAFE counterexamples are re-checked exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    FeatureRange,
    GroundedSpec,
    Grounding,
    InputSample,
    Network,
    PixelBox,
    TimeInterval,
    region_coordinate_indices,
    region_to_dict,
)
from .errors import DimensionMismatch, RegionKindMismatch, UnsupportedOperation

# no sound box encoding exists for these; the parser accepts them, we refuse here
GEOMETRIC_ACTIONS = frozenset({"rotate", "scale_up", "scale_down"})


@dataclass(frozen=True)
class OpParams:
    epsilon: float = 0.05        # additive noise half-width
    beta: float = 0.1            # brightness shift
    contrast_up: float = 1.5     # kappa >= 1
    contrast_down: float = 0.5   # kappa in (0, 1]
    gain: float = 2.0            # amplification factor >= 1
    mask_value: float = 0.0      # constant for removal masking
    remove_free: bool = False    # removal as free pixels instead of a constant

    def __post_init__(self):
        if self.epsilon < 0 or self.beta < 0:
            raise ValueError("epsilon and beta must be non-negative")
        if self.contrast_up < 1.0 or not (0.0 < self.contrast_down <= 1.0):
            raise ValueError("contrast factors must satisfy up >= 1, 0 < down <= 1")
        if self.gain < 1.0:
            raise ValueError("gain must be >= 1")
        if not (0.0 <= self.mask_value <= 1.0):
            raise ValueError("mask value must be in [0, 1]")


_REGION_FOR_OP = {
    "remove": PixelBox, "add_noise": PixelBox,
    "increase_brightness": PixelBox, "decrease_brightness": PixelBox,
    "increase_contrast": PixelBox, "decrease_contrast": PixelBox,
    "increase": FeatureRange, "decrease": FeatureRange, "change": FeatureRange,
    "amplify": TimeInterval,
}


def generate(x: InputSample, g: Grounding, op: str, params: OpParams,
             target_class: int, provenance_spec=None) -> GroundedSpec:
    """Build the box constraints + argmax-invariance constraint for one query."""
    if op in GEOMETRIC_ACTIONS:
        raise UnsupportedOperation(
            f"{op!r} has no sound box encoding and is not supported by the generator"
        )
    expected_region = _REGION_FOR_OP.get(op)
    if expected_region is None:
        raise UnsupportedOperation(f"unknown operation {op!r}")
    for region in g.regions:
        if not isinstance(region, expected_region):
            raise RegionKindMismatch(
                f"operation {op!r} needs {expected_region.__name__} regions, "
                f"got {type(region).__name__}"
            )
    try:
        g.validate_against(x)
    except ValueError as exc:
        raise RegionKindMismatch(str(exc)) from exc

    v = np.asarray(x.values, dtype=np.float64)
    lower = v.copy()
    upper = v.copy()
    touched = np.zeros(v.size, dtype=bool)

    for region in g.regions:
        idx = region_coordinate_indices(region, x)
        rv = v[idx]
        if op == "remove":
            if params.remove_free:
                lo, hi = np.zeros_like(rv), np.ones_like(rv)
            else:
                # masking replaces the reference value instead of surrounding it
                lo = hi = np.full_like(rv, params.mask_value)
        elif op == "add_noise":
            lo, hi = rv - params.epsilon, rv + params.epsilon
        elif op == "increase_brightness":
            lo, hi = rv, rv + params.beta
        elif op == "decrease_brightness":
            lo, hi = rv - params.beta, rv
        elif op in ("increase_contrast", "decrease_contrast"):
            kappa = params.contrast_up if op == "increase_contrast" else params.contrast_down
            mu = rv.mean()
            a = mu + (rv - mu)
            b = mu + kappa * (rv - mu)
            lo, hi = np.minimum(a, b), np.maximum(a, b)
        elif op == "amplify":
            a, b = rv, params.gain * rv
            lo, hi = np.minimum(a, b), np.maximum(a, b)
        else:  # tabular feature ranges carry their interval directly
            lo = np.full_like(rv, region.lower)
            hi = np.full_like(rv, region.upper)
        lo, hi = np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0)
        # a region's interval replaces the degenerate reference bounds;
        # coordinates shared by several regions take the interval union
        fresh = ~touched[idx]
        lower[idx] = np.where(fresh, lo, np.minimum(lower[idx], lo))
        upper[idx] = np.where(fresh, hi, np.maximum(upper[idx], hi))
        touched[idx] = True

    provenance = {
        "semantic_spec": provenance_spec.to_dict() if provenance_spec is not None else None,
        "grounding": g.to_dict(),
        "operation": op,
    }
    return GroundedSpec(lower, upper, x, target_class, provenance)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def emit_vnnlib(spec: GroundedSpec, net: Network) -> str:
    """Deterministic query text: box bounds plus the negated output property.

    The output assert encodes the negation of argmax invariance as a
    disjunction over the competitor classes, so UNSAT means SAFE.
    """
    n, m = net.input_dim, net.output_dim
    if spec.dim != n:
        raise DimensionMismatch(f"spec has {spec.dim} coordinates, network wants {n}")
    c = spec.target_class
    if c >= m:
        raise DimensionMismatch(f"target class {c} outside {m} outputs")

    lines = []
    for i in range(n):
        lines.append(f"(declare-const X_{i} Real)")
    for j in range(m):
        lines.append(f"(declare-const Y_{j} Real)")
    lines.append("")
    for i in range(n):
        lines.append(f"(assert (>= X_{i} {_fmt(spec.input_lower[i])}))")
        lines.append(f"(assert (<= X_{i} {_fmt(spec.input_upper[i])}))")
    lines.append("")
    disjuncts = " ".join(f"(>= Y_{j} Y_{c})" for j in range(m) if j != c)
    lines.append(f"(assert (or {disjuncts}))")
    return "\n".join(lines) + "\n"
