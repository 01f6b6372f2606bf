"""Complete-at-desk-scale decision procedure for box specs on ReLU networks.

Interval bound propagation certifies subboxes, projected-gradient ascent on
the violation margin hunts for counterexamples, and input-splitting
branch-and-bound drives the two to a verdict. Splitting only ever touches
coordinates with non-degenerate intervals, so the effective search dimension
equals the grounded region size.
"""
from __future__ import annotations

import hashlib
import itertools
import threading
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import GroundedSpec, Network, Verdict, VerdictStats, check_counterexample, forward
from .errors import DimensionMismatch, VerifierError


@dataclass(frozen=True)
class BoundsBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        up = np.asarray(self.upper, dtype=np.float64)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if lo.shape != up.shape:
            raise DimensionMismatch("bounds shapes differ")
        if np.any(lo > up):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def width(self) -> int:
        return int(self.lower.size)


@dataclass(frozen=True)
class VerifierConfig:
    max_nodes: int = 100_000
    split_tolerance: float = 1e-6   # minimum interval width worth splitting
    margin_tolerance: float = 1e-9  # certification slack absorbing rounding
    pgd_steps: int = 50
    pgd_restarts: int = 5
    parallel_workers: int = 1

    def __post_init__(self):
        if min(self.max_nodes, self.pgd_steps, self.pgd_restarts,
               self.parallel_workers) <= 0:
            raise ValueError("verifier config values must be positive")
        if self.split_tolerance <= 0 or self.margin_tolerance <= 0:
            raise ValueError("tolerances must be positive")


def ibp_forward(net: Network, box: BoundsBox) -> BoundsBox:
    """Sound interval output bounds via layer-wise interval arithmetic."""
    if box.width != net.input_dim:
        raise DimensionMismatch(f"box width {box.width} != input dim {net.input_dim}")
    lo, up = _ibp_bounds(net, box.lower, box.upper)
    return BoundsBox(lo, up)


def _ibp_bounds(net: Network, lower: np.ndarray, upper: np.ndarray):
    center = (lower + upper) / 2.0
    radius = (upper - lower) / 2.0
    for layer in net.layers:
        center = layer.weights @ center + layer.bias
        radius = np.abs(layer.weights) @ radius
        if layer.activation == "relu":
            lo = np.maximum(center - radius, 0.0)
            up = np.maximum(center + radius, 0.0)
            center = (lo + up) / 2.0
            radius = (up - lo) / 2.0
    return center - radius, center + radius


def violation_margin_bound(out: BoundsBox, c: int) -> float:
    """max over competitors j of (upper_j - lower_c); < 0 certifies the region."""
    if not (0 <= c < out.width):
        raise DimensionMismatch(f"class {c} outside {out.width} outputs")
    competitors = np.delete(out.upper, c)
    return float(competitors.max() - out.lower[c])


# ---- exact margin and its gradient ------------------------------------------

def margin(net: Network, x: np.ndarray, c: int) -> float:
    """max over j != c of (y_j - y_c); > 0 means x flips the argmax away from c."""
    y = forward(net, x)
    others = np.delete(y, c)
    return float(others.max() - y[c])


def margin_gradient(net: Network, x: np.ndarray, c: int) -> tuple[float, np.ndarray]:
    """Exact margin value and its gradient on the active linear piece."""
    pre_acts = []
    a = np.asarray(x, dtype=np.float64)
    for layer in net.layers:
        z = layer.weights @ a + layer.bias
        pre_acts.append(z)
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
    y = a
    masked = y.copy()
    masked[c] = -np.inf
    j_star = int(np.argmax(masked))
    value = float(y[j_star] - y[c])

    g = np.zeros(net.output_dim)
    g[j_star] = 1.0
    g[c] = -1.0
    for layer, z in zip(reversed(net.layers), reversed(pre_acts)):
        if layer.activation == "relu":
            g = g * (z > 0.0)
        g = layer.weights.T @ g
    return value, g


# ---- projected-gradient counterexample search ---------------------------------

def _box_seed(lower: np.ndarray, upper: np.ndarray) -> int:
    digest = hashlib.blake2b(lower.tobytes() + upper.tobytes(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _search_box(net: Network, lower: np.ndarray, upper: np.ndarray, c: int,
                reference: Optional[np.ndarray], config: VerifierConfig) -> Optional[np.ndarray]:
    center = (lower + upper) / 2.0
    free = np.flatnonzero(upper > lower)

    # piecewise-linear maxima tend to sit on corners: try them first when cheap
    probes = [center]
    if reference is not None:
        probes.append(np.clip(reference, lower, upper))
    if 0 < free.size <= 4:
        for bits in itertools.product((0, 1), repeat=free.size):
            corner = center.copy()
            corner[free] = np.where(np.array(bits, dtype=bool), upper[free], lower[free])
            probes.append(corner)
    for p in probes:
        if margin(net, p, c) > 0.0:
            return p

    rng = np.random.default_rng(_box_seed(lower, upper))
    starts = probes[:2]
    while len(starts) < config.pgd_restarts:
        starts.append(lower + rng.random(lower.size) * (upper - lower))

    alpha = (upper - lower) * (2.5 / config.pgd_steps)
    for start in starts:
        p = start.copy()
        for _ in range(config.pgd_steps):
            value, grad = margin_gradient(net, p, c)
            if value > 0.0:
                return p
            if not np.any(grad):
                break
            p = np.clip(p + alpha * np.sign(grad), lower, upper)
        if margin(net, p, c) > 0.0:
            return p
    return None


def find_counterexample(net: Network, spec: GroundedSpec,
                        config: VerifierConfig = VerifierConfig()) -> Optional[np.ndarray]:
    """Search the spec's box for an input whose argmax leaves the target class."""
    _check_compat(net, spec)
    cex = _search_box(net, spec.input_lower.copy(), spec.input_upper.copy(),
                      spec.target_class, np.asarray(spec.reference.values), config)
    if cex is not None and not check_counterexample(net, spec, cex):
        raise VerifierError("counterexample failed exact recheck")
    return cex


# ---- branch and bound -----------------------------------------------------------

def _check_compat(net: Network, spec: GroundedSpec) -> None:
    if spec.dim != net.input_dim:
        raise DimensionMismatch(f"spec dim {spec.dim} != network input dim {net.input_dim}")
    if spec.target_class >= net.output_dim:
        raise DimensionMismatch(
            f"target class {spec.target_class} outside {net.output_dim} outputs"
        )


class _NodeOutcome:
    CERTIFIED = "certified"
    COUNTEREXAMPLE = "counterexample"
    SPLIT = "split"
    STUCK = "stuck"


def _process_node(net, lower, upper, c, reference, config):
    """Certify, refute, or split one subbox."""
    out_lo, out_up = _ibp_bounds(net, lower, upper)
    competitors = np.delete(out_up, c)
    bound = float(competitors.max() - out_lo[c])
    if bound < -config.margin_tolerance:
        return _NodeOutcome.CERTIFIED, None

    cex = _search_box(net, lower, upper, c, reference, config)
    if cex is not None:
        return _NodeOutcome.COUNTEREXAMPLE, cex

    widths = upper - lower
    i = int(np.argmax(widths))
    if widths[i] <= config.split_tolerance:
        return _NodeOutcome.STUCK, None
    mid = (lower[i] + upper[i]) / 2.0
    left_up = upper.copy()
    left_up[i] = mid
    right_lo = lower.copy()
    right_lo[i] = mid
    return _NodeOutcome.SPLIT, ((lower, left_up), (right_lo, upper))


def verify(net: Network, spec: GroundedSpec,
           config: VerifierConfig = VerifierConfig()) -> Verdict:
    """Decide a grounded spec: SAFE, UNSAFE with a counterexample, or UNKNOWN."""
    _check_compat(net, spec)
    t0 = time.perf_counter()
    reference = np.asarray(spec.reference.values, dtype=np.float64)
    root = (spec.input_lower.copy(), spec.input_upper.copy())

    if config.parallel_workers == 1:
        status, cex, nodes = _verify_serial(net, root, spec.target_class, reference, config)
    else:
        status, cex, nodes = _verify_parallel(net, root, spec.target_class, reference, config)

    stats = VerdictStats(nodes_explored=nodes, wall_time=time.perf_counter() - t0)
    if status == "UNSAFE":
        if not check_counterexample(net, spec, cex):
            raise VerifierError("counterexample failed exact recheck")
        return Verdict("UNSAFE", cex, stats)
    return Verdict(status, None, stats)


def _verify_serial(net, root, c, reference, config):
    stack = [root]
    nodes = 0
    stuck = False
    while stack:
        if nodes >= config.max_nodes:
            return "UNKNOWN", None, nodes
        lower, upper = stack.pop()
        nodes += 1
        outcome, payload = _process_node(net, lower, upper, c, reference, config)
        if outcome == _NodeOutcome.COUNTEREXAMPLE:
            return "UNSAFE", payload, nodes
        if outcome == _NodeOutcome.SPLIT:
            stack.extend(payload)
        elif outcome == _NodeOutcome.STUCK:
            stuck = True
    return ("UNKNOWN" if stuck else "SAFE"), None, nodes


class _SharedSearch:
    """Work queue plus first-counterexample latch shared by the workers."""

    def __init__(self, root, config):
        self.stack = [root]
        self.outstanding = 1
        self.nodes = 0
        self.stuck = False
        self.cex = None
        self.budget_exceeded = False
        self.error = None
        self.config = config
        self.lock = threading.Lock()
        self.ready = threading.Condition(self.lock)

    def finished(self):
        return (self.cex is not None or self.budget_exceeded
                or self.error is not None or self.outstanding == 0)


def _worker(shared: _SharedSearch, net, c, reference):
    cfg = shared.config
    while True:
        with shared.ready:
            while not shared.stack and not shared.finished():
                shared.ready.wait()
            if shared.finished():
                shared.ready.notify_all()
                return
            if shared.nodes >= cfg.max_nodes:
                shared.budget_exceeded = True
                shared.ready.notify_all()
                return
            lower, upper = shared.stack.pop()
            shared.nodes += 1
        try:
            outcome, payload = _process_node(net, lower, upper, c, reference, cfg)
        except Exception as exc:  # keep the other workers from deadlocking
            with shared.ready:
                shared.error = exc
                shared.ready.notify_all()
            return
        with shared.ready:
            if outcome == _NodeOutcome.COUNTEREXAMPLE:
                if shared.cex is None:
                    shared.cex = payload
            elif outcome == _NodeOutcome.SPLIT:
                shared.stack.extend(payload)
                shared.outstanding += 2
            elif outcome == _NodeOutcome.STUCK:
                shared.stuck = True
            shared.outstanding -= 1
            shared.ready.notify_all()


def _verify_parallel(net, root, c, reference, config):
    shared = _SharedSearch(root, config)
    workers = [
        threading.Thread(target=_worker, args=(shared, net, c, reference), daemon=True)
        for _ in range(config.parallel_workers)
    ]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    if shared.error is not None:
        raise shared.error
    if shared.cex is not None:
        return "UNSAFE", shared.cex, shared.nodes
    if shared.budget_exceeded or shared.stuck:
        return "UNKNOWN", None, shared.nodes
    return "SAFE", None, shared.nodes
