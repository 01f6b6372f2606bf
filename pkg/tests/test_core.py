import json
import os

import numpy as np
import pytest

from specground.core import (
    DenseLayer,
    FeatureRange,
    Grounding,
    GroundedSpec,
    InputSample,
    Network,
    PixelBox,
    SemanticSpec,
    TimeInterval,
    Verdict,
    check_counterexample,
    check_region_within,
    forward,
    load_network,
    predict,
    region_coordinate_indices,
    region_from_dict,
    region_to_dict,
    save_network,
)
from specground.errors import DimensionMismatch

from conftest import fixture_path, golden_path, load_fixture_json, random_network


# ---- forward evaluation ------------------------------------------------------

def test_forward_identity():
    net = Network((DenseLayer(np.eye(2), np.zeros(2), "none"),))
    out = forward(net, [0.3, 0.7])
    assert np.allclose(out, [0.3, 0.7])


def test_forward_relu_clamps():
    net = Network((
        DenseLayer(np.array([[1.0, -1.0]]), np.array([0.0]), "relu"),
        DenseLayer(np.array([[1.0]]), np.array([0.0]), "none"),
    ))
    out = forward(net, [0.2, 0.5])
    assert out[0] == 0.0  # relu(-0.3) = 0


def test_forward_matches_golden_file():
    net = Network.from_dict(load_fixture_json("forward_net_3layer.json"))
    with open(golden_path("forward_golden.json")) as fh:
        golden = json.load(fh)
    out = forward(net, golden["input"])
    assert np.allclose(out, golden["expected_output"], atol=1e-9)
    assert predict(net, golden["input"]) == golden["expected_argmax"]


def test_forward_dimension_mismatch():
    net = Network((DenseLayer(np.eye(2), np.zeros(2), "none"),))
    with pytest.raises(DimensionMismatch):
        forward(net, [0.1, 0.2, 0.3])


def test_forward_piecewise_linear_away_from_kinks(rng):
    """Finite differences match a local linear model away from ReLU kinks."""
    net = random_network(rng, [3, 6, 4], scale=1.0)
    for _ in range(20):
        x = rng.random(3)
        # estimate the local Jacobian by forward differences
        h = 1e-7
        y0 = forward(net, x)
        cols = [(forward(net, x + h * e) - y0) / h for e in np.eye(3)]
        jac = np.stack(cols, axis=1)
        # a second, smaller step must agree with the same linear model
        d = rng.random(3) * 1e-5
        assert np.allclose(forward(net, x + d), y0 + jac @ d, atol=1e-8)


# ---- network structure and round trip -------------------------------------------

def test_network_dim_chaining_checked():
    with pytest.raises(ValueError):
        Network((
            DenseLayer(np.ones((3, 2)), np.zeros(3), "relu"),
            DenseLayer(np.ones((2, 4)), np.zeros(2), "none"),
        ))


def test_network_last_layer_must_be_linear():
    with pytest.raises(ValueError):
        Network((DenseLayer(np.eye(2), np.zeros(2), "relu"),))


def test_network_json_round_trip_exact(tmp_path, rng):
    net = random_network(rng, [4, 5, 3], scale=1.3)
    path = os.path.join(tmp_path, "net.json")
    save_network(net, path)
    loaded = load_network(path)
    assert loaded.input_dim == net.input_dim
    for a, b in zip(net.layers, loaded.layers):
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)
        assert a.activation == b.activation
    # a second round trip produces identical bytes
    path2 = os.path.join(tmp_path, "net2.json")
    save_network(loaded, path2)
    assert open(path).read() == open(path2).read()


# ---- domain types -----------------------------------------------------------------

def test_semantic_spec_validation():
    spec = SemanticSpec(("beak", "tail"), "remove", "image")
    assert spec.objects == ("beak", "tail")
    with pytest.raises(ValueError):
        SemanticSpec((), "remove", "image")
    with pytest.raises(ValueError):
        SemanticSpec(("  ",), "remove", "image")
    with pytest.raises(ValueError):
        SemanticSpec(("beak",), "remove", "tabular")  # wrong domain for action
    with pytest.raises(ValueError):
        SemanticSpec(("x",), "levitate", "image")


def test_input_sample_validation():
    s = InputSample("image_grayscale", [0.0, 0.5, 1.0, 0.25], (2, 2), "img")
    assert s.width == 2 and s.height == 2
    with pytest.raises(ValueError):
        InputSample("image_grayscale", [0.0, 0.5, 1.0], (2, 2), "img")
    with pytest.raises(ValueError):
        InputSample("tabular_vector", [1.5], (1,), "x")
    with pytest.raises(ValueError):
        InputSample("hologram", [0.5], (1,), "x")


def test_regions_validate_their_geometry():
    with pytest.raises(ValueError):
        PixelBox(4, 0, 4, 2, "empty")
    with pytest.raises(ValueError):
        TimeInterval(5, 5, "empty")
    with pytest.raises(ValueError):
        FeatureRange(0, 0.7, 0.3, "inverted")
    with pytest.raises(ValueError):
        FeatureRange(0, 0.0, 0.5, "bad score", score=1.5)


def test_region_bounds_checked_against_sample():
    img = InputSample("image_grayscale", np.zeros(16), (4, 4), "img")
    check_region_within(PixelBox(0, 0, 4, 4, "full"), img)
    with pytest.raises(ValueError):
        check_region_within(PixelBox(0, 0, 5, 4, "wide"), img)
    with pytest.raises(ValueError):
        check_region_within(TimeInterval(0, 4, "t"), img)  # kind mismatch
    wave = InputSample("audio_waveform", np.zeros(8), (8,), "w")
    check_region_within(TimeInterval(2, 8, "t"), wave)
    with pytest.raises(ValueError):
        check_region_within(TimeInterval(2, 9, "t"), wave)


def test_region_coordinate_indices_row_major():
    img = InputSample("image_grayscale", np.zeros(16), (4, 4), "img")
    idx = region_coordinate_indices(PixelBox(1, 2, 3, 4, "b"), img)
    assert sorted(idx) == [9, 10, 13, 14]  # rows 2..3, cols 1..2


def test_region_serialization_round_trip():
    regions = [
        FeatureRange(3, 0.1, 0.9, "age", 1.0),
        PixelBox(0, 1, 4, 5, "beak", 0.42),
        TimeInterval(10, 20, "drill", 0.8),
    ]
    for r in regions:
        assert region_from_dict(region_to_dict(r)) == r


def test_grounding_requires_regions():
    with pytest.raises(ValueError):
        Grounding((), "detector")
    with pytest.raises(ValueError):
        Grounding((FeatureRange(0, 0.0, 1.0, "x"),), "telepathy")


def test_grounded_spec_invariants():
    ref = InputSample("tabular_vector", [0.5, 0.5], (2,), "x")
    spec = GroundedSpec(np.array([0.2, 0.5]), np.array([0.8, 0.5]), ref, 0)
    assert list(spec.free_coordinates()) == [0]
    assert spec.contains_point([0.5, 0.5])
    assert not spec.contains_point([0.9, 0.5])
    with pytest.raises(ValueError):
        GroundedSpec(np.array([0.9, 0.5]), np.array([0.8, 0.5]), ref, 0)
    with pytest.raises(ValueError):
        GroundedSpec(np.array([-0.1, 0.5]), np.array([0.8, 0.5]), ref, 0)


def test_grounded_spec_round_trip():
    ref = InputSample("tabular_vector", [0.5, 0.25], (2,), "x")
    spec = GroundedSpec(np.array([0.2, 0.25]), np.array([0.8, 0.25]), ref, 1,
                        provenance={"note": "round trip"})
    back = GroundedSpec.from_dict(spec.to_dict())
    assert np.array_equal(back.input_lower, spec.input_lower)
    assert np.array_equal(back.input_upper, spec.input_upper)
    assert back.target_class == 1
    assert back.reference.id == "x"
    assert back.provenance == {"note": "round trip"}


def test_verdict_counterexample_contract():
    with pytest.raises(ValueError):
        Verdict("UNSAFE")  # missing counterexample
    with pytest.raises(ValueError):
        Verdict("SAFE", counterexample=np.zeros(2))
    v = Verdict("UNSAFE", counterexample=np.array([0.1]))
    assert v.counterexample is not None


def test_check_counterexample_rechecks_exactly(line_net):
    ref = InputSample("tabular_vector", [0.8], (1,), "x")
    spec = GroundedSpec(np.array([0.0]), np.array([1.0]), ref, 0)
    assert check_counterexample(line_net, spec, [0.2])       # argmax flips to 1
    assert not check_counterexample(line_net, spec, [0.9])   # stays class 0
    assert not check_counterexample(line_net, spec, [1.2])   # outside the box


def test_core_types_are_immutable():
    ref = InputSample("tabular_vector", [0.5], (1,), "x")
    with pytest.raises(Exception):
        ref.values[0] = 0.9
    spec = SemanticSpec(("beak",), "remove", "image")
    with pytest.raises(Exception):
        spec.operation = "add_noise"
