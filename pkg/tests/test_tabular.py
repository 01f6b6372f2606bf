import numpy as np
import pytest

from specground.core import InputSample, SemanticSpec
from specground.errors import AmbiguousAttribute, UnknownAttribute
from specground.parser import RangeOverride
from specground.tabular import (
    AttributeDef,
    DatasetSchema,
    ground_tabular,
    load_schema,
)

STATLOG_ATTRIBUTES = [
    "Attribute2", "Attribute5", "Attribute8", "Attribute11",
    "Attribute13", "Attribute16", "Attribute18",
]


@pytest.fixture
def schema():
    return load_schema()


@pytest.fixture
def applicant():
    return InputSample("tabular_vector", [0.5] * 7, (7,), "applicant")


def spec_for(obj, action="decrease"):
    return SemanticSpec((obj,) if isinstance(obj, str) else tuple(obj), action, "tabular")


def test_bundled_schema_covers_the_attribute_list(schema):
    names = [a.name for a in schema.attributes]
    assert names == STATLOG_ATTRIBUTES
    assert schema.resolve("Attribute13").description == "Age (years)"


def test_grounding_is_total_on_the_schema(schema, applicant):
    """Every attribute name grounds successfully: 100% on this domain."""
    for name in STATLOG_ATTRIBUTES:
        g = ground_tabular(spec_for(name), applicant, schema)
        assert len(g.regions) == 1
        assert g.regions[0].index == schema.resolve(name).index
        assert g.source == "schema"


def test_decrease_clamps_at_zero(schema):
    x = InputSample("tabular_vector", [0.5] * 7, (7,), "a")
    g = ground_tabular(spec_for("Attribute18", "decrease"), x, schema, delta=0.5)
    r = g.regions[0]
    assert (r.lower, r.upper) == (0.0, 0.5)
    # a larger delta clips at the boundary instead of escaping [0, 1]
    g = ground_tabular(spec_for("Attribute18", "decrease"), x, schema, delta=0.9)
    assert (g.regions[0].lower, g.regions[0].upper) == (0.0, 0.5)


def test_increase_and_change_semantics(schema, applicant):
    g = ground_tabular(spec_for("Attribute2", "increase"), applicant, schema, delta=0.2)
    assert (g.regions[0].lower, g.regions[0].upper) == (0.5, 0.7)
    g = ground_tabular(spec_for("Attribute2", "change"), applicant, schema, delta=0.2)
    assert (g.regions[0].lower, g.regions[0].upper) == pytest.approx((0.3, 0.7))


def test_range_override_normalizes_age_bound(schema, applicant):
    # raw age <= 50 with raw range [19, 75]
    g = ground_tabular(spec_for("Attribute13", "change"), applicant, schema,
                       range_override=RangeOverride(raw_upper=50.0))
    r = g.regions[0]
    assert r.lower == 0.0
    assert r.upper == pytest.approx((50 - 19) / (75 - 19))
    assert r.upper == pytest.approx(0.5535714285714286)


def test_range_override_clips_to_unit_interval(schema, applicant):
    g = ground_tabular(spec_for("Attribute13", "change"), applicant, schema,
                       range_override=RangeOverride(raw_upper=120.0))
    assert g.regions[0].upper == 1.0
    g = ground_tabular(spec_for("Attribute13", "change"), applicant, schema,
                       range_override=RangeOverride(raw_lower=5.0, raw_upper=50.0))
    assert g.regions[0].lower == 0.0


def test_unknown_attribute(schema, applicant):
    with pytest.raises(UnknownAttribute):
        ground_tabular(spec_for("Attribute99"), applicant, schema)


def test_description_substring_resolution(schema):
    assert schema.resolve("age").name == "Attribute13"
    assert schema.resolve("credit amount").name == "Attribute5"
    assert schema.resolve("DURATION").name == "Attribute2"


def test_ambiguous_description_match():
    schema = DatasetSchema((
        AttributeDef("A", "monthly income", 0, 0, 100),
        AttributeDef("B", "monthly spending", 1, 0, 100),
    ))
    with pytest.raises(AmbiguousAttribute):
        schema.resolve("monthly")
    assert schema.resolve("income").name == "A"
    assert schema.resolve("A").name == "A"  # exact name wins


def test_exact_name_beats_description_substring():
    schema = DatasetSchema((
        AttributeDef("rate", "installment rate", 0, 0, 100),
        AttributeDef("X", "rate of change", 1, 0, 100),
    ))
    assert schema.resolve("rate").name == "rate"


def test_multi_object_grounding(schema, applicant):
    g = ground_tabular(spec_for(["Attribute13", "Attribute18"], "change"),
                       applicant, schema)
    assert [r.index for r in g.regions] == [4, 6]
    assert [r.label for r in g.regions] == ["Attribute13", "Attribute18"]


def test_regions_never_leave_unit_interval(schema):
    rng = np.random.default_rng(3)
    for _ in range(100):
        values = rng.random(7)
        x = InputSample("tabular_vector", values, (7,), "r")
        action = rng.choice(["increase", "decrease", "change"])
        name = rng.choice(STATLOG_ATTRIBUTES)
        delta = float(rng.random() * 2)
        g = ground_tabular(spec_for(str(name), str(action)), x, schema, delta=delta)
        r = g.regions[0]
        assert 0.0 <= r.lower <= r.upper <= 1.0


def test_schema_validation():
    with pytest.raises(ValueError):
        AttributeDef("A", "x", 0, 5, 5)  # empty raw range
    with pytest.raises(ValueError):
        DatasetSchema((
            AttributeDef("A", "x", 0, 0, 1),
            AttributeDef("B", "y", 0, 0, 1),  # duplicate index
        ))
