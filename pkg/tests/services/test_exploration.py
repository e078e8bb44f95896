# tests/services/test_exploration.py
import logging

import pytest

from app.errors import ConfigError, NoConvergence, SameClass
from app.models.datum import Bits, Number, NumVector, Text
from app.models.framework import Datamorphism
from app.models.records import InProcessSubject
from app.services.exploration import ExploreConfig, default_distance, explore_boundary, resolve_distance
from app.services.generation import replay_lineage
from app.subjects.classifier import classifier_framework, midpoint_morphism, threshold_classifier


@pytest.fixture
def mid():
    return midpoint_morphism()


def test_bisection_on_half_threshold(mid):
    """Test locating the boundary of a 0.5 threshold."""
    result = explore_boundary(threshold_classifier(0.5), Number(0.0), Number(1.0), mid, ExploreConfig(epsilon=1e-6))
    lo, hi = result.lo.datum.value, result.hi.datum.value
    assert result.iterations <= 20
    assert hi - lo <= 1e-6
    assert lo <= 0.5 <= hi
    assert result.lo_class == Text("A") and result.hi_class == Text("B")


def test_endpoints_straddle_at_every_iteration(mid):
    """Test that the endpoints straddle the boundary throughout."""
    subject = threshold_classifier(0.5)
    result = explore_boundary(subject, Number(0.0), Number(1.0), mid, ExploreConfig(epsilon=1e-6))
    assert len(result.history) == result.iterations
    for lo, hi in result.history:
        assert subject.evaluate(lo.datum) != subject.evaluate(hi.datum)


def test_bisection_finds_other_threshold(mid):
    """Test locating a boundary away from the midpoint."""
    result = explore_boundary(threshold_classifier(0.3), Number(0.0), Number(1.0), mid)
    assert result.lo.datum.value <= 0.3 <= result.hi.datum.value


def test_reversed_endpoints_keep_a_side(mid):
    """Test that lo stays on the side of the first endpoint."""
    result = explore_boundary(threshold_classifier(0.5), Number(1.0), Number(0.0), mid, ExploreConfig(epsilon=1e-3))
    assert result.lo_class == Text("B")
    assert result.hi.datum.value <= 0.5 <= result.lo.datum.value


def test_same_class_is_error(mid):
    """Test exploring between inputs of the same class."""
    with pytest.raises(SameClass):
        explore_boundary(threshold_classifier(0.5), Number(0.6), Number(0.9), mid)


def test_no_convergence_after_max_iterations(mid, caplog):
    """Test running out of iterations."""
    with caplog.at_level(logging.ERROR):
        with pytest.raises(NoConvergence, match="after 3 iterations"):
            explore_boundary(threshold_classifier(0.5), Number(0.0), Number(1.0), mid,
                             ExploreConfig(epsilon=1e-6, max_iterations=3))
    assert "did not converge" in caplog.text


def test_already_close_endpoints_need_no_iterations(mid):
    """Test endpoints already within epsilon."""
    result = explore_boundary(threshold_classifier(0.5), Number(0.4999999), Number(0.5), mid)
    assert result.iterations == 0
    assert result.trace == []


def test_probe_lineage_replays(mid):
    """Test that explored points replay from their lineages."""
    fw = classifier_framework()
    result = explore_boundary(threshold_classifier(0.5), Number(0.0), Number(1.0), mid, ExploreConfig(epsilon=1e-2))
    pool = result.to_pool()
    assert len(pool) == 2 + result.iterations
    for probe in result.trace:
        assert replay_lineage(fw, pool, probe.lineage) == probe.datum
    assert pool.topological_order()


def test_vector_endpoints(mid):
    """Test exploring between two vectors."""
    subject = InProcessSubject("first-coordinate", lambda d: Text("A" if d.values[0] < 0.25 else "B"))
    result = explore_boundary(subject, NumVector([0.0, 0.0]), NumVector([1.0, 1.0]), mid, ExploreConfig(epsilon=1e-4))
    assert result.lo.datum.values[0] <= 0.25 <= result.hi.datum.values[0]


def test_exploration_needs_binary_morphism():
    """Test exploring with a unary datamorphism."""
    unary = Datamorphism("shift", lambda args, params: Number(args[0].value + 1.0))
    with pytest.raises(ConfigError, match="binary"):
        explore_boundary(threshold_classifier(0.5), Number(0.0), Number(1.0), unary)


def test_explore_config_validation():
    """Test rejection of invalid exploration settings."""
    with pytest.raises(ConfigError):
        ExploreConfig(epsilon=0.0)


def test_distances():
    """Test the built-in distances."""
    assert default_distance(Number(1.0), Number(3.5)) == 2.5
    assert default_distance(NumVector([0.0, 0.0]), NumVector([3.0, 4.0])) == 5.0
    assert default_distance(Bits.from_string("0110"), Bits.from_string("0011")) == 2.0
    assert default_distance(Text("a"), Text("a")) == 0.0
    assert default_distance(Text("a"), Text("b")) == 1.0
    with pytest.raises(ConfigError, match="Unknown distance"):
        resolve_distance("manhattan")
