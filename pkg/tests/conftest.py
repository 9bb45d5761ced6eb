import pytest

from starqa.cards import load_cards
from starqa.model import generate_suite


@pytest.fixture(scope="session")
def registry():
    reg = load_cards()
    reg.freeze()
    return reg


@pytest.fixture(scope="session")
def small_suite():
    return generate_suite(seed=0, n=20)


def assert_alternation(trace, min_steps: int = 4) -> None:
    """Slot law for a violation-free alternating-strategy trace."""
    cats = [s.effective_category for s in trace.steps]
    assert "violation" not in cats, trace.episode_id
    assert cats.count("general") == 1, trace.episode_id
    assert cats[-1] == "general", trace.episode_id
    prefix = cats[:-1]
    assert len(prefix) >= min_steps, trace.episode_id
    assert all(c in ("temporal", "spatial") for c in prefix), trace.episode_id
    for a, b in zip(prefix, prefix[1:]):
        assert a != b, trace.episode_id
