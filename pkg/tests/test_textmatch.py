"""Token matching primitives shared by sim tools and the heuristic planner."""

from hypothesis import given, strategies as st

from starqa.textmatch import STOPWORDS, best_match, content_tokens, overlap, tokenize


def test_tokenize_lowercases_and_splits():
    assert tokenize("The Bus; stops-AT exit 12!") == ["the", "bus", "stops", "at", "exit", "12"]


def test_content_tokens_drop_stopwords():
    assert content_tokens("what does the sign say") == {"sign"}
    assert "the" in STOPWORDS and "say" in STOPWORDS


def test_overlap_counts_shared_content_tokens():
    assert overlap("the red bus stops", "bus stops at the station") == 2
    assert overlap("the the the", "a an and") == 0


def test_best_match_ties_break_earliest():
    candidates = ["bus stops here", "bus stops there", "cyclist passes"]
    assert best_match("where the bus stops", candidates) == (0, 2)
    assert best_match("zebra", candidates) == (-1, 0)


_texts = st.text(alphabet="abcdefg hij", max_size=40)


@given(_texts, _texts)
def test_overlap_symmetric_and_bounded(a, b):
    assert overlap(a, b) == overlap(b, a)
    assert overlap(a, b) <= min(len(content_tokens(a)), len(content_tokens(b)))
    assert overlap(a, a) == len(content_tokens(a))
