import math

import pytest
from hypothesis import given, settings, strategies as st

from inorder_multicast.core import Decoder, Single, SlotOutcome, Xor
from inorder_multicast.errors import SchemeError
from inorder_multicast.schemes import (
    INF,
    NM,
    Advantage,
    FixedPriority,
    Greedy,
    Index,
    Randomized,
    TimeShare,
    component_for_slot,
    decide,
    decide_fixed_priority,
    decide_greedy,
    decide_nm,
    gaps,
    largest_remainder,
    markov_state,
    parse_scheme,
    parse_state,
)
from inorder_multicast.simulator import iter_reference

outcomes = st.lists(st.sampled_from(list(SlotOutcome)), max_size=120)


@st.composite
def decoders(draw):
    prefix = draw(st.integers(0, 8))
    extra = draw(st.sets(st.integers(prefix + 2, prefix + 12), max_size=6))
    return Decoder(prefix=prefix, buffered=set(extra))


def test_markov_state_examples():
    assert markov_state(Decoder(prefix=1), Decoder(prefix=1)) == Index(0)
    assert markov_state(Decoder(prefix=2), Decoder(prefix=0)) == Index(2)
    assert markov_state(Decoder(prefix=2), Decoder(prefix=0, buffered={3})) == Advantage(2)


def test_state_text_round_trip():
    for s in (Index(0), Index(-3), Advantage(2), Advantage(-1)):
        assert parse_state(str(s)) == s
    with pytest.raises(ValueError):
        Advantage(0)


def test_fixed_priority_examples():
    assert decide_fixed_priority(Decoder(prefix=1), Decoder(prefix=1)) == Single(2)
    assert decide_fixed_priority(Decoder(prefix=2), Decoder(prefix=1, buffered={3})) == Xor(3, 2)
    assert decide_fixed_priority(Decoder(prefix=2), Decoder(prefix=1)) == Single(3)
    assert decide_fixed_priority(Decoder(prefix=1), Decoder(prefix=2), primary=2) == Single(3)


def test_greedy_examples():
    # slot 5 of the greedy walk-through: U1 lags at r=2 but already holds s3
    assert decide_greedy(Decoder(prefix=1, buffered={3}), Decoder(prefix=2)) == Xor(3, 2)
    assert decide_greedy(Decoder(), Decoder()) == Single(1)
    assert decide_greedy(Decoder(prefix=3), Decoder(prefix=1, buffered={3})) == Single(4)


def test_nm_examples():
    d1, d2 = Decoder(prefix=2), Decoder(prefix=1)
    assert markov_state(d1, d2) == Index(1)
    assert decide_nm(d1, d2, 1, 1) == Single(2)
    assert decide_nm(d1, d2, 2, 2) == Single(3)
    with pytest.raises(SchemeError):
        NM(0, 1)
    with pytest.raises(SchemeError):
        decide_nm(d1, d2, 1, 0)


@settings(max_examples=2000)
@given(decoders(), decoders())
def test_unbounded_nm_is_greedy(d1, d2):
    assert decide_nm(d1, d2, INF, INF) == decide_greedy(d1, d2)


@settings(max_examples=300)
@given(outcomes)
def test_nm_inf_1_matches_fixed_u1_on_reachable_states(seq):
    for record, d1, d2 in iter_reference(seq, FixedPriority(1)):
        assert decide_nm(d1, d2, INF, 1) == decide_fixed_priority(d1, d2, 1)


@settings(max_examples=200)
@given(outcomes, st.sampled_from(["fixed:u1", "fixed:u2", "greedy", "nm:1,1", "nm:3,2", "nm:inf,2"]))
def test_only_required_packets_are_sent(seq, text):
    # every combination is a required packet or the XOR of both, and decodable
    for record, _, _ in iter_reference(seq, parse_scheme(text)):
        r1, r2 = record.required
        if isinstance(record.sent, Single):
            assert record.sent.k in (r1, r2)
        else:
            assert {record.sent.k1, record.sent.k2} == {r1, r2}


@settings(max_examples=200)
@given(outcomes)
def test_fixed_u1_primary_never_lags(seq):
    for _, d1, d2 in iter_reference(seq, FixedPriority(1)):
        assert gaps(d1, max(d1.required, d2.required)) <= 1
        assert d1.buffered == set()


@pytest.mark.parametrize("text", [
    "fixed:u1", "fixed:u2", "greedy", "nm:3,2", "nm:inf,1", "nm:1,inf",
    "timeshare:[nm:1,1@0.5,nm:9,9@0.5]:1000",
    "random:[greedy@0.25,fixed:u1@0.75]",
])
def test_parse_round_trip(text):
    scheme = parse_scheme(text)
    assert parse_scheme(str(scheme)) == scheme


def test_parse_fraction_forms():
    a = parse_scheme("timeshare:[nm:1,1@1/3,nm:2,2@1/3,nm:3,3@1/3]:10")
    assert a.block_sizes() == (4, 3, 3)
    assert parse_scheme("nm:inf,inf") == NM(INF, INF)


@pytest.mark.parametrize("text", [
    "", "fixed:u3", "nm:0,1", "nm:1", "timeshare:[greedy@0.5]:10",
    "random:[greedy@0.5,fixed:u1@0.6]", "timeshare:[greedy@1.0]:0",
    "random:[random:[greedy@1]@1]", "sometimes",
])
def test_parse_rejects(text):
    with pytest.raises(SchemeError, match="fixed:u1"):
        parse_scheme(text)


def test_timeshare_blocks_follow_list_order():
    ts = TimeShare(((NM(1, 1), 0.5), (NM(9, 9), 0.5)), 1000)
    assert [component_for_slot(ts, t) for t in (1, 500, 501, 1000, 1001)] == [
        NM(1, 1), NM(1, 1), NM(9, 9), NM(9, 9), NM(1, 1)]


@given(st.lists(st.integers(1, 50), min_size=1, max_size=6), st.integers(1, 500))
def test_largest_remainder_sums(weights, total):
    fractions = [w / sum(weights) for w in weights]
    sizes = largest_remainder(fractions, total)
    assert sum(sizes) == total
    assert all(abs(s - f * total) < 1 for s, f in zip(sizes, fractions))


def test_randomized_selects_by_cumulative_fraction():
    r = Randomized(((Greedy(), 0.25), (FixedPriority(1), 0.75)))
    assert component_for_slot(r, 1, 0.1) == Greedy()
    assert component_for_slot(r, 1, 0.3) == FixedPriority(1)
    d1, d2 = Decoder(prefix=2), Decoder(prefix=0, buffered={3})
    assert decide(r, d1, d2, 1, 0.9) == Xor(3, 1)


def test_threshold_values():
    assert NM(INF, 3).N == math.inf
    with pytest.raises(SchemeError):
        NM(1.5, 2)
