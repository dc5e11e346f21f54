import json

import pytest
from hypothesis import given, strategies as st

from manetmon.wire import (
    AggregatePayload, EncodeError, InvalidMessage, MalformedJSON, Message, MessageType,
    MissingField, NonPositiveTimeout, QueryPayload, RelaySetTooLong, UnknownType, WireError,
    decode_message, encode_message, validate,
)


def query(relays=("10.0.0.1",), parent="10.0.0.1", source="10.0.0.2", timeout=500):
    return Message(MessageType.QUERY, parent, source, timeout,
                   query=QueryPayload("avg(cpu)", tuple(relays)))


def aggregate(t=MessageType.AGGREGATE, obs=3, outcome=20.0):
    return Message(t, "10.0.0.1", "10.0.0.5", 500,
                   aggregate=AggregatePayload(outcome, "10.0.0.1", obs))


def test_query_encodes_to_listing_shape():
    obj = json.loads(encode_message(query()))
    assert list(obj) == ["type", "parent", "source", "timeout", "query"]
    assert obj["type"] == "Query"
    assert obj["query"] == {"function": "avg(cpu)", "relaySet": ["10.0.0.1"]}
    assert obj["timeout"] == 500


def test_encoding_is_compact_and_canonical():
    raw = encode_message(query())
    assert raw == (b'{"type":"Query","parent":"10.0.0.1","source":"10.0.0.2","timeout":500,'
                   b'"query":{"function":"avg(cpu)","relaySet":["10.0.0.1"]}}')


def test_aggregate_keys():
    obj = json.loads(encode_message(aggregate()))
    assert obj["aggregate"] == {"outcome": 20.0, "destination": "10.0.0.1", "observations": 3}
    assert "query" not in obj


def test_representative_query_size_in_band():
    m = Message(MessageType.QUERY, "192.168.100.101", "192.168.100.102", 500,
                query=QueryPayload("avg(cpu)", ("192.168.100.101", "192.168.100.17",
                                                "192.168.100.3")))
    assert 100 <= len(encode_message(m)) <= 250


def test_decode_listing_bytes():
    raw = (b'{"type": "Query", "parent": "10.0.0.1", "source": "10.0.0.2", "timeout": 500,'
           b' "query": {"relaySet": ["10.0.0.1"], "function": "avg(cpu)"}}')
    assert decode_message(raw) == query()


def test_decode_aggregate_int_outcome_becomes_float():
    raw = ('{"type":"AggregateACK","parent":"a","source":"b","timeout":10,'
           '"aggregate":{"outcome":7,"destination":"c","observations":1}}')
    m = decode_message(raw)
    assert m.type is MessageType.AGGREGATE_ACK
    assert isinstance(m.aggregate.outcome, float) and m.aggregate.outcome == 7.0


@pytest.mark.parametrize("raw", [b"", b"{", b"\xff\xfe", b"[" * 100000, "nul"])
def test_malformed(raw):
    with pytest.raises(MalformedJSON):
        decode_message(raw)


def test_non_object_is_malformed():
    with pytest.raises(MalformedJSON):
        decode_message("[1, 2]")


def test_four_relays_rejected():
    obj = json.loads(encode_message(query()))
    obj["query"]["relaySet"] = ["a", "b", "c", "d"]
    with pytest.raises(RelaySetTooLong):
        decode_message(json.dumps(obj))


def test_unknown_type_and_missing_fields():
    obj = json.loads(encode_message(query()))
    with pytest.raises(UnknownType):
        decode_message(json.dumps(dict(obj, type="QueryACK")))
    del obj["source"]
    with pytest.raises(MissingField):
        decode_message(json.dumps(obj))


@pytest.mark.parametrize("timeout", [0, -5])
def test_non_positive_timeout(timeout):
    obj = json.loads(encode_message(query()))
    obj["timeout"] = timeout
    with pytest.raises(NonPositiveTimeout):
        decode_message(json.dumps(obj))


def test_validate_examples():
    assert validate(query()) == []
    assert len(validate(aggregate(obs=0))) == 1
    both = Message(MessageType.QUERY, "a", "b", 5, query=QueryPayload("avg(cpu)"),
                   aggregate=AggregatePayload(1.0, "a", 1))
    assert len(validate(both)) == 1


def test_validate_relay_rules():
    assert validate(query(relays=("a", "a")))
    assert validate(query(relays=("10.0.0.2",)))  # contains its own source
    assert validate(query(relays=("a", "b", "c", "d")))


def test_aggregate_without_payload_invalid():
    m = Message(MessageType.AGGREGATE, "a", "b", 5)
    assert validate(m)
    with pytest.raises(EncodeError):
        encode_message(m)


def test_non_finite_outcome_rejected():
    with pytest.raises(EncodeError):
        encode_message(aggregate(outcome=float("nan")))


def test_invalid_message_lists_violations():
    raw = ('{"type":"Aggregate","parent":"a","source":"b","timeout":10,'
           '"aggregate":{"outcome":1.0,"destination":"c","observations":0}}')
    with pytest.raises(InvalidMessage) as info:
        decode_message(raw)
    assert info.value.violations


# -- properties -------------------------------------------------------------

addrs = st.from_regex(r"\A10\.0\.[0-9]{1,3}\.[0-9]{1,3}\Z")


@st.composite
def messages(draw):
    t = draw(st.sampled_from(list(MessageType)))
    source = draw(addrs)
    parent = draw(addrs)
    timeout = draw(st.integers(1, 10**6))
    if t is MessageType.QUERY:
        relays = draw(st.lists(addrs.filter(lambda a: a != source), max_size=3, unique=True))
        fn = draw(st.sampled_from(["avg(cpu)", "sum(mem)", "count(node)", "min(x)", "max(y)"]))
        return Message(t, parent, source, timeout, query=QueryPayload(fn, tuple(relays)))
    outcome = draw(st.floats(allow_nan=False, allow_infinity=False))
    return Message(t, parent, source, timeout,
                   aggregate=AggregatePayload(outcome, draw(addrs), draw(st.integers(1, 10**6))))


@given(messages())
def test_round_trip(m):
    assert validate(m) == []
    raw = encode_message(m)
    back = decode_message(raw)
    assert back == m
    assert encode_message(back) == raw


@given(st.binary(max_size=300))
def test_fuzz_bytes_never_crash(data):
    try:
        decode_message(data)
    except WireError:
        pass


@given(messages(), st.data())
def test_fuzz_mutated_json(m, data):
    obj = json.loads(encode_message(m))
    key = data.draw(st.sampled_from(sorted(obj)))
    obj[key] = data.draw(st.one_of(st.none(), st.integers(), st.text(max_size=5),
                                   st.lists(st.integers(), max_size=4)))
    try:
        back = decode_message(json.dumps(obj))
    except WireError:
        return
    assert validate(back) == []
