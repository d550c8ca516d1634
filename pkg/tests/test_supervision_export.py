import io
import json

import pytest

from services.errors import SchemaError
from services.supervision_export import (
    export_augmented, export_supervision, header, read_augmented, read_supervision, recompute_weights,
)
from services.synthesis import augment_counting, synthesize


@pytest.fixture(scope="module")
def sets(gross_margin, tatqa_sample):
    return [synthesize(gross_margin)] + [synthesize(ctx) for ctx in tatqa_sample]


def test_header_lists_fixed_alphabet():
    head = header()
    assert head["kind"] == "header" and head["schema_version"] == 1
    assert len(head["alphabet"]) == 21
    assert head["alphabet"][17] == {"id": 17, "token": "OP(CHANGE_R)"}


def test_export_and_read_back(sets):
    out = io.StringIO()
    n = export_supervision(sets, out)
    assert n == sum(len(s.programs) for s in sets)
    lines = out.getvalue().splitlines()
    assert len(lines) == n + 1

    head, recs = read_supervision(lines)
    assert head == json.loads(json.dumps(header()))
    first = next(r for r in recs if r["program"] == "DIFF(CV(57,57), CV(58,58))")
    assert first["instance_id"] == "gm-change"
    assert first["tokens"] == [0, 13, 6, 78, 78, 6, 79, 79, 2, 1]
    assert first["signature"] == "DIFF/CV/CV"


def test_weights_recompute_from_programs(sets):
    out = io.StringIO()
    export_supervision(sets, out)
    _, recs = read_supervision(out.getvalue().splitlines())
    weights = recompute_weights(recs)
    for rec in recs:
        assert weights[(rec["instance_id"], rec["program"])] == pytest.approx(rec["weight"])


def test_read_requires_header():
    with pytest.raises(SchemaError):
        read_supervision(['{"schema_version": 1, "instance_id": "a", "program": "SPAN(1,1)"}'])
    with pytest.raises(SchemaError):
        read_supervision([])


def test_read_rejects_other_versions():
    lines = [json.dumps(header()), '{"schema_version": 2, "instance_id": "a", "program": "SPAN(1,1)"}']
    with pytest.raises(SchemaError) as err:
        read_supervision(lines)
    assert err.value.path == "line 2.schema_version"


def test_augmented_file_carries_rewritten_contexts(tatqa_sample):
    synthetic = augment_counting(tatqa_sample[2])
    out = io.StringIO()
    assert export_augmented([(synthetic, synthesize(synthetic))], out) == 1
    lines = out.getvalue().splitlines()
    assert json.loads(lines[1])["kind"] == "context"

    ((ctx, recs),) = read_augmented(lines)
    assert ctx == synthetic
    assert recs and all(r["instance_id"] == "regions-above#count" for r in recs)
    # context lines never reach the plain record list
    _, plain = read_supervision(lines)
    assert len(plain) == len(recs)


def test_augmented_records_need_their_context():
    lines = [json.dumps(header()),
             '{"schema_version": 1, "instance_id": "a#count", "program": "COUNT(SPAN(1,1))"}']
    with pytest.raises(SchemaError) as err:
        read_augmented(lines)
    assert err.value.path == "line 2.instance_id"
