import copy
import json

import pytest

from services.answers import Answer, AnswerKind, Scale
from services.data_loader import (
    context_from_dict, context_to_dict, load_contexts, parse_drop, parse_predictions, parse_tatqa,
    read_context, write_context,
)
from services.errors import SchemaError

DOC = {
    "table": {"uid": "t", "table": [["", "2019"], ["Revenue", "10"]]},
    "paragraphs": [
        {"uid": "p2", "order": 2, "text": "Revenue rose to 10 million."},
        {"uid": "p1", "order": 1, "text": "The company sells widgets."},
    ],
    "questions": [
        {"uid": "q1", "question": "What was revenue in 2019?", "answer": "10",
         "answer_type": "arithmetic", "answer_from": "table", "derivation": "", "scale": "million"},
    ],
}


def doc(**changes):
    d = copy.deepcopy(DOC)
    d["questions"][0].update(changes)
    return [d]


def test_tatqa_fields():
    (ctx,) = parse_tatqa(doc(), rank=False)
    assert ctx.id == "q1"
    assert ctx.table.to_rows() == [["", "2019"], ["Revenue", "10"]]
    assert [(p.id, p.text) for p in ctx.paragraphs] == [(0, "The company sells widgets."),
                                                        (1, "Revenue rose to 10 million.")]
    assert ctx.gold_answer == Answer.number(10)
    assert ctx.gold_scale is Scale.MILLION
    assert ctx.derivation is None
    assert ctx.answer_from == "table"


def test_tatqa_ranks_paragraphs():
    (ctx,) = parse_tatqa(doc())
    assert ctx.paragraphs[0].text.startswith("Revenue")
    assert all(p.rank_score is not None for p in ctx.paragraphs)


def test_sample_answers(tatqa_sample):
    change, lowest, above = tatqa_sample
    assert change.gold == Answer.number(-187, Scale.THOUSAND)
    assert lowest.gold_answer == Answer.span("Asia Pacific")
    assert lowest.gold_scale is Scale.NONE
    assert above.gold_answer.kind is AnswerKind.SPANS
    assert above.gold_answer.texts() == ("Americas", "Europe")


def test_single_item_multi_span_is_a_span():
    (ctx,) = parse_tatqa(doc(answer=["Revenue"], answer_type="multi-span"))
    assert ctx.gold_answer == Answer.span("Revenue")


def test_count_answers():
    (ctx,) = parse_tatqa(doc(answer="2", answer_type="count", derivation="a##b"))
    assert ctx.gold_answer == Answer.count(2)
    assert ctx.derivation == "a##b"


@pytest.mark.parametrize("changes, path", [
    ({"answer_type": "guess"}, "$[0].questions[0].answer_type"),
    ({"scale": "dozens"}, "$[0].questions[0].scale"),
    ({"answer": "ten"}, "$[0].questions[0].answer"),
    ({"answer_from": "image"}, "$[0].questions[0].answer_from"),
    ({"question": 7}, "$[0].questions[0].question"),
])
def test_tatqa_schema_errors(changes, path):
    with pytest.raises(SchemaError) as err:
        parse_tatqa(doc(**changes))
    assert err.value.path == path


def test_tatqa_top_level_must_be_a_list():
    with pytest.raises(SchemaError):
        parse_tatqa({"table": {}})


def test_drop(drop_sample):
    assert [c.id for c in drop_sample] == ["bears-points", "bears-td", "bears-kicker"]
    points, td, kicker = drop_sample
    assert points.source == "drop" and points.answer_from == "text"
    assert points.table.rows == 0
    assert points.gold_scale is Scale.NONE
    assert td.gold_answer == Answer.spans(["Jay Cutler", "Greg Olsen"])
    assert kicker.gold_answer == Answer.span("Robbie Gould")


def test_drop_bad_number():
    data = {"p": {"passage": "x", "qa_pairs": [{"question": "q", "answer": {"number": "many"}}]}}
    with pytest.raises(SchemaError) as err:
        parse_drop(data)
    assert err.value.path == "$.p.qa_pairs[0].answer.number"


def test_context_documents_round_trip(tatqa_sample, tmp_path):
    for ctx in tatqa_sample:
        assert context_from_dict(context_to_dict(ctx)) == ctx
    path = tmp_path / "ctx.json"
    write_context(tatqa_sample[0], path)
    assert read_context(path) == tatqa_sample[0]
    assert json.loads(path.read_text())["schema_version"] == 1


def test_context_schema_version():
    with pytest.raises(SchemaError) as err:
        context_from_dict({"schema_version": 2, "question": "q"})
    assert err.value.path == "$.schema_version"


def test_load_contexts_dispatches(fixture_file):
    assert len(load_contexts(fixture_file("tatqa_sample.json"))) == 3
    assert len(load_contexts(fixture_file("drop_passage.json"))) == 3
    assert [c.id for c in load_contexts(fixture_file("mini_context.json"))] == ["mini"]


def test_read_context_needs_a_question_id(fixture_file):
    with pytest.raises(SchemaError):
        read_context(fixture_file("tatqa_sample.json"))
    with pytest.raises(SchemaError):
        read_context(fixture_file("tatqa_sample.json"), "nope")
    assert read_context(fixture_file("tatqa_sample.json"), "regions-lowest").id == "regions-lowest"


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_contexts(path)


def test_predictions():
    preds = parse_predictions([
        '{"id": "a", "kind": "NUMBER", "value": 1.5, "scale": "million"}',
        "",
        '{"id": "b", "kind": "SPANS", "value": ["x", "y"], "scale": null}',
        '{"id": "c", "error": "no legal program"}',
    ])
    assert preds == {"a": Answer.number("1.5", Scale.MILLION), "b": Answer.spans(["x", "y"]), "c": None}


@pytest.mark.parametrize("line, path", [
    ("{oops", "line 1"),
    ('{"kind": "SPAN", "value": "x"}', "line 1.id"),
    ('{"id": "a", "kind": "WHAT", "value": "x"}', "line 1"),
])
def test_prediction_errors(line, path):
    with pytest.raises(SchemaError) as err:
        parse_predictions([line])
    assert err.value.path == path
