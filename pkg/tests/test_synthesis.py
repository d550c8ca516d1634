from collections import defaultdict
from dataclasses import replace
from decimal import Decimal

import pytest

from config.settings import legality_profile
from services.answers import Answer, Scale
from services.errors import ConfigError
from services.knowledge_model import HybridContext, Table, linearize
from services.legality import LegalityConfig, validate
from services.program_dsl import parse_program
from services.program_executor import answers_match, execute
from services.synthesis import (
    ArithmeticSearch, Searcher, SynthesisConfig, assign_weights, augment_counting, synthesize,
    synthesize_batch,
)

GROSS_MARGIN = "DIFF(CV(57,57), CV(58,58))"


def programs(result):
    return [str(pp.program) for pp in result.programs]


def by_id(contexts, qid):
    return next(c for c in contexts if c.id == qid)


def assert_sound(ctx, result, legality=None):
    li = linearize(ctx)
    for pp in result.programs:
        assert validate(pp.program, li, legality).ok
        got = execute(pp.program, li)
        value = ctx.gold_answer.numeric_value()
        if pp.gold_factor == 1:
            assert answers_match(got, ctx.gold_answer)
        else:
            assert answers_match(got, Answer.number(value * pp.gold_factor))


def assert_weights(result):
    totals = defaultdict(float)
    for pp in result.programs:
        totals[pp.signature] += pp.weight
    for total in totals.values():
        assert total == pytest.approx(1.0)


# ---- arithmetic ----

def test_gross_margin_without_derivation(gross_margin):
    result = synthesize(gross_margin, SynthesisConfig(per_instance_time_budget=30))
    assert GROSS_MARGIN in programs(result)
    assert "DIFF(VALUE(65,65), VALUE(69,69))" in programs(result)
    assert not result.truncated
    assert_sound(gross_margin, result)
    assert_weights(result)


def test_gross_margin_with_derivation(gross_margin):
    result = synthesize(gross_margin, mode="with-derivation")
    assert programs(result) == [GROSS_MARGIN]
    assert result.programs[0].weight == 1.0
    assert result.programs[0].signature == "DIFF/CV/CV"


def test_gross_margin_with_derivation_digit(gross_margin):
    result = synthesize(gross_margin, mode="with-derivation", tokenizer="digit")
    assert programs(result) == ["DIFF(CV(131,134), CV(135,138))"]


def test_with_derivation_falls_back_to_search(gross_margin):
    result = synthesize(replace(gross_margin, derivation="9.99-0.47"), mode="with-derivation")
    assert GROSS_MARGIN in programs(result)


def test_scaled_gold(tatqa_sample):
    ctx = by_id(tatqa_sample, "regions-change")
    result = synthesize(ctx)
    # 2,115 at 21 and 2,302 at 22
    assert "DIFF(CV(21,21), CV(22,22))" in programs(result)
    assert_sound(ctx, result)


def quarters(gold):
    table = Table.from_rows([["", "Q1", "Q2"], ["North", "12", "30"], ["South", "8", "62"]])
    # 13 question tokens, </s> at 14, table cells from 15: North 17, 12 18, 30 19, South 20, 8 21, 62 22
    return HybridContext("q", "What is the difference between the South average and the North average?",
                         table, gold_answer=Answer.number(gold), gold_scale=Scale.NONE)


def test_compound_tier():
    ctx = quarters("14")
    compound = "DIFF(AVG(CV(21,21), CV(22,22)), AVG(CV(18,18), CV(19,19)))"
    assert compound in programs(synthesize(ctx))
    # no simple template reaches 14, so the shortcut stops right after the compound tier
    shortcut = synthesize(ctx, SynthesisConfig(first_arith_tier_only=True))
    assert programs(shortcut) == [compound]


def test_nested_tier():
    ctx = quarters("336")
    result = synthesize(ctx)
    assert "TIMES(SUM(CV(18,18), CV(19,19)), CV(21,21))" in programs(result)
    assert_sound(ctx, result)
    flat = synthesize(ctx, SynthesisConfig(enable_nested_templates=False))
    assert all(len(pp.signature.split("/")) != 5 for pp in flat.programs)


def test_extraction_and_arithmetic_are_unioned():
    table = Table.from_rows([["", "2019", "2018", "Change"], ["Margin", "0.53", "0.47", "0.06"]])
    # 8 </s>, 9 2019, 10 2018, 11 Change, 12 Margin, 13 0.53, 14 0.47, 15 0.06
    ctx = HybridContext("u", "What was the change in margin?", table,
                        gold_answer=Answer.number("0.06"), gold_scale=Scale.NONE)
    found = programs(synthesize(ctx))
    assert "CV(15,15)" in found
    assert "DIFF(CV(13,13), CV(14,14))" in found


def test_every_arithmetic_tier_runs():
    table = Table.from_rows([["", "2019", "2018"], ["North", "10", "30"], ["South", "20", "40"]])
    # North 17, 10 18, 30 19, South 20, 20 21, 40 22
    ctx = HybridContext("t", "What is the difference between the South average and the North average?",
                        table, gold_answer=Answer.number("10"), gold_scale=Scale.NONE)
    searcher = Searcher(ctx, linearize(ctx), SynthesisConfig(), LegalityConfig())
    found = [str(p) for p in searcher.search_arithmetic()]
    assert "DIFF(CV(19,19), CV(21,21))" in found
    assert "DIFF(AVG(CV(21,21), CV(22,22)), AVG(CV(18,18), CV(19,19)))" in found

    shortcut = Searcher(ctx, linearize(ctx), SynthesisConfig(first_arith_tier_only=True), LegalityConfig())
    found = [str(p) for p in shortcut.search_arithmetic()]
    assert "DIFF(CV(19,19), CV(21,21))" in found
    assert not any(p.startswith("DIFF(AVG") for p in found)


def test_union_keeps_every_first_tier_program(gross_margin):
    budget = SynthesisConfig(per_instance_time_budget=60)
    full = set(programs(synthesize(gross_margin, budget)))
    shortcut = synthesize(gross_margin, replace(budget, first_arith_tier_only=True))
    assert set(programs(shortcut)) <= full


def test_gold_factor_percent():
    table = Table.from_rows([["", "2019", "2018"], ["Rate", "0.25", "0.2"]])
    ctx = HybridContext("p", "What is the percentage change of the rate?", table,
                        gold_answer=Answer.number("25"), gold_scale=Scale.PERCENT)
    result = synthesize(ctx)
    found = {str(pp.program): pp.gold_factor for pp in result.programs}
    # 2019 11, 2018 12, Rate 13, 0.25 14, 0.2 15
    assert found["CHANGE_R(CV(14,14), CV(15,15))"] == Decimal("0.01")
    assert found["TIMES(CV(14,14), 100)"] == 1
    assert_sound(ctx, result)


def test_tiny_budget_truncates(gross_margin):
    result = synthesize(gross_margin, SynthesisConfig(per_instance_time_budget=1e-9))
    assert result.truncated


def test_arithmetic_operands_end_with_question_numbers(gross_margin_li, gross_margin):
    search = ArithmeticSearch(Searcher(gross_margin, gross_margin_li, SynthesisConfig(), LegalityConfig()))
    starts = [n.start for n in search.operands if hasattr(n, "start")]
    assert 57 in starts and 65 in starts
    # 2018 and 2019 in the question come after every table and paragraph number
    assert starts[-2:] == [11, 13]

    skipped = ArithmeticSearch(Searcher(gross_margin, gross_margin_li,
                                        SynthesisConfig(question_operands=False), LegalityConfig()))
    starts = {n.start for n in skipped.operands if hasattr(n, "start")}
    assert 11 not in starts and 13 not in starts


def hypothetical():
    table = Table.from_rows([["", "2019", "2018"], ["Revenue", "4,210", "3,900"]])
    # 6 5,000, 19 4,210
    return HybridContext("h", "If revenue in 2019 was 5,000 instead, what would be the change?", table,
                         derivation="5,000-4,210", gold_answer=Answer.number("790"), gold_scale=Scale.NONE)


def test_question_numbers_cover_hypotheticals():
    ctx = hypothetical()
    assert "DIFF(VALUE(6,6), CV(19,19))" in programs(synthesize(ctx))
    derived = synthesize(ctx, mode="with-derivation")
    assert programs(derived) == ["DIFF(VALUE(6,6), CV(19,19))"]
    assert synthesize(ctx, SynthesisConfig(question_operands=False)).programs == ()


# ---- spans, comparison, counting ----

def test_argmax_found(sales):
    result = synthesize(sales)
    found = programs(result)
    assert "ARGMAX(KV(CELL(14,14), CV(19,19)), KV(CELL(15,15), CV(20,20)), KV(CELL(16,16), CV(21,21)))" in found
    assert "CELL(14,14)" in found
    assert_weights(result)


def test_span_answer(tatqa_sample):
    ctx = by_id(tatqa_sample, "regions-lowest")
    result = synthesize(ctx)
    assert set(programs(result)) == {
        "CELL(19,20)",
        "SPAN(26,27)",
        "ARGMIN(KV(CELL(13,13), CV(14,14)), KV(CELL(16,16), CV(17,17)), KV(CELL(19,20), CV(21,21)))",
        "ARGMIN(KV(CELL(13,13), CV(15,15)), KV(CELL(16,16), CV(18,18)), KV(CELL(19,20), CV(22,22)))",
    }
    weights = {str(pp.program): pp.weight for pp in result.programs}
    assert weights["CELL(19,20)"] == 1.0
    assert weights["ARGMIN(KV(CELL(13,13), CV(14,14)), KV(CELL(16,16), CV(17,17)), KV(CELL(19,20), CV(21,21)))"] == 0.5


def test_multi_spans(tatqa_sample):
    ctx = by_id(tatqa_sample, "regions-above")
    result = synthesize(ctx)
    assert programs(result) == ["MULTI_SPANS(CELL(13,13), CELL(16,16))",
                                "MULTI_SPANS(CELL(13,13), SPAN(39,39))"]
    capped = synthesize(ctx, SynthesisConfig(max_multispan_combinations=1))
    assert programs(capped) == ["MULTI_SPANS(CELL(13,13), CELL(16,16))"]


def test_counting_augmentation(tatqa_sample):
    ctx = by_id(tatqa_sample, "regions-above")
    synthetic = augment_counting(ctx)
    assert synthetic.id == "regions-above#count"
    assert synthetic.question == "How many regions had revenue above 2,000 in 2019?"
    assert synthetic.gold_answer == Answer.count(2)
    assert synthetic.derivation == "Americas##Europe"
    result = synthesize(synthetic)
    # the rewritten question is one token longer
    assert "COUNT(CELL(14,14), CELL(17,17))" in programs(result)
    assert_weights(result)


def test_no_augmentation_for_single_answers(tatqa_sample):
    assert augment_counting(by_id(tatqa_sample, "regions-lowest")) is None
    assert augment_counting(by_id(tatqa_sample, "regions-change")) is None


def test_drop_instances(drop_sample):
    legality = legality_profile("drop")
    points = synthesize(by_id(drop_sample, "bears-points"), legality=legality)
    assert "SUM(VALUE(18,18), VALUE(25,25))" in programs(points)
    assert_sound(by_id(drop_sample, "bears-points"), points, legality)
    td = synthesize(by_id(drop_sample, "bears-td"), legality=legality)
    assert td.covered
    assert all(pp.signature == "MULTI_SPANS/SPAN/SPAN" for pp in td.programs)


# ---- drivers ----

def test_no_gold_gives_empty_set(mini):
    result = synthesize(mini)
    assert result.programs == () and not result.covered


def test_unknown_mode(gross_margin):
    with pytest.raises(ConfigError):
        synthesize(gross_margin, mode="guess")


def test_assign_weights_by_signature():
    found = [(parse_program("DIFF(CV(1,1), CV(2,2))"), Decimal(1)),
             (parse_program("DIFF(CV(3,3), CV(4,4))"), Decimal(1)),
             (parse_program("DIFF(VALUE(5,5), CV(4,4))"), Decimal(1))]
    assert [pp.weight for pp in assign_weights(found)] == [0.5, 0.5, 1.0]


def test_batch_keeps_order_and_augments(tatqa_sample):
    batch = synthesize_batch(tatqa_sample)
    assert [s.instance_id for s in batch.sets] == ["regions-change", "regions-lowest", "regions-above"]
    assert [ctx.id for ctx, _ in batch.augmented] == ["regions-above#count"]
    assert batch.summary["instances"] == 3
    assert batch.summary["coverage"] == 1.0
    assert synthesize_batch(tatqa_sample, augment=False).augmented == []


def test_batch_with_workers(corpus):
    contexts = corpus[:12]
    cfg = SynthesisConfig(per_instance_time_budget=60)
    serial = synthesize_batch(contexts, cfg, workers=1)
    parallel = synthesize_batch(contexts, cfg, workers=2)
    assert [s.instance_id for s in parallel.sets] == [c.id for c in contexts]
    assert [programs(s) for s in parallel.sets] == [programs(s) for s in serial.sets]


@pytest.mark.slow
def test_corpus_coverage(corpus):
    batch = synthesize_batch(corpus)
    summary = batch.summary
    assert summary["coverage"] >= 0.8
    assert summary["mean_programs_per_covered"] >= 4
    for ctx, result in zip(corpus, batch.sets):
        assert_weights(result)
    for ctx, result in list(zip(corpus, batch.sets))[:20]:
        assert_sound(ctx, result)


@pytest.mark.slow
def test_modes_agree_on_corpus(corpus):
    for ctx in corpus[:40]:
        derived = synthesize(ctx, mode="with-derivation")
        searched = synthesize(ctx)
        assert len(derived.programs) == 1
        assert programs(derived)[0] in programs(searched)


def test_categories_separately(tatqa_sample):
    ctx = by_id(tatqa_sample, "regions-lowest")
    searcher = Searcher(ctx, linearize(ctx), SynthesisConfig(), LegalityConfig())
    assert [str(p) for p in searcher.search_extraction()] == ["CELL(19,20)", "SPAN(26,27)"]
    assert all(str(p).startswith("ARGMIN") for p in searcher.search_comparison())
    assert searcher.search_multispans() == []
    assert searcher.search_counting() == []
    assert searcher.search_arithmetic() == []

    synthetic = augment_counting(by_id(tatqa_sample, "regions-above"))
    searcher = Searcher(synthetic, linearize(synthetic), SynthesisConfig(), LegalityConfig())
    assert "COUNT(CELL(14,14), CELL(17,17))" in [str(p) for p in searcher.search_counting()]
    assert searcher.search_extraction() == []


def test_drop_source_applies_drop_legality(drop_sample):
    points = by_id(drop_sample, "bears-points")
    auto = synthesize(points)
    assert programs(auto) == programs(synthesize(points, legality=legality_profile("drop")))
    assert "SUM(VALUE(18,18), VALUE(25,25))" in programs(auto)
    for pp in auto.programs:
        assert not {"TIMES", "DIV", "CV", "CELL"} & set(pp.signature.split("/"))


def test_multispan_combinations_prefer_close_items(drop_sample):
    td = by_id(drop_sample, "bears-td")
    searcher = Searcher(td, linearize(td), SynthesisConfig(), legality_profile("drop"))
    combos = searcher._combinations(["Jay Cutler", "Greg Olsen"])
    assert combos

    def gaps(combo):
        ranges = sorted((a.start, a.end) for a in combo)
        return sum(max(0, b[0] - a[1]) for a, b in zip(ranges, ranges[1:]))
    assert [gaps(c) for c in combos] == sorted(gaps(c) for c in combos)
