from dataclasses import replace
from decimal import Decimal

import pytest

from services.answers import Answer
from services.derivation import (
    BinOp, DerivationError, Literal, parse_derivation, program_from_derivation,
)
from services.knowledge_model import HybridContext, Table, linearize

MARGIN_TABLE = Table.from_rows([["", "2019", "2018"], ["Margin", "70.07", "80.82"]])
# 1 What, 2 was, 3 the, 4 average, 5 margin, 6 ?, 7 </s>, 8 2019, 9 2018, 10 Margin, 11 70.07, 12 80.82
MARGIN_QUESTION = "What was the average margin?"


def margin(derivation):
    return HybridContext("m", MARGIN_QUESTION, MARGIN_TABLE, derivation=derivation,
                         gold_answer=Answer.number("75.445"))


def derive(ctx, tokenizer="word"):
    p = program_from_derivation(ctx, linearize(ctx, tokenizer))
    return None if p is None else str(p)


def test_parse_subtraction():
    e = parse_derivation("0.53-0.47")
    assert e == BinOp("-", Literal("0.53", Decimal("0.53")), Literal("0.47", Decimal("0.47")))


def test_precedence_and_parentheses():
    e = parse_derivation("1+2*3")
    assert e.symbol == "+" and e.right.symbol == "*"
    e = parse_derivation("(1+2)*3")
    assert e.symbol == "*" and e.left.symbol == "+"


def test_grouped_literals_and_unary_minus():
    e = parse_derivation("-1,496.5 + $5%")
    assert e.left == Literal("-1,496.5", Decimal("-1496.5"))
    assert e.right.value == Decimal(5)


@pytest.mark.parametrize("text", ["0.53-", "(1+2", "1+2)", "abc", "1 $ 2"])
def test_malformed_derivations(text):
    with pytest.raises(DerivationError):
        parse_derivation(text)


def test_gross_margin_derivation(gross_margin):
    assert derive(gross_margin) == "DIFF(CV(57,57), CV(58,58))"


def test_gross_margin_derivation_digit_mode(gross_margin):
    assert derive(gross_margin, "digit") == "DIFF(CV(131,134), CV(135,138))"


def test_avg_rewrite():
    assert derive(margin("(70.07+80.82)/2")) == "AVG(CV(11,11), CV(12,12))"


def test_divisor_other_than_term_count_stays_div():
    assert derive(margin("(70.07+80.82)/100")) == "DIV(SUM(CV(11,11), CV(12,12)), 100)"


def test_change_ratio_rewrite():
    assert derive(margin("(70.07-80.82)/80.82")) == "CHANGE_R(CV(11,11), CV(12,12))"
    assert derive(margin("(70.07-80.82)/80.82*100")) == "TIMES(CHANGE_R(CV(11,11), CV(12,12)), 100)"


def test_three_term_average(sales):
    ctx = replace(sales, derivation="(1,496.5+1,202.9+1,107.7)/3")
    assert derive(ctx) == "AVG(CV(19,19), CV(20,20), CV(21,21))"


def test_sales_change_ratio(sales):
    ctx = replace(sales, derivation="(1,496.5-1,202.9)/1,202.9")
    assert derive(ctx) == "CHANGE_R(CV(19,19), CV(20,20))"


def test_count_derivation(tatqa_sample):
    above = next(c for c in tatqa_sample if c.id == "regions-above")
    ctx = replace(above, derivation="Americas##Europe", gold_answer=Answer.count(2))
    # question tokens 1..9, table from 11: Americas at 13, Europe at 16
    assert derive(ctx) == "COUNT(CELL(13,13), CELL(16,16))"


@pytest.mark.parametrize("derivation", ["9.99-0.47", "(0.53-0.47)/7", "0.53--", "", "   ", None])
def test_ungroundable_returns_none(gross_margin, derivation):
    assert derive(replace(gross_margin, derivation=derivation)) is None


def test_count_item_missing(tatqa_sample):
    above = next(c for c in tatqa_sample if c.id == "regions-above")
    assert derive(replace(above, derivation="Americas##Oceania")) is None


def test_question_numbers_ground_last():
    table = Table.from_rows([["", "2019", "2018"], ["Revenue", "4,210", "3,900"]])
    # 4 2019, 6 5,000, 15 </s>, 16 2019, 17 2018, 18 Revenue, 19 4,210, 20 3,900
    ctx = HybridContext("h", "If revenue in 2019 was 5,000 instead, what would be the change?", table,
                        derivation="5,000-4,210", gold_answer=Answer.number("790"))
    assert derive(ctx) == "DIFF(VALUE(6,6), CV(19,19))"
    assert derive(replace(ctx, derivation="2019-2018")) == "DIFF(CV(16,16), CV(17,17))"
