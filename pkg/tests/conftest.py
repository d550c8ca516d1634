import random
from pathlib import Path

import pytest

from services.answers import Answer, Scale
from services.data_loader import load_drop, load_tatqa, read_context
from services.knowledge_model import HybridContext, Paragraph, Table, linearize

FIXTURES = Path(__file__).resolve().parent.parent / "data" / "fixtures"


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


@pytest.fixture(scope="session")
def gross_margin():
    return read_context(fixture_path("gross_margin.json"), "gm-change")


@pytest.fixture(scope="session")
def gross_margin_li(gross_margin):
    return linearize(gross_margin, "word")


@pytest.fixture(scope="session")
def gross_margin_digit_li(gross_margin):
    return linearize(gross_margin, "digit")


@pytest.fixture(scope="session")
def sales():
    return read_context(fixture_path("argmax_sales.json"), "sales-largest")


@pytest.fixture(scope="session")
def sales_li(sales):
    return linearize(sales, "word")


@pytest.fixture(scope="session")
def mini():
    return read_context(fixture_path("mini_context.json"))


@pytest.fixture(scope="session")
def mini_li(mini):
    return linearize(mini, "word")


@pytest.fixture(scope="session")
def tatqa_sample():
    return load_tatqa(fixture_path("tatqa_sample.json"))


@pytest.fixture(scope="session")
def drop_sample():
    return load_drop(fixture_path("drop_passage.json"))


# ------------------------------------------------------------
#  Synthetic year-over-year corpus
# ------------------------------------------------------------

METRICS = ["Revenue", "Net income", "Operating cash flow", "Deferred revenue", "Gross profit",
           "Capital expenditure", "Research expense", "Service revenue", "License revenue",
           "Interest expense"]


def _fmt(x: float) -> str:
    return f"{x:.1f}"


def synthetic_corpus(n: int = 200, seed: int = 7):
    """
    Each instance: a 2-year table row for one metric plus a paragraph repeating both
    figures. Most ask for the change between years, every fifth asks for the average.
    Both operands occur once in the table and once in the text; operands stay in
    [100, 200) so no answer ever coincides with a context number.
    """
    rng = random.Random(seed)
    out = []
    for i in range(n):
        metric = METRICS[i % len(METRICS)]
        while True:
            a = rng.randint(1000, 1999) / 10
            b = rng.randint(1000, 1999) / 10
            if abs(a - b) >= 5:
                break
        table = Table.from_rows([["", "2019", "2018"], [metric, _fmt(a), _fmt(b)]])
        paragraph = Paragraph(0, f"{metric} was {_fmt(a)} in the current year compared with "
                                 f"{_fmt(b)} in the prior year.")
        if i % 5 == 4:
            question = f"What was the average {metric.lower()} for 2018 and 2019?"
            gold = (round(a * 10) + round(b * 10)) / 20
            derivation = f"({_fmt(a)}+{_fmt(b)})/2"
        else:
            question = f"What was the change in {metric.lower()} from 2018 to 2019?"
            gold = (round(a * 10) - round(b * 10)) / 10
            derivation = f"{_fmt(a)}-{_fmt(b)}"
        out.append(HybridContext(
            id=f"syn-{i}",
            question=question,
            table=table,
            paragraphs=(paragraph,),
            gold_answer=Answer.number(f"{gold:.2f}"),
            gold_scale=Scale.NONE,
            derivation=derivation,
            answer_from="table-text",
        ))
    return out


@pytest.fixture(scope="session")
def corpus():
    return synthetic_corpus()


@pytest.fixture
def fixture_file():
    return fixture_path
