import pytest

from mefa.domain import DependencyLevel, Document, EventMention, InputError, ProbTriple, UNIFORM
from mefa.prompts import (
    AUX_TASKS,
    MAIN_TASKS,
    ParseFailure,
    SubTask,
    fill,
    load_template,
    load_validation_template,
    pair_context,
    parse,
    parse_clues,
    parse_coreference,
    parse_dependency,
    parse_triple,
    render,
)


@pytest.fixture
def doc(corpus6):
    return corpus6[0]


class TestTemplates:
    @pytest.mark.parametrize("task", list(SubTask))
    def test_every_template_has_the_pair_header(self, task):
        text = load_template(task)
        assert text.startswith("Context: {context}\nEvent 1: {event1}\nEvent 2: {event2}")

    def test_main_task_instructions(self):
        assert "determine the temporal order" in load_template("temporality")
        assert "if Event 1 had not occurred" in load_template("necessity")
        assert "does the other inevitably follow" in load_template("sufficiency")

    def test_meda_variants_are_single_choice(self):
        meda = load_template("temporality", style="meda")
        assert "VAGUE" in meda and "Choose one" in meda
        assert "VAGUE" not in load_template("temporality")

    def test_aux_tasks_have_no_meda_variant(self):
        assert load_template("dependency", style="meda") == load_template("dependency")

    def test_unknown_style(self):
        with pytest.raises(ValueError):
            load_template("temporality", style="cot")

    def test_override_directory(self, tmp_path):
        (tmp_path / "temporality.txt").write_text("T {event1}>{event2}")
        assert load_template("temporality", template_dir=tmp_path) == "T {event1}>{event2}"

    @pytest.mark.parametrize("name", ["rewrite", "expand", "extract"])
    def test_validation_templates(self, name):
        text = load_validation_template(name)
        assert "{sentence}" in text and "[EVENT][/EVENT]" in text


class TestRender:
    def test_deterministic(self, doc):
        pair = (doc.events[0], doc.events[1])
        a = render("necessity", doc, pair)
        b = render(SubTask.NECESSITY, doc, pair)
        assert a == b
        assert "Event 1: struck\nEvent 2: damage" in a.rendered
        assert doc.sentences[0] in a.rendered

    def test_braces_in_context_survive(self):
        d = Document("x", ("He wrote {event2} on the wall and left.",),
                     (EventMention("a", "wrote", 0), EventMention("b", "left", 0)))
        req = render("temporality", d, d.events)
        assert "He wrote {event2} on the wall" in req.rendered

    def test_inter_sentence_window(self, corpus6):
        d2 = corpus6[1]
        assert pair_context(d2, d2.events[0], d2.events[2]) == " ".join(d2.sentences)
        assert pair_context(d2, d2.events[1], d2.events[0]) == " ".join(d2.sentences[:2])

    def test_foreign_event_rejected(self, doc):
        stranger = EventMention("e1", "other", 0)
        with pytest.raises(InputError):
            render("temporality", doc, (stranger, doc.events[1]))

    def test_fill_single_pass(self):
        assert fill("{context}|{event1}", context="{event1}", event1="x", event2="y") == "{event1}|x"


class TestParseTriple:
    def test_canonical(self):
        raw = "Explanation: the quake came first.\nResult:\nBEFORE: 0.8\nAFTER: 0.1\nSIMULTANEOUS: 0.1"
        t, degraded = parse_triple("temporality", raw)
        assert t.as_tuple() == pytest.approx((0.8, 0.1, 0.1)) and not degraded

    def test_percentages(self):
        t, _ = parse_triple("necessity", "PRECONDITION: 70%\nREV_PRECONDITION: 10%\nNONE: 20%")
        assert t.as_tuple() == pytest.approx((0.7, 0.1, 0.2))

    def test_missing_label_counts_as_zero(self):
        t, _ = parse_triple("sufficiency", "SUFFICIENCY: 0.6\nNONE: 0.4")
        assert t.as_tuple() == pytest.approx((0.6, 0.0, 0.4))

    def test_renormalizes_unnormalized_answers(self):
        t, _ = parse_triple("temporality", "BEFORE: 8\nAFTER: 1\nSIMULTANEOUS: 1")
        assert t.as_tuple() == pytest.approx((0.8, 0.1, 0.1))

    def test_last_occurrence_wins(self):
        raw = "BEFORE: 0.2 AFTER: 0.8\nOn reflection:\nBEFORE: 0.9\nAFTER: 0.1\nSIMULTANEOUS: 0"
        t, _ = parse_triple("temporality", raw)
        assert t.as_tuple() == pytest.approx((0.9, 0.1, 0.0))

    def test_reverse_label_not_confused_with_forward(self):
        t, _ = parse_triple("necessity", "REV_PRECONDITION: 0.9\nNO_PRECONDITION: 0.1")
        assert t.as_tuple() == pytest.approx((0.0, 0.9, 0.1))

    @pytest.mark.parametrize("raw", [
        "**BEFORE**: 0.7, **AFTER**: 0.2, **SIMULTANEOUS**: 0.1",
        "- BEFORE (Event 1 first): 0.7\n- AFTER: 0.2\n- SIMULTANEOUS: 0.1",
        "[BEFORE]: [0.7]\n[AFTER]: [0.2]\n[SIMULTANEOUS]: [0.1]",
        '{"BEFORE": 0.7, "AFTER": 0.2, "SIMULTANEOUS": 0.1}',
        "before = 0.7; after = 0.2; simultaneous = 0.1",
        "BEFORE - confidence: 0.7\nAFTER - confidence: 0.2\nSIMULTANEOUS - confidence: 0.1",
    ])
    def test_formatting_variants(self, raw):
        t, _ = parse_triple("temporality", raw)
        assert t.as_tuple() == pytest.approx((0.7, 0.2, 0.1))

    def test_single_choice_is_one_hot(self):
        t, degraded = parse_triple("temporality", "Explanation: ...\nResult: [AFTER]")
        assert t == ProbTriple(0.0, 1.0, 0.0) and not degraded

    def test_vague_choice_is_uniform_and_degraded(self):
        assert parse_triple("temporality", "Result: [VAGUE]") == (UNIFORM, True)

    def test_dominant_vague_confidence(self):
        raw = "BEFORE: 0.2\nAFTER: 0.1\nSIMULTANEOUS: 0.1\nVAGUE: 0.6"
        assert parse_triple("temporality", raw) == (UNIFORM, True)

    def test_all_zero_confidences_degrade(self):
        assert parse_triple("temporality", "BEFORE: 0\nAFTER: 0\nSIMULTANEOUS: 0") == (UNIFORM, True)

    @pytest.mark.parametrize("raw", ["", "   ", "I cannot determine that."])
    def test_unparseable(self, raw):
        with pytest.raises(ParseFailure):
            parse_triple("temporality", raw)

    def test_aux_task_rejected(self):
        with pytest.raises(ValueError):
            parse_triple("dependency", "strong")


class TestParseAux:
    @pytest.mark.parametrize("raw,level", [
        ("Dependency: [strong]", "strong"),
        ("The dependency is medium.", "medium"),
        ("weak", "weak"),
        ("Answer: none", "none"),
        ("Although not strong, the dependency: weak", "weak"),
    ])
    def test_dependency(self, raw, level):
        assert parse_dependency(raw) is DependencyLevel(level)

    def test_dependency_failure(self):
        with pytest.raises(ParseFailure):
            parse_dependency("unclear")

    @pytest.mark.parametrize("raw,clues", [
        ("Causal Clues: [because, due to]", ["because", "due to"]),
        ("Causal Clues: None", []),
        ("None", []),
        ("[]", []),
        ('["led to"]', ["led to"]),
        ("Causal Clues:\n- caused", ["caused"]),
        ("Clue words: therefore; as a result", ["therefore", "as a result"]),
    ])
    def test_clues(self, raw, clues):
        assert parse_clues(raw) == clues

    def test_clue_failure(self):
        with pytest.raises(ParseFailure):
            parse_clues("Several words here suggest a link.\nBut I will not list them, sorry about that.")

    @pytest.mark.parametrize("raw,value", [
        ("Coreference: [YES]", True), ("Coreference: NO", False), ("no", False), ("True", True),
    ])
    def test_coreference(self, raw, value):
        assert parse_coreference(raw) is value

    def test_dispatch(self):
        assert parse("coreference", "YES") is True
        assert parse("dependency", "weak") is DependencyLevel.WEAK
        assert parse("causal_clue", "None") == []
        assert isinstance(parse("temporality", "BEFORE: 1"), ProbTriple)
        with pytest.raises(ParseFailure):
            parse("coreference", "")

    def test_task_partition(self):
        assert set(MAIN_TASKS) | set(AUX_TASKS) == set(SubTask)
        assert all(t.is_main for t in MAIN_TASKS) and not any(t.is_main for t in AUX_TASKS)


def _fixture_rows():
    import json
    from pathlib import Path
    path = Path(__file__).parent / "fixtures" / "responses.jsonl"
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


@pytest.mark.parametrize("row", _fixture_rows(), ids=lambda r: r["task"])
def test_response_fixture_values(row):
    task, raw, expect = SubTask(row["task"]), row["raw"], row["expect"]
    if expect is None:
        with pytest.raises(ParseFailure):
            parse(task, raw)
    elif task.is_main:
        triple, degraded = parse_triple(task, raw)
        if expect == "uniform":
            assert triple == UNIFORM and degraded
        else:
            assert triple.as_tuple() == pytest.approx(tuple(expect), abs=1e-9)
    else:
        got = parse(task, raw)
        assert getattr(got, "value", got) == expect
