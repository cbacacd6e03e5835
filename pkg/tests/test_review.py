import pytest

from autoarabic.corpus import (
    CaptionStatus,
    Corpus,
    CorpusValidationError,
    ErrorCategory,
    FlagRecord,
)
from autoarabic.review import (
    Budget,
    ReviewConflict,
    approve,
    build_queue,
    materialize,
    parse_budget,
    render_materialized,
    submit_edit,
    suggested_fix,
)
from conftest import FIXED_TS, make_caption, make_edit


def test_parse_budget():
    assert parse_budget("zero") is Budget.ZERO
    assert parse_budget("FEW") is Budget.FEW
    assert parse_budget(Budget.FULL) is Budget.FULL
    with pytest.raises(CorpusValidationError, match="budget"):
        parse_budget("half")


def _scenario_corpus():
    """A: flagged+edited, B: clean but edited, C: flagged unedited, D: clean."""
    corpus = Corpus()
    a = make_caption(
        cid="a#0-0#0", video="a", source="The camera moves.",
        raw="تتحرك الكاميرا.", status=CaptionStatus.FLAGGED,
        flags=(ErrorCategory.LOANWORD,),
    )
    corpus.add(a)
    corpus.set_flags(
        FlagRecord(
            caption_id="a#0-0#0",
            categories={ErrorCategory.LOANWORD},
            sources={ErrorCategory.LOANWORD: "rule"},
            created_at=FIXED_TS,
        )
    )
    b = make_caption(
        cid="b#0-0#0", video="b", source="A dog runs.",
        raw="يجري كلب.", status=CaptionStatus.TRANSLATED,
    )
    corpus.add(b)
    corpus.set_flags(FlagRecord(caption_id="b#0-0#0", created_at=FIXED_TS))
    c = make_caption(
        cid="c#0-0#0", video="c", source="A child waves.",
        raw="يلوحُ طفل.", status=CaptionStatus.FLAGGED,
        flags=(ErrorCategory.DIACRITICS,),
    )
    corpus.add(c)
    corpus.set_flags(
        FlagRecord(
            caption_id="c#0-0#0",
            categories={ErrorCategory.DIACRITICS},
            sources={ErrorCategory.DIACRITICS: "rule"},
            created_at=FIXED_TS,
        )
    )
    d = make_caption(
        cid="d#0-0#0", video="d", source="Someone sits.",
        raw="يجلس شخص.", status=CaptionStatus.TRANSLATED,
    )
    corpus.add(d)
    corpus.set_flags(FlagRecord(caption_id="d#0-0#0", created_at=FIXED_TS))
    corpus.add(make_caption(cid="e#0-0#0", video="e", source="Pending."))

    submit_edit(
        corpus, "a#0-0#0", "تتحرك آلة التصوير.", ("loanword",), "ann-1", 0, FIXED_TS
    )
    submit_edit(corpus, "b#0-0#0", "يركض كلب.", ("lexical",), "ann-1", 0, FIXED_TS)
    return corpus


def test_queue_zero_is_empty():
    assert build_queue(_scenario_corpus(), "zero") == []


def test_queue_few_only_flag_set():
    tasks = build_queue(_scenario_corpus(), "few")
    by_id = {t.caption_id: t for t in tasks}
    assert set(by_id) == {"a#0-0#0", "c#0-0#0"}
    assert by_id["a#0-0#0"].state == "done"
    assert by_id["c#0-0#0"].state == "open"


def test_queue_full_everything_translated():
    tasks = build_queue(_scenario_corpus(), "full")
    assert [t.caption_id for t in tasks] == [
        "a#0-0#0",  # flagged first
        "c#0-0#0",
        "b#0-0#0",
        "d#0-0#0",
    ]
    states = {t.caption_id: t.state for t in tasks}
    assert states == {
        "a#0-0#0": "done",
        "b#0-0#0": "done",
        "c#0-0#0": "open",
        "d#0-0#0": "open",
    }


def test_queue_task_carries_context():
    tasks = build_queue(_scenario_corpus(), "few")
    task = next(t for t in tasks if t.caption_id == "c#0-0#0")
    assert task.flags == ["diacritics"]
    assert task.flag_sources == {"diacritics": "rule"}
    assert task.version == 0
    assert task.suggested_fix == "يلوح طفل."
    assert task.source_text == "A child waves."


def test_suggested_fix_only_for_pure_diacritics():
    corpus = _scenario_corpus()
    c = corpus.get("c#0-0#0")
    assert (
        suggested_fix(c, corpus.flag_records["c#0-0#0"]) == "يلوح طفل."
    )
    a = corpus.get("a#0-0#0")
    assert suggested_fix(a, corpus.flag_records["a#0-0#0"]) is None
    mixed = make_caption(
        cid="m#0-0#0", video="m", raw="نصٌ كاميرا.",
        status=CaptionStatus.FLAGGED,
        flags=(ErrorCategory.DIACRITICS, ErrorCategory.LOANWORD),
    )
    assert suggested_fix(mixed, None) is None


def test_suggested_fix_none_when_nothing_changes():
    rec = make_caption(
        cid="p#0-0#0", video="p", raw="نص عادي.",
        status=CaptionStatus.FLAGGED, flags=(ErrorCategory.DIACRITICS,),
    )
    assert suggested_fix(rec, None) is None


def test_suggested_fix_none_on_parse_error():
    rec = make_caption(
        cid="q#0-0#0", video="q", raw="نصٌ.", status=CaptionStatus.FLAGGED,
        flags=(ErrorCategory.DIACRITICS,),
    )
    fr = FlagRecord(
        caption_id="q#0-0#0",
        categories={ErrorCategory.DIACRITICS},
        judge_parse_error=True,
        created_at=FIXED_TS,
    )
    assert suggested_fix(rec, fr) is None


def test_submit_edit_happy_path():
    corpus = _scenario_corpus()
    rec = submit_edit(
        corpus, "c#0-0#0", "يلوح طفل.", ("diacritics",), "ann-2", 0, FIXED_TS
    )
    assert rec.status is CaptionStatus.EDITED
    assert rec.current_text == "يلوح طفل."
    assert len(rec.history) == 1
    assert rec.history[0].before == "يلوحُ طفل."
    assert rec.history[0].categories == (ErrorCategory.DIACRITICS,)
    # Second edit stacks on the first.
    rec = submit_edit(
        corpus, "c#0-0#0", "يلوح الطفل.", (), "ann-2", 1, FIXED_TS
    )
    assert len(rec.history) == 2
    assert rec.history[1].before == "يلوح طفل."


def test_submit_edit_stale_version_conflict():
    corpus = _scenario_corpus()
    with pytest.raises(ReviewConflict) as exc:
        submit_edit(corpus, "a#0-0#0", "نص آخر.", (), "ann-1", 0, FIXED_TS)
    assert exc.value.current_version == 1


def test_submit_edit_rejects_empty_text():
    corpus = _scenario_corpus()
    for text in ("", "   ", " ـ "):
        with pytest.raises(CorpusValidationError, match="empty"):
            submit_edit(corpus, "c#0-0#0", text, (), "ann-1", 0, FIXED_TS)


def test_submit_edit_requires_annotator():
    corpus = _scenario_corpus()
    with pytest.raises(CorpusValidationError, match="annotator"):
        submit_edit(corpus, "c#0-0#0", "نص.", (), "", 0, FIXED_TS)


def test_submit_edit_unknown_category():
    corpus = _scenario_corpus()
    with pytest.raises(CorpusValidationError, match="grammar"):
        submit_edit(corpus, "c#0-0#0", "نص.", ("grammar",), "ann-1", 0, FIXED_TS)


def test_submit_edit_on_pending_rejected():
    corpus = _scenario_corpus()
    with pytest.raises(CorpusValidationError, match="not translated"):
        submit_edit(corpus, "e#0-0#0", "نص.", (), "ann-1", 0, FIXED_TS)


def test_submit_edit_on_approved_conflicts():
    corpus = _scenario_corpus()
    approve(corpus, "d#0-0#0", "ann-1", 0, FIXED_TS)
    with pytest.raises(ReviewConflict, match="approved"):
        submit_edit(corpus, "d#0-0#0", "نص.", (), "ann-1", 1, FIXED_TS)


def test_approve_appends_zero_diff_event():
    corpus = _scenario_corpus()
    rec = approve(corpus, "d#0-0#0", "ann-3", 0, FIXED_TS)
    assert rec.status is CaptionStatus.APPROVED
    assert len(rec.history) == 1
    event = rec.history[0]
    assert event.before == event.after == "يجلس شخص."
    assert event.categories == ()
    assert event.annotator_id == "ann-3"


def test_approve_twice_is_noop_with_warning(caplog):
    corpus = _scenario_corpus()
    approve(corpus, "d#0-0#0", "ann-3", 0, FIXED_TS)
    with caplog.at_level("WARNING"):
        rec = approve(corpus, "d#0-0#0", "ann-3", 1, FIXED_TS)
    assert rec.status is CaptionStatus.APPROVED
    assert len(rec.history) == 1
    assert any("already approved" in r.message for r in caplog.records)


def test_approve_stale_version_conflict():
    corpus = _scenario_corpus()
    with pytest.raises(ReviewConflict):
        approve(corpus, "a#0-0#0", "ann-1", 0, FIXED_TS)


def test_approve_pending_rejected():
    corpus = _scenario_corpus()
    with pytest.raises(CorpusValidationError, match="untranslated"):
        approve(corpus, "e#0-0#0", "ann-1", 0, FIXED_TS)


def test_materialize_budget_semantics():
    corpus = _scenario_corpus()
    zero = materialize(corpus, "zero")
    few = materialize(corpus, "few")
    full = materialize(corpus, "full")

    assert list(zero) == ["a#0-0#0", "b#0-0#0", "c#0-0#0", "d#0-0#0"]
    assert zero["a#0-0#0"] == "تتحرك الكاميرا."
    assert zero["b#0-0#0"] == "يجري كلب."

    # few: the flagged-and-edited caption changes, the out-of-budget edit
    # on b does not.
    assert few["a#0-0#0"] == "تتحرك آلة التصوير."
    assert few["b#0-0#0"] == "يجري كلب."
    assert few["c#0-0#0"] == "يلوحُ طفل."

    assert full["a#0-0#0"] == "تتحرك آلة التصوير."
    assert full["b#0-0#0"] == "يركض كلب."
    assert full["c#0-0#0"] == "يلوحُ طفل."
    assert full["d#0-0#0"] == "يجلس شخص."


def test_materialize_excludes_pending():
    corpus = _scenario_corpus()
    assert "e#0-0#0" not in materialize(corpus, "full")


def test_budget_difference_sets_nest():
    corpus = _scenario_corpus()
    zero = materialize(corpus, "zero")
    few = materialize(corpus, "few")
    full = materialize(corpus, "full")
    diff_few = {cid for cid in zero if few[cid] != zero[cid]}
    diff_full = {cid for cid in zero if full[cid] != zero[cid]}
    assert diff_few <= diff_full
    assert diff_few == {"a#0-0#0"}
    assert diff_full == {"a#0-0#0", "b#0-0#0"}


def test_render_materialized_shape():
    corpus = _scenario_corpus()
    payload = render_materialized(corpus, "few")
    lines = payload.splitlines()
    assert lines[0] == "AUTOARABIC-CORPUS v1"
    assert len(lines) == 5  # header + 4 captions, pending excluded
    assert payload.endswith("\n")
    import json

    rows = [json.loads(line) for line in lines[1:]]
    by_id = {r["caption_id"]: r for r in rows}
    assert by_id["a#0-0#0"]["current_text"] == "تتحرك آلة التصوير."
    assert by_id["b#0-0#0"]["current_text"] == "يجري كلب."
    # Stored history still shows what actually happened.
    assert len(by_id["b#0-0#0"]["history"]) == 1
    assert by_id["a#0-0#0"]["status"] == "edited"


def test_render_materialized_zero_restores_raw():
    corpus = _scenario_corpus()
    import json

    rows = [
        json.loads(line)
        for line in render_materialized(corpus, "zero").splitlines()[1:]
    ]
    for row in rows:
        assert row["current_text"] == row["raw_translation"]
