import copy

from autoarabic.corpus import CaptionStatus, Corpus
from autoarabic.provider import MockTransport, ProviderClient, ProviderConfig
from autoarabic.translate import (
    PROMPT_TEMPLATE,
    build_prompt,
    strip_suffix_artifact,
    translate_corpus,
)
from conftest import make_caption

EXPECTED_TEMPLATE = (
    "You will receive an English sentence that \n"
    "serves as a caption for a short video clip. \n"
    "Your task is to translate this caption \n"
    "into Modern Standard Arabic while ensuring \n"
    "that the translation remains suitable  \n"
    "and appropriate as a caption.\n"
    "The English caption: {caption}\n"
    "Arabic caption:"
)


def make_client(**config_overrides):
    defaults = dict(model="m", temperature=0.7, top_p=1.0, max_attempts=2)
    defaults.update(config_overrides)
    return ProviderClient(
        MockTransport(seed=11), ProviderConfig(**defaults), sleep=lambda s: None
    )


def test_prompt_template_bytes_are_pinned():
    assert PROMPT_TEMPLATE == EXPECTED_TEMPLATE
    # Trailing spaces before the newlines are part of the contract.
    lines = PROMPT_TEMPLATE.split("\n")
    assert lines[0].endswith(" ")
    assert lines[4].endswith("  ")
    assert lines[5] == "and appropriate as a caption."


def test_build_prompt_substitutes_caption():
    prompt = build_prompt("A dog runs across the yard.")
    assert "The English caption: A dog runs across the yard.\n" in prompt
    assert prompt.endswith("Arabic caption:")
    assert "{caption}" not in prompt


def test_build_prompt_leaves_braces_in_caption_alone():
    assert "The English caption: a {b} c\n" in build_prompt("a {b} c")


def test_suffix_removed_at_end_keeping_punctuation():
    cleaned, removed = strip_suffix_artifact("الفتاة تبدأ بالتحدث باللغة العربية.")
    assert removed
    assert cleaned == "الفتاة تبدأ بالتحدث."


def test_suffix_removed_without_punctuation():
    cleaned, removed = strip_suffix_artifact("يتحدث الرجل باللغة العربية")
    assert removed
    assert cleaned == "يتحدث الرجل"


def test_suffix_mid_sentence_is_kept():
    text = "كتاب باللغة العربية على الطاولة."
    cleaned, removed = strip_suffix_artifact(text)
    assert not removed
    assert cleaned == text


def test_suffix_only_text_is_left_alone():
    text = "باللغة العربية."
    cleaned, removed = strip_suffix_artifact(text)
    assert not removed
    assert cleaned == text


def test_no_suffix_no_change():
    cleaned, removed = strip_suffix_artifact("يجري الكلب.")
    assert not removed
    assert cleaned == "يجري الكلب."


def _fresh_corpus(n=6):
    corpus = Corpus()
    for i in range(n):
        corpus.add(
            make_caption(
                cid=f"v{i:02d}#0-0#0",
                video=f"v{i:02d}",
                source=f"Someone does thing number {i}.",
            )
        )
    return corpus


def test_translate_corpus_moves_pending_to_translated():
    corpus = _fresh_corpus()
    report = translate_corpus(corpus, make_client())
    assert report.translated == 6
    assert report.failed == 0
    for rec in corpus.captions():
        assert rec.status is CaptionStatus.TRANSLATED
        assert rec.raw_translation
        assert rec.current_text is None
        assert rec.history == []


def test_translate_skips_non_pending():
    corpus = _fresh_corpus(3)
    translate_corpus(corpus, make_client())
    report = translate_corpus(corpus, make_client())
    assert report.translated == 0
    assert report.skipped == 3


def test_translate_never_touches_source_or_moments():
    corpus = _fresh_corpus(4)
    before = {
        r.caption_id: (r.source_text, r.moment, copy.deepcopy(r.history))
        for r in corpus.captions()
    }
    translate_corpus(corpus, make_client())
    for rec in corpus.captions():
        source, moment, history = before[rec.caption_id]
        assert rec.source_text == source
        assert rec.moment == moment
        assert rec.history == history


def test_translate_failure_keeps_caption_pending():
    corpus = _fresh_corpus(3)
    client = ProviderClient(
        MockTransport(seed=1, fail_times=2),
        ProviderConfig(model="m", temperature=0.7, max_attempts=1),
        sleep=lambda s: None,
    )
    report = translate_corpus(corpus, client)
    assert report.failed == 2
    assert report.translated == 1
    assert len(report.failed_ids) == 2
    failed = corpus.get(report.failed_ids[0])
    assert failed.status is CaptionStatus.PENDING
    assert "translation failed" in failed.error_note

    # The rerun picks up exactly the failed ones.
    rerun = translate_corpus(corpus, make_client())
    assert rerun.translated == 2
    assert rerun.skipped == 1
    assert all(r.error_note is None for r in corpus.captions())


def test_translate_is_deterministic_for_a_seed():
    texts = []
    for _ in range(2):
        corpus = _fresh_corpus()
        translate_corpus(corpus, make_client())
        texts.append([r.raw_translation for r in corpus.captions()])
    assert texts[0] == texts[1]


def test_translate_appends_checkpoints(tmp_path):
    from autoarabic.corpus import CorpusStore, load, store

    corpus = _fresh_corpus(4)
    path = tmp_path / "c.txt"
    writer = store(corpus, path)
    translate_corpus(corpus, make_client(), store=writer)
    # Without a fresh snapshot the appended lines alone must already carry
    # every translation.
    loaded = load(path)
    assert all(r.status is CaptionStatus.TRANSLATED for r in loaded.captions())


def test_suffix_removal_applied_and_counted():
    corpus = Corpus()
    corpus.add(make_caption(source="The girl starts speaking."))
    transport = MockTransport(
        responses={
            build_prompt("The girl starts speaking."): "الفتاة تبدأ بالتحدث باللغة العربية."
        }
    )
    client = ProviderClient(
        transport, ProviderConfig(model="m", temperature=0.7), sleep=lambda s: None
    )
    report = translate_corpus(corpus, client)
    assert report.suffix_removed == 1
    assert corpus.captions()[0].raw_translation == "الفتاة تبدأ بالتحدث."
