import random

from autoarabic.arabic_text import (
    DIACRITICS,
    has_diacritics,
    normalize_for_compare,
    strip_diacritics,
    token_count,
    tokenize,
)

DIACRITIZED = "يضعُ الرَّجُلُ ذِرَاعَهُ الْيُسْرَى تحت ذِرَاعِهِ الْيُمْنَى."
PLAIN = "يضع الرجل ذراعه اليسرى تحت ذراعه اليمنى."


def test_strip_diacritics_full_sentence():
    assert strip_diacritics(DIACRITIZED) == PLAIN


def test_strip_removes_tatweel():
    assert strip_diacritics("يضـــع") == "يضع"


def test_strip_leaves_plain_text_alone():
    assert strip_diacritics(PLAIN) == PLAIN
    assert strip_diacritics("A man walks.") == "A man walks."
    assert strip_diacritics("") == ""


def test_has_diacritics():
    assert has_diacritics(DIACRITIZED)
    assert has_diacritics("زحفاً")
    assert not has_diacritics(PLAIN)
    assert not has_diacritics("hello")
    assert not has_diacritics("")


def test_strip_then_has_is_always_false():
    assert not has_diacritics(strip_diacritics(DIACRITIZED))


def test_diacritic_set_contents():
    assert "ً" in DIACRITICS  # fathatan
    assert "ْ" in DIACRITICS  # sukun
    assert "ٰ" in DIACRITICS  # dagger alef
    assert "ـ" in DIACRITICS  # tatweel
    assert "ا" not in DIACRITICS  # alef is a letter


def test_tokenize_plain_sentence():
    tokens = tokenize("يخرج الشخص من المشهد.")
    assert len(tokens) == 4
    assert tokens[-1] == "المشهد"


def test_tokenize_strips_edge_punctuation_only():
    tokens = tokenize('قال: "نعم"، (الآن)؟')
    assert tokens.tokens == ("قال", "نعم", "الآن")


def test_tokenize_keeps_interior_punctuation():
    assert tokenize("e.g. a-b").tokens == ("e.g", "a-b")


def test_tokenize_drops_punctuation_only_tokens():
    assert tokenize("! ، ؟").tokens == ()
    assert tokenize("").tokens == ()
    assert tokenize("   ").tokens == ()


def test_tokenize_english_with_quotes():
    tokens = tokenize("The words 'the gossip' are shown first.")
    assert len(tokens) == 7
    assert tokens[2] == "the"
    assert tokens[3] == "gossip"


def test_token_count_matches_tokenize():
    text = "تظهر كلمة \"النميمة\" أولاً."
    assert token_count(text) == len(tokenize(text))
    assert token_count(text) == 4


def test_tokenize_keeps_source():
    seq = tokenize("a b")
    assert seq.source == "a b"


def test_normalize_for_compare():
    assert normalize_for_compare("  يضعُ   الرَّجُلُ ") == "يضع الرجل"
    assert normalize_for_compare("\ta  b\n") == "a b"
    assert normalize_for_compare("") == ""
    assert normalize_for_compare(" ـ ") == ""


_LETTERS = "ابتثجحخدذرزسشصضطظعغفقكلمنهوي"
_MARKS = sorted(DIACRITICS - {"ـ"})


def _random_arabic(rng):
    words = []
    for _ in range(rng.randint(1, 10)):
        letters = [rng.choice(_LETTERS) for _ in range(rng.randint(1, 8))]
        word = ""
        for ch in letters:
            word += ch
            # Marks always attach to a base letter; bare marks are not a
            # shape that real text produces.
            if rng.random() < 0.3:
                word += rng.choice(_MARKS)
        words.append(word)
    return " ".join(words)


def test_strip_invariants_on_random_text():
    rng = random.Random(2601)
    for _ in range(2000):
        text = _random_arabic(rng)
        stripped = strip_diacritics(text)
        assert strip_diacritics(stripped) == stripped
        assert not has_diacritics(stripped)
        assert len(tokenize(text)) == len(tokenize(stripped))
        assert normalize_for_compare(text) == normalize_for_compare(stripped)
