import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from hyposcore.pinyin import (
    FINALS,
    INITIALS,
    BadToneDigit,
    EmptyFinal,
    InvariantViolation,
    LexiconParseError,
    Literal,
    PinyinError,
    RemainderNotAFinal,
    Syllable,
    UnknownCharacter,
    all_syllables,
    format_syllable,
    format_tokens,
    load_lexicon,
    normalize_reading,
    parse_syllable,
    transliterate,
)


def S(text):
    return parse_syllable(text)


def test_inventory_sizes():
    assert len(INITIALS) == 23
    assert len(FINALS) == 34
    assert len(set(FINALS)) == 34


@pytest.mark.parametrize("text, expected", [
    ("zhuo1", Syllable("zh", "uo", 1)),
    ("ni3", Syllable("n", "i", 3)),
    ("er2", Syllable(None, "er", 2)),
    ("shi4", Syllable("sh", "i", 4)),
    ("ci2", Syllable("c", "i", 2)),
    ("lüe4", Syllable("l", "üe", 4)),
    ("ju1", Syllable("j", "u", 1)),
    ("a", Syllable(None, "a", 5)),
])
def test_parse_syllable(text, expected):
    assert parse_syllable(text) == expected


@pytest.mark.parametrize("text, exc", [
    ("zq1", RemainderNotAFinal),
    ("zh1", EmptyFinal),
    ("", EmptyFinal),
    ("ma6", BadToneDigit),
    ("ma0", BadToneDigit),
    ("xyz3", RemainderNotAFinal),
])
def test_parse_syllable_errors(text, exc):
    with pytest.raises(exc):
        parse_syllable(text)


def test_missing_tone_strict():
    with pytest.raises(BadToneDigit):
        parse_syllable("ma", lenient=False)


def test_format_syllable():
    assert format_syllable(Syllable("zh", "uo", 1)) == "zhuo1"
    assert format_syllable(Syllable(None, "a", 5)) == "a5"


def test_syllable_rejects_bad_parts():
    with pytest.raises(InvariantViolation):
        Syllable("v", "a", 1)
    with pytest.raises(InvariantViolation):
        Syllable("b", "iou", 1)
    with pytest.raises(InvariantViolation):
        Syllable("b", "a", 0)


def test_roundtrip_full_space():
    space = all_syllables()
    assert len(space) == 24 * 34 * 5
    for s in space:
        assert parse_syllable(format_syllable(s)) == s


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyzü012345", max_size=8))
def test_fuzz_parse_stays_in_inventory(text):
    try:
        s = parse_syllable(text)
    except PinyinError:
        return
    assert s.initial is None or s.initial in INITIALS
    assert s.final in FINALS
    assert 1 <= s.tone <= 5
    if text[-1:].isdigit():
        assert format_syllable(s) == text


@pytest.mark.parametrize("raw, expected", [
    ("lv4", "lü4"),
    ("n2", "en2"),
    ("ń", "en2"),
    ("zhuō", "zhuo1"),
    ("lǜ", "lü4"),
    ("ma", "ma5"),
    ("NI3", "ni3"),
])
def test_normalize_reading(raw, expected):
    assert normalize_reading(raw) == expected


def write(tmp_path, text, name="lex.tsv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_lexicon_rows(tmp_path):
    lex = load_lexicon(write(tmp_path, "# comment\n你\tni3\n绿\tlv4,lu4\n都\tdou1,du1\n首\tshou3\n首都\tshou3,du1\n"))
    assert lex.char_readings["你"] == (Syllable("n", "i", 3),)
    assert lex.char_readings["绿"][0] == Syllable("l", "ü", 4)
    assert lex.phrase_readings["首都"] == (S("shou3"), S("du1"))
    assert lex.max_phrase_len == 2


def test_load_lexicon_later_row_wins(tmp_path, caplog):
    lex = load_lexicon(write(tmp_path, "都\tdu1\n都\tdou1\n"))
    assert lex.default("都") == S("dou1")
    assert "duplicate" in caplog.text


def test_load_lexicon_order_independent(tmp_path):
    rows = ["你\tni3", "好\thao3", "首\tshou3", "都\tdou1,du1", "首都\tshou3,du1"]
    a = load_lexicon(write(tmp_path, "\n".join(rows), "a.tsv"))
    b = load_lexicon(write(tmp_path, "\n".join(reversed(rows)), "b.tsv"))
    assert a == b


def test_load_lexicon_parse_error_has_line(tmp_path):
    with pytest.raises(LexiconParseError) as err:
        load_lexicon(write(tmp_path, "你\tni3\nbroken line\n"))
    assert err.value.lineno == 2


def test_load_lexicon_invariants(tmp_path):
    with pytest.raises(InvariantViolation, match="m2"):
        load_lexicon(write(tmp_path, "呣\tm2\n"))
    with pytest.raises(InvariantViolation, match="首都"):
        load_lexicon(write(tmp_path, "都\tdou1\n首都\tshou3,du1\n"))
    with pytest.raises(InvariantViolation):
        load_lexicon(write(tmp_path, "首\tshou3\n都\tdou1\n首都\tshou3\n"))


def test_bundled_lexicon_known_readings(lex):
    # rows checked by hand in data/chars.tsv and data/phrases.tsv
    assert lex.default("你") == S("ni3")
    assert lex.default("都") == S("dou1")
    assert lex.default("绿") == S("lü4")
    assert lex.default("嗯") == S("en2")
    assert lex.phrase_readings["首都"] == (S("shou3"), S("du1"))


def test_transliterate_examples(lex):
    assert transliterate("你", lex) == [S("ni3")]
    assert transliterate("", lex) == []
    assert transliterate("首都", lex) == [S("shou3"), S("du1")]
    assert transliterate("都", lex) == [S("dou1")]
    assert transliterate("首都", lex, "per_char") == [S("shou3"), S("dou1")]
    assert transliterate("A都", lex) == [Literal("A"), S("dou1")]


def test_transliterate_unknown_han(tmp_path):
    lex = load_lexicon(write(tmp_path, "你\tni3\n"))
    tally = Counter()
    assert transliterate("你好", lex, unknown=tally) == [S("ni3"), Literal("好")]
    assert tally == Counter({"好": 1})
    with pytest.raises(UnknownCharacter):
        transliterate("你好", lex, strict=True)
    # non-Han text never trips strict mode
    assert transliterate("OK", lex, strict=True) == [Literal("O"), Literal("K")]


def test_format_tokens(lex):
    assert format_tokens(transliterate("今天 天气很好！", lex)) == "jin1 tian1 tian1 qi4 hen3 hao3 ！"


_chars = None


def han_text():
    global _chars
    if _chars is None:
        from hyposcore.pinyin import default_lexicon
        rng = random.Random(7)
        lex = default_lexicon()
        pool = sorted(lex.char_readings)
        phrase_chars = sorted({c for p in list(lex.phrase_readings)[:3000] for c in p})
        _chars = "".join(rng.sample(pool, 200)) + "".join(phrase_chars[:300]) + "AB1 ，。𠀀"
    return st.text(alphabet=_chars, max_size=20)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_token_count_conservation(lex, data):
    text = data.draw(han_text())
    assert len(transliterate(text, lex, "contextual")) == len(text)
    assert len(transliterate(text, lex, "per_char")) == len(text)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_per_char_is_context_free(lex, data):
    a, b = data.draw(han_text()), data.draw(han_text())
    assert transliterate(a + b, lex, "per_char") == transliterate(a, lex, "per_char") + transliterate(b, lex, "per_char")


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_transliterate_deterministic(lex, data):
    text = data.draw(han_text())
    assert transliterate(text, lex) == transliterate(text, lex)
