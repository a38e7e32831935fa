import pytest

from kinject.errors import FormatVersionError
from kinject.vocab import (
    BOS,
    EOS,
    KNOWLEDGE_SEP,
    PAD,
    RESERVED,
    SPEAKER_SYSTEM,
    SPEAKER_USER,
    UNK,
    Vocab,
    build_vocab,
    load_vocab,
    save_vocab,
)


def small_vocab() -> Vocab:
    return Vocab(RESERVED + ["cat", "dog", "sat", "the"])


class TestReservedLayout:
    def test_control_ids_are_the_first_seven(self):
        assert [PAD, BOS, EOS, UNK, SPEAKER_USER, SPEAKER_SYSTEM,
                KNOWLEDGE_SEP] == [0, 1, 2, 3, 4, 5, 6]
        assert len(RESERVED) == 7

    def test_rejects_missing_reserved_prefix(self):
        with pytest.raises(FormatVersionError):
            Vocab(["cat", "dog", "sat", "the", "a", "b", "c", "d"])

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            Vocab(RESERVED + ["cat", "cat"])

    def test_requires_a_content_token(self):
        with pytest.raises(ValueError):
            Vocab(list(RESERVED))


class TestEncodeDecode:
    def test_round_trip(self):
        v = small_vocab()
        ids = v.encode("the cat sat")
        assert v.decode(ids) == "the cat sat"

    def test_unknown_words_map_to_unk(self):
        v = small_vocab()
        assert v.encode("the zebra") == [v.token_to_id["the"], UNK]

    def test_encode_normalizes_case_and_punctuation(self):
        v = small_vocab()
        assert v.encode("The CAT!") == v.encode("the cat")

    def test_decode_skips_specials_by_default(self):
        v = small_vocab()
        cat = v.token_to_id["cat"]
        assert v.decode([BOS, cat, EOS]) == "cat"
        assert v.decode([BOS, cat, EOS], skip_special=False) == "<bos> cat <eos>"

    def test_surface_text_stops_at_eos(self):
        v = small_vocab()
        cat, dog = v.token_to_id["cat"], v.token_to_id["dog"]
        assert v.surface_text([cat, EOS, dog]) == "cat"
        assert v.surface_text([SPEAKER_SYSTEM, cat, dog]) == "cat dog"


class TestBuildVocab:
    def test_collects_sorted_unique_tokens(self):
        v = build_vocab(["the cat", "the dog"])
        assert v.id_to_token[7:] == ["cat", "dog", "the"]

    def test_min_count_filters_rare_words(self):
        v = build_vocab(["the cat", "the dog"], min_count=2)
        assert v.id_to_token[7:] == ["the"]

    def test_len_counts_reserved(self):
        assert len(build_vocab(["cat"])) == 8


class TestSaveLoad:
    def test_round_trip(self, tmp_path):
        v = small_vocab()
        path = str(tmp_path / "vocab.txt")
        save_vocab(v, path)
        again = load_vocab(path)
        assert again.id_to_token == v.id_to_token

    def test_load_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("alpha\nbeta\ngamma\ndelta\ne\nf\ng\nh\n")
        with pytest.raises(FormatVersionError):
            load_vocab(str(path))
