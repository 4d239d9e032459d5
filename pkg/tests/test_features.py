import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stancetree.conversation import Tweet
from stancetree.features import (
    DEFAULT_TAGSET,
    EmbeddingConfig,
    EmbeddingProvider,
    FeatureExtractor,
    RuleTagger,
    SidecarTagger,
    Standardizer,
    average_embedding,
    content_format_features,
    extract_features,
    load_embeddings,
    load_lexicon,
    negation_flag,
    pos_counts,
    punctuation_features,
    swear_flag,
    tokenize,
    train_embeddings,
    tweet_format_features,
)
from stancetree.features.embeddings import EmptyCorpus, InconsistentDimension, MalformedLine
from stancetree.features.extract import binary_mask
from stancetree.features.text import LexiconMissing

from conftest import thread_tweets

U = {t.id: t for t in thread_tweets()}


def test_tokenize():
    assert tokenize("hello world").tokens == ("hello", "world")
    tl = tokenize("@u1 Apparently a hoax.")
    assert tl.tokens == ("@u1", "Apparently", "a", "hoax.")
    assert tl.normalized == ("@u1", "apparently", "a", "hoax")
    assert tokenize("").tokens == ()
    assert tokenize("see https://t.co/AbC #Tag!").normalized == ("see", "https://t.co/abc", "#tag")
    assert tokenize("don’t").normalized == ("don't",)


def test_negation():
    assert negation_flag(tokenize(U["u4"].text)) == 1
    assert negation_flag(tokenize("ok, thanks.")) == 0
    assert negation_flag(tokenize(U["u6"].text)) == 0
    assert negation_flag(tokenize("NOT true")) == 1


def test_swear(tmp_path):
    assert swear_flag(tokenize("anything at all"), set()) == 0
    assert swear_flag(tokenize("oh darn"), {"darn"}) == 1
    assert swear_flag(tokenize("Darn!"), {"darn"}) == 1
    p = tmp_path / "lex.txt"
    p.write_text("# comment\nDarn\n\nheck  # inline\n", encoding="utf-8")
    assert load_lexicon(p) == {"darn", "heck"}
    with pytest.raises(LexiconMissing):
        load_lexicon(tmp_path / "missing.txt")


def test_content_format():
    length, ratio, wc = content_format_features("AbC")
    assert (length, wc) == (3, 1) and ratio == pytest.approx(2 / 3)
    assert content_format_features("1234 !!")[1] == 0.0
    assert content_format_features(U["u2"].text)[2] == 9


def test_punctuation():
    assert punctuation_features("Apparently a hoax. Best to take Tweet down.") == (0, 0, 1)
    assert punctuation_features(U["u2"].text) == (0, 0, 1)
    assert punctuation_features("really?!") == (1, 1, 0)
    assert punctuation_features("") == (0, 0, 0)


def test_tweet_format():
    url, pic, src = tweet_format_features(U["u1"])
    assert (pic, src) == (1, 1)
    assert tweet_format_features(Tweet("r", "no links here", parent_id="x")) == (0, 0, 0)
    url, pic, _ = tweet_format_features(Tweet("r", "see https://t.co/x"))
    assert (url, pic) == (1, 0)
    assert tweet_format_features(Tweet("r", "look pic.twitter.com/abc", parent_id="x"))[1] == 1
    assert tweet_format_features(Tweet("r", "https://twitter.com/a/status/1/photo/1"))[:2] == (1, 1)
    assert tweet_format_features(Tweet("r", "pic.twitter.com/a", has_picture_metadata=False))[1] == 0


def test_pos_counts():
    tagger = RuleTagger()
    assert len(tagger.tagset) == 12
    assert not pos_counts(tokenize(""), tagger).any()
    counts = pos_counts(tokenize("@u1 ok, thanks."), tagger)
    assert counts[DEFAULT_TAGSET.index("MENTION")] == 1
    assert counts.sum() == 3
    assert counts[DEFAULT_TAGSET.index("ADV")] == 1  # ok
    assert counts[DEFAULT_TAGSET.index("NOUN")] == 1  # thanks


@settings(max_examples=100, deadline=None)
@given(st.text(max_size=80))
def test_pos_counts_sum_to_token_count(text):
    tl = tokenize(text)
    assert pos_counts(tl, RuleTagger()).sum() == len(tl)


def test_sidecar_tagger(tmp_path):
    p = tmp_path / "pos.tsv"
    p.write_text("t1\tN V\nt2\tN\n", encoding="utf-8")
    tagger = SidecarTagger.from_file(p, tagset=["N", "V", "X"])
    assert pos_counts(tokenize("dogs bark"), tagger, "t1").tolist() == [1, 1, 0]
    with pytest.raises(Exception):
        pos_counts(tokenize("three tokens here"), tagger, "t1")


def test_average_embedding():
    prov = EmbeddingProvider.from_mapping({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    assert average_embedding(tokenize("a b"), prov).tolist() == [0.5, 0.5]
    assert average_embedding(tokenize("zzz qqq"), prov).tolist() == [0.0, 0.0]
    prov2 = EmbeddingProvider.from_mapping({"a": [2.0, 4.0]})
    assert average_embedding(tokenize("a OOV a"), prov2).tolist() == [2.0, 4.0]
    assert prov2.get("oov") is None


def test_embedding_file_round_trip(tmp_path):
    prov = EmbeddingProvider.from_mapping({"x": [0.1, -2.5, 3e-17], "y": [1.0, 2.0, 3.0]})
    prov.save(tmp_path / "v.txt")
    back = load_embeddings(tmp_path / "v.txt")
    assert back.words == prov.words and np.array_equal(back.matrix, prov.matrix)
    (tmp_path / "bad.txt").write_text("x 1.0 2.0\ny 1.0\n")
    with pytest.raises(InconsistentDimension):
        load_embeddings(tmp_path / "bad.txt")
    (tmp_path / "bad2.txt").write_text("x 1.0 abc\n")
    with pytest.raises(MalformedLine):
        load_embeddings(tmp_path / "bad2.txt")
    (tmp_path / "hdr.txt").write_text("2 2\nx 1 2\ny 3 4\n")
    assert load_embeddings(tmp_path / "hdr.txt").dimension == 2


def _shooting_corpus():
    rng = np.random.default_rng(0)
    ctx = "police report gunfire downtown near parliament witnesses heard".split()
    other = "eat fresh fruit salad breakfast kitchen sweet yellow".split()
    sents = []
    for _ in range(150):
        for target in ("shooting", "shooter"):
            words = list(rng.choice(ctx, 4)) + [target] + list(rng.choice(ctx, 4))
            sents.append(" ".join(words))
        words = list(rng.choice(other, 4)) + ["banana"] + list(rng.choice(other, 4))
        sents.append(" ".join(words))
    return [tokenize(s) for s in sents]


def test_embeddings_learn_shared_contexts():
    prov = train_embeddings(_shooting_corpus(), 25, EmbeddingConfig(seed=1))
    assert prov.dimension == 25
    assert prov.cosine("shooting", "shooter") > prov.cosine("shooting", "banana")


def test_embeddings_deterministic_and_min_count():
    corpus = _shooting_corpus()[:30] + [tokenize("hapax")]
    a = train_embeddings(corpus, 8, EmbeddingConfig(seed=5, epochs=2))
    b = train_embeddings(corpus, 8, EmbeddingConfig(seed=5, epochs=2))
    assert a.words == b.words and np.array_equal(a.matrix, b.matrix)
    assert "hapax" not in a
    assert all(len(a.get(w)) == 8 for w in a.words)
    with pytest.raises(EmptyCorpus):
        train_embeddings([tokenize("")], 8)


def _extractor(dim=300, tagger=None):
    rng = np.random.default_rng(0)
    prov = EmbeddingProvider(["soldiers", "hoax"], rng.normal(size=(2, dim)))
    return FeatureExtractor(prov, tagger or RuleTagger(), frozenset({"darn"}))


class TwelveTagTagger:
    tagset = tuple(f"T{i}" for i in range(12))

    def tag(self, tokens, tweet_id=None):
        return ["T0"] * len(tokens)


def test_feature_width_and_layout():
    ex = _extractor(300, TwelveTagTagger())
    assert ex.width == 300 + 12 + 2 + 3 + 3 + 3 == 323
    fv = extract_features(U["u2"], ex)
    assert fv.values.shape == (323,)
    assert fv.block("period").tolist() == [1.0]
    assert fv.block("is_source").tolist() == [0.0]
    assert fv.block("word_count").tolist() == [9.0]


def test_empty_tweet_features():
    ex = _extractor(5)
    fv = ex.extract(Tweet("e", "", parent_id="p"))
    assert not fv.values.any()
    src = ex.extract(Tweet("e", ""))
    assert src.block("is_source").tolist() == [1.0]
    assert np.count_nonzero(src.values) == 1


def test_extraction_is_pure():
    ex = _extractor(10)
    for t in U.values():
        assert np.array_equal(ex.extract(t).values, ex.extract(t).values)


def test_binary_and_ratio_ranges():
    ex = _extractor(4)
    X = ex.matrix(list(U.values()))
    mask = binary_mask(ex.layout)
    assert mask.sum() == 8
    assert set(np.unique(X[:, mask])) <= {0.0, 1.0}
    ratio = X[:, [i for i, (n, _) in enumerate(_expand(ex.layout)) if n == "capital_ratio"]]
    assert np.all((ratio >= 0) & (ratio <= 1))


def _expand(layout):
    return [(n, k) for n, w in layout for k in range(w)]


def test_standardizer():
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.normal(5, 3, 200), rng.integers(0, 2, 200), np.full(200, 7.0),
                         rng.exponential(2, 200)])
    binary = np.array([False, True, False, False])
    st_ = Standardizer.fit(X, binary)
    Z = st_.transform(X)
    assert np.all(np.abs(Z[:, [0, 2, 3]].mean(axis=0)) <= 1e-9)
    assert np.all(np.abs(Z[:, [0, 3]].var(axis=0) - 1) <= 1e-6)
    assert np.array_equal(Z[:, 1], X[:, 1])
    # test rows use training statistics unchanged
    X2 = X[:10] + 100
    assert np.allclose(st_.transform(X2)[:, 0], (X2[:, 0] - X[:, 0].mean()) / X[:, 0].std())
