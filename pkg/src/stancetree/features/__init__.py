from .embeddings import (
    EmbeddingConfig,
    EmbeddingProvider,
    average_embedding,
    load_embeddings,
    train_embeddings,
)
from .extract import FeatureExtractor, FeatureVector, Standardizer, extract_features
from .pos import DEFAULT_TAGSET, PosTagger, RuleTagger, SidecarTagger, pos_counts
from .text import (
    NEGATION_WORDS,
    TokenList,
    content_format_features,
    load_lexicon,
    negation_flag,
    punctuation_features,
    swear_flag,
    tokenize,
    tweet_format_features,
)
