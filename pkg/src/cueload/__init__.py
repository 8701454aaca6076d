"""cueload: cognitive-load cue quantification for explanation dialogues.

The toolkit ingests annotated dialogue transcripts (CoNLL-U), gaze label
streams and understanding-state annotations; quantifies information value,
gaze entropy, syntactic complexity and dependency length per annotated
context window; tests the cues across the four understanding states
(Kruskal-Wallis + Dunn); and trains/evaluates multi-class classifiers over
text features and cues.
"""

from .corpus import (
    ContextWindow,
    GazeSample,
    STATES,
    Token,
    UnderstandingAnnotation,
    Utterance,
    build_context_windows,
    parse_annotations,
    parse_conllu,
    parse_gaze,
)
from .lm import (
    NGramModel,
    gaze_entropy,
    import_gaze_logprobs,
    import_logprobs,
    information_value,
    train_gaze_ngram,
    train_word_ngram,
)
from .pipeline import FeatureRecord, impute_missing, minmax_normalize, quantify
from .stats import dunn_posthoc, kruskal_wallis
from .syntax import (
    average_dependency_length,
    syntactic_complexity,
    tree_stats,
    window_syntax_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "ContextWindow",
    "FeatureRecord",
    "GazeSample",
    "NGramModel",
    "STATES",
    "Token",
    "UnderstandingAnnotation",
    "Utterance",
    "average_dependency_length",
    "build_context_windows",
    "dunn_posthoc",
    "gaze_entropy",
    "import_gaze_logprobs",
    "import_logprobs",
    "impute_missing",
    "information_value",
    "kruskal_wallis",
    "minmax_normalize",
    "parse_annotations",
    "parse_conllu",
    "parse_gaze",
    "quantify",
    "syntactic_complexity",
    "train_gaze_ngram",
    "train_word_ngram",
    "tree_stats",
    "window_syntax_metrics",
]
