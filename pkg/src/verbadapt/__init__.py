"""Verb-class knowledge for event extraction.

Pipeline: extract same-class verb pairs from a lexicon, train bottleneck
adapters inside a transformer encoder to recognize them (against controlled
and random negatives), fine-tune the adapted encoder on event extraction
tasks, and optionally transfer the constraints to another language by
nearest-neighbour translation plus learned noise filtering.
"""

from .lexicon import (
    ConstraintSet,
    LexiconError,
    LexiconParseError,
    VerbLexicon,
    VerbPair,
    generate_positive_pairs,
    lexicon_stats,
    load_lexicon,
    normalize_lemma,
)
from .embeddings import (
    EmbeddingError,
    EmbeddingSpace,
    cosine,
    load_embeddings_text,
    nearest_neighbor,
)
from .sampling import (
    SamplingConfig,
    SamplingError,
    TrainingBatch,
    batch_stream,
    build_training_batch,
    epoch_batches,
)
from .encoder import (
    Adapter,
    AdapterStack,
    Encoder,
    EncoderConfig,
    EncoderError,
    WordPieceTokenizer,
    build_tiny_desk_encoder,
    insert_adapters,
    load_adapter_checkpoint,
    load_encoder,
    parameter_digest,
    remove_verb_adapters,
    save_adapter_checkpoint,
    save_encoder,
    set_freezing,
    stack_task_adapter,
    trainable_parameter_count,
)
from .pair_task import (
    PairClassifier,
    TrainingError,
    VerbTrainConfig,
    classify_pair,
    pair_accuracy,
    train_verb_adapter,
)
from .crf import CrfLayer, build_bio_transition_mask
from .events import (
    EventDataError,
    EventDataset,
    EventTrainConfig,
    CrfSequenceHead,
    Sentence,
    TokenClassificationHead,
    decode_bio_spans,
    finetune_event_model,
    load_conll,
)
from .metrics import (
    EventAnnotation,
    MetricsError,
    ScoreReport,
    TTestResult,
    ace_span_f1,
    paired_t_test,
    token_f1,
)
from .transfer import (
    AlignedSpacePair,
    StmModel,
    StmTrainConfig,
    TransferError,
    run_vtrans,
    stm_filter,
    train_stm,
    translate_pairs,
)
from .manifest import config_hash, derive_seeds, file_sha256, read_manifest, start_run, write_manifest

__version__ = "0.1.0"

__all__ = [
    "Adapter", "AdapterStack", "AlignedSpacePair", "ConstraintSet", "CrfLayer",
    "CrfSequenceHead", "EmbeddingError", "EmbeddingSpace", "Encoder", "EncoderConfig",
    "EncoderError", "EventAnnotation", "EventDataError", "EventDataset", "EventTrainConfig",
    "LexiconError", "LexiconParseError", "MetricsError", "PairClassifier", "SamplingConfig",
    "SamplingError", "ScoreReport", "Sentence", "StmModel", "StmTrainConfig",
    "TTestResult", "TokenClassificationHead", "TrainingBatch", "TrainingError",
    "TransferError", "VerbLexicon", "VerbPair", "VerbTrainConfig", "WordPieceTokenizer",
    "ace_span_f1", "batch_stream", "build_bio_transition_mask", "build_tiny_desk_encoder",
    "build_training_batch", "classify_pair", "config_hash", "cosine", "decode_bio_spans",
    "derive_seeds", "epoch_batches", "file_sha256", "finetune_event_model",
    "generate_positive_pairs", "insert_adapters", "lexicon_stats", "load_adapter_checkpoint",
    "load_conll", "load_embeddings_text", "load_encoder", "load_lexicon", "nearest_neighbor",
    "normalize_lemma", "pair_accuracy", "paired_t_test", "parameter_digest", "read_manifest",
    "remove_verb_adapters", "run_vtrans", "save_adapter_checkpoint", "save_encoder",
    "set_freezing", "stack_task_adapter", "start_run", "stm_filter", "token_f1",
    "train_stm", "train_verb_adapter", "trainable_parameter_count", "translate_pairs",
    "write_manifest",
]
