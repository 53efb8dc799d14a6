"""Fine-grained entity typing with commonness-based entity linking features."""

from .corpus import EmbeddingTable, MentionExample, load_dataset, load_embeddings, split_dev
from .entity_linker import LinkResult, link_in_document, link_mention
from .evaluation import EvalReport, evaluate, macro_f1, micro_f1, strict_accuracy
from .knowledge_base import AnchorStatistics, EntityRecord, KnowledgeBase, load_snapshot, save_snapshot
from .model import ModelConfig, TypingModel, decode_prediction, load_checkpoint, save_checkpoint
from .training import TrainingConfig, hinge_loss, train
from .type_system import KbTypeMapping, TypePath, TypeVocabulary, parse_type_path

__version__ = "0.1.0"
