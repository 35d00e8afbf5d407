"""Inductive logical query answering over knowledge graphs.

Numpy-only research library: symbolic query grounding, inductive benchmark
construction, a prompt-aware context-aggregation embedding model with a
hand-rolled reverse-mode autodiff, training, and MRR evaluation.
"""

from .autodiff import Tape, Tensor, backward, no_grad
from .bench import (EVAL_CLASSES, InductiveSplit, QueryRecord, build_benchmark,
                    classify, ground_queries, read_dataset, read_split,
                    split_inductive, write_dataset, write_split)
from .evaluation import (EvalProtocol, EvalReport, analytic_random_mrr,
                         evaluate, mean_baseline_scorer, model_scorer, mrr,
                         rank)
from .kg import (IN, OUT, KGFormatError, KnowledgeGraph, Triple, load_triples,
                 write_dicts, write_triples)
from .model import (ContextBundle, InductiveQueryModel, ModelConfig,
                    QueryEmbedding, UnsupportedOperatorError)
from .queries import (STRUCTURES, Anchor, And, DnfQuery, Not, Or, Proj,
                      QueryGraph, QueryValidationError, anchors, canonicalize,
                      instantiate, query_to_record, record_to_query, relations,
                      to_dnf, validate)
from .symbolic import answer_set, brute_force_answers, combine, complement, project
from .synth import synth_kg
from .tokens import (Token, TokenParseError, TokenSequence, Vocabulary,
                     check_brackets, parse, serialize, vocab_ids)
from .training import TrainConfig, TrainingDiverged, batch_loss, query_loss, train

__version__ = "0.1.0"
