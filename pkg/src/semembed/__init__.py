"""Structured visual-semantic embeddings over precomputed feature vectors."""

from .embedding import (DegenerateProjectionError, Dataset, EmbeddingModel, Instance,
                        LabelTable, cosine_distance, project, project_jacobian)
from .inference import (concat_embeddings, rank_concatenated, rank_dataset, rank_labels,
                        zero_shot_eval)
from .losses import (LossConfig, LossValueAndGrad, combined_objective, contrastive_loss,
                     difference_loss, ranking_loss, triplet_loss)
from .metrics import (EvalReport, PredictionRanking, confusion_matrix, hit_at_k, map_at_n,
                      mean_average_precision, multilabel_metrics)
from .mining import (MultiLabelImage, MultiLabelScorer, filter_proposals, mine_regions,
                     train_scorer)
from .sampling import Batch, sample_pair_batch, sample_triplet_batch
from .synthetic import SyntheticSpec, generate_synthetic
from .trainer import TrainConfig, TrainState, init_model, sgd_step, train

__version__ = "0.1.0"
