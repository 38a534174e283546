"""IMBoost: active outlier detection via inlier-memorization warm-up and
loss polarization."""

from .data import Dataset, NormStats, SyntheticSpec, load_csv, make_synthetic, split_and_normalize
from .losses import (LossConfig, ThresholdState, adaptive_threshold, cubo_loss,
                     iwae_loss, polarization_loss, quantile, trimmed_loss)
from .metrics import EvalReport, auc, average_precision, evaluate
from .model import ModelSpec, ParamStore, decode, encode, init_params, log_joint_terms, loss_and_grad
from .optim import AdamState, adam_step
from .query import (Gmm1d, LabelStore, SimulatedOracle, DeferredOracle,
                    apply_answers, fit_gmm2, per_round_budget, posterior_inlier,
                    select_queries)
from .trainer import (BatchSchedule, RiskTrace, SnapshotBuffer, TrainerConfig,
                      TrainingSession, batch_size, ensemble_scores, final_scores,
                      run_session)

__version__ = "0.1.0"
