"""Factorization machines with pairwise (BPR-style) learning for implicit feedback."""

__version__ = "0.1.0"

from ._jit import HAS_NUMBA
from .baselines import MFModel, PopularityModel, bpr_mf_step, popularity_score, train_bpr_mf
from .core import (
    FeatureSpace,
    FMModel,
    ItemAttributes,
    SparseVector,
    init_params,
    pair_utility,
    predict,
    predict_naive,
    score_items,
)
from .data import Dataset, FormatDescriptor, Interaction, cross_domain_split, kfold_split, parse_csv, to_implicit
from .evaluation import EvalReport, evaluate_fold, mrr_at_n, one_plus_random_rank, recall_at_n
from .features import ContextDimension, ContextSchema, CrossDomainConfig, build_context_vector, build_cross_domain_vector
from .pairwise import PairSample, TrainConfig, sample_pair, sgd_step, train
from .pointwise import LabeledInstance, build_fm_map_training, pointwise_step, train_fm_map, train_pointwise

__all__ = [
    "HAS_NUMBA",
    "ContextDimension",
    "ContextSchema",
    "CrossDomainConfig",
    "Dataset",
    "EvalReport",
    "FMModel",
    "FeatureSpace",
    "FormatDescriptor",
    "Interaction",
    "ItemAttributes",
    "LabeledInstance",
    "MFModel",
    "PairSample",
    "PopularityModel",
    "SparseVector",
    "TrainConfig",
    "bpr_mf_step",
    "build_context_vector",
    "build_cross_domain_vector",
    "build_fm_map_training",
    "cross_domain_split",
    "evaluate_fold",
    "init_params",
    "kfold_split",
    "mrr_at_n",
    "one_plus_random_rank",
    "pair_utility",
    "parse_csv",
    "pointwise_step",
    "popularity_score",
    "predict",
    "predict_naive",
    "recall_at_n",
    "sample_pair",
    "score_items",
    "sgd_step",
    "to_implicit",
    "train",
    "train_bpr_mf",
    "train_fm_map",
    "train_pointwise",
]
