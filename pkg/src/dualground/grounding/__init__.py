"""End-to-end toy grounding model: encoders, query selection, heads, losses, training, evaluation."""

from .checkpoint import load_checkpoint, save_checkpoint
from .encoders import cross_encode, encode_text, encode_visual, farthest_point_sample, local_descriptors
from .evaluate import EvalReport, evaluate, predict, summarize
from .losses import assign_query, compute_loss, iou_tensor
from .model import (
    ConfigError,
    GroundingParams,
    HeadOutputs,
    ModelConfig,
    Vocab,
    ablation_configs,
    forward,
    init_model,
    prepare_sample,
    project_head,
    select_topk,
)
from .train import Adam, TrainingError, train

__all__ = [
    "Adam", "ConfigError", "EvalReport", "GroundingParams", "HeadOutputs", "ModelConfig",
    "TrainingError", "Vocab", "ablation_configs", "assign_query", "compute_loss", "cross_encode",
    "encode_text", "encode_visual", "evaluate", "farthest_point_sample", "forward", "init_model",
    "iou_tensor", "load_checkpoint", "local_descriptors", "predict", "prepare_sample",
    "project_head", "save_checkpoint", "select_topk", "summarize", "train",
]
