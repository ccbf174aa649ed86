from .decode import rollout, solve_batch
from .io import load_model, save_model
from .model import AttentionModel, ModelConfig

__all__ = ["AttentionModel", "ModelConfig", "load_model", "rollout", "save_model", "solve_batch"]
