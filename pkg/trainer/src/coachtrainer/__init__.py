"""LoRA context-distillation trainer for coaching-round datasets."""

from .data import Dataset, DatasetError, Sample, Tokenizer, load_dataset
from .model import LoRALinear, ModelConfig, TinyLM, apply_lora, merge_lora
from .registry import RegistryError, register_model_tag
from .train import AdapterSpec, TrainPlan, TrainResult, train

__all__ = [
    "AdapterSpec",
    "Dataset",
    "DatasetError",
    "LoRALinear",
    "ModelConfig",
    "RegistryError",
    "Sample",
    "TinyLM",
    "Tokenizer",
    "TrainPlan",
    "TrainResult",
    "apply_lora",
    "load_dataset",
    "merge_lora",
    "register_model_tag",
    "train",
]
