"""Trainer/exporter for the digit classifier: MDNN weights, MDHS histogram
fixtures, and golden forward-pass vectors."""
from .train import TrainRun, train_and_export

__all__ = ["TrainRun", "train_and_export"]
