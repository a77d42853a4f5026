"""Training and fine-tuning loops.

Hyperparameters are deliberately plain (Adam, fixed learning rate, no
augmentation or schedule) and every one of them is recorded in the
result report, so a run is reproducible from its report alone. The seed
fixes initialization and data order; identical config means identical
loss curve.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader

from .data import ManifestDataset
from .net import build_model, export_records, import_records, parameter_count
from .pmdl import read_model, write_model


@dataclass
class TrainConfig:
    train_manifest: str
    test_manifest: str
    corpus_root: str
    epochs: int = 10
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    init_weights: str | None = None  # existing weight file to fine-tune from
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.learning_rate < 1:
            raise ValueError("learning_rate must be in (0, 1)")


@dataclass
class TrainResult:
    model: object
    loss_curve: list[float]  # mean training loss per epoch
    train_accuracy: list[float]  # per epoch
    report: dict = field(default_factory=dict)


def _metrics(tp, fp, fn, tn):
    total = tp + fp + fn + tn
    return {
        "tp": tp, "fp": fp, "fn": fn, "tn": tn,
        "accuracy": (tp + tn) / total if total else None,
        "precision": tp / (tp + fp) if tp + fp else None,
        "recall": tp / (tp + fn) if tp + fn else None,
    }


@torch.no_grad()
def evaluate(model, dataset, batch_size=32):
    """Held-out metrics plus per-image predictions keyed by sha256."""
    model.eval()
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False)
    tp = fp = fn = tn = 0
    predictions = {}
    for planes, classes, shas in loader:
        p_ad = model.probabilities(planes)[:, 0]
        for prob, cls, sha in zip(p_ad.tolist(), classes.tolist(), shas):
            predicted_ad = prob >= 0.5
            actual_ad = cls == 0
            predictions[sha] = {"p_ad": prob,
                                "predicted": "ad" if predicted_ad else "non-ad"}
            if predicted_ad and actual_ad:
                tp += 1
            elif predicted_ad:
                fp += 1
            elif actual_ad:
                fn += 1
            else:
                tn += 1
    return _metrics(tp, fp, fn, tn), predictions


def train(config: TrainConfig) -> TrainResult:
    torch.manual_seed(config.seed)
    train_set = ManifestDataset(config.train_manifest, config.corpus_root)
    test_set = ManifestDataset(config.test_manifest, config.corpus_root)

    model = build_model()
    if config.init_weights:
        import_records(model, read_model(config.init_weights))

    loader = DataLoader(
        train_set, batch_size=config.batch_size, shuffle=True,
        generator=torch.Generator().manual_seed(config.seed))
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = torch.nn.CrossEntropyLoss()

    checkpoint_dir = Path(config.checkpoint_dir) if config.checkpoint_dir else None
    if checkpoint_dir:
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    loss_curve = []
    train_accuracy = []
    for epoch in range(config.epochs):
        model.train()
        losses = []
        for planes, classes, _ in loader:
            optimizer.zero_grad()
            scores = model.training_scores(planes)
            loss = loss_fn(scores, classes)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        loss_curve.append(float(np.mean(losses)))
        # accuracy under deployed semantics, not the training scores
        epoch_metrics, _ = evaluate(model, train_set)
        train_accuracy.append(epoch_metrics["accuracy"])
        if checkpoint_dir:
            write_model(export_records(model),
                        checkpoint_dir / f"epoch{epoch + 1}.pmdl")

    metrics, predictions = evaluate(model, test_set)
    report = {
        "config": {
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "learning_rate": config.learning_rate,
            "seed": config.seed,
            "optimizer": "adam",
            "loss": "cross_entropy",
            "augmentation": "none",
            "fine_tuned_from": config.init_weights,
        },
        "parameters": parameter_count(model),
        "train_images": len(train_set),
        "test_images": len(test_set),
        "loss_curve": loss_curve,
        "train_accuracy": train_accuracy,
        "held_out": metrics,
    }
    return TrainResult(model=model, loss_curve=loss_curve,
                       train_accuracy=train_accuracy, report=report)


def write_report(result: TrainResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.report, fh, indent=2)
        fh.write("\n")
