"""Training loop: minimize the mean per-iteration absolute residual.

The objective is L = (1/n) * sum_t mean|r_t| over random 32x32 crops, with
Adam under a cosine-annealed learning rate. Desk-scale defaults train a
small model on synthetic planes in well under a minute per dozen epochs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .codec import PATCH, run_coder
from .model import ModelConfig, RnnCodecModel


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    iterations: int = 8
    batch_size: int = 32
    crops_per_epoch: int = 192
    lr: float = 2e-3
    seed: int = 7


def random_crops(
    planes: list[np.ndarray], count: int, rng: np.random.Generator
) -> torch.Tensor:
    """(count, 1, PATCH, PATCH) batch of random crops across the planes."""
    crops = np.empty((count, 1, PATCH, PATCH), dtype=np.float32)
    for i in range(count):
        p = planes[int(rng.integers(0, len(planes)))]
        r = int(rng.integers(0, p.shape[0] - PATCH + 1))
        c = int(rng.integers(0, p.shape[1] - PATCH + 1))
        crops[i, 0] = p[r : r + PATCH, c : c + PATCH]
    return torch.from_numpy(crops)


def residual_loss(x: torch.Tensor, recons: list[torch.Tensor]) -> torch.Tensor:
    """(1/n) * sum_t mean|x - x_hat_t|."""
    return torch.stack([(x - xh).abs().mean() for xh in recons]).mean()


def eval_loss(model: RnnCodecModel, probe: torch.Tensor, iterations: int) -> float:
    model.eval()
    with torch.no_grad():
        _, recons = run_coder(model, probe, iterations)
        return float(residual_loss(probe, recons))


def iteration_residuals(
    model: RnnCodecModel, planes: list[np.ndarray], iterations: int
) -> list[float]:
    """mean|r_t| per iteration over full-plane patch batches."""
    from .codec import pad_plane, to_patches

    model.eval()
    sums = np.zeros(iterations)
    count = 0
    with torch.no_grad():
        for p in planes:
            x = to_patches(pad_plane(torch.as_tensor(p, dtype=torch.float32)))
            _, recons = run_coder(model, x, iterations)
            for t, xh in enumerate(recons):
                sums[t] += float((x - xh).abs().mean()) * len(x)
            count += len(x)
    return (sums / count).tolist()


def train(
    planes: list[np.ndarray],
    cfg: TrainConfig = TrainConfig(),
    model: RnnCodecModel | None = None,
) -> tuple[RnnCodecModel, dict]:
    """Returns (model, history) where history carries per-epoch losses plus
    the fixed-probe loss before and after training."""
    if not planes:
        raise TrainingError("training needs at least one plane")
    for p in planes:
        if p.shape[0] < PATCH or p.shape[1] < PATCH:
            raise TrainingError(f"plane {p.shape} smaller than a {PATCH}x{PATCH} crop")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    if model is None:
        model = RnnCodecModel(ModelConfig(seed=cfg.seed))

    probe = random_crops(planes, min(128, cfg.crops_per_epoch), rng)
    initial = eval_loss(model, probe, cfg.iterations)

    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=cfg.epochs)
    history = {"initial": initial, "epochs": []}

    for epoch in range(cfg.epochs):
        model.train()
        crops = random_crops(planes, cfg.crops_per_epoch, rng)
        perm = torch.from_numpy(rng.permutation(len(crops)))
        losses = []
        for s in range(0, len(crops), cfg.batch_size):
            x = crops[perm[s : s + cfg.batch_size]]
            _, recons = run_coder(model, x, cfg.iterations)
            loss = residual_loss(x, recons)
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, step {s // cfg.batch_size}: "
                    f"{loss.item()!r} (lr={sched.get_last_lr()[0]:.2e})"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
        sched.step()
        history["epochs"].append(float(np.mean(losses)))

    history["final"] = eval_loss(model, probe, cfg.iterations)
    model.eval()
    return model, history
