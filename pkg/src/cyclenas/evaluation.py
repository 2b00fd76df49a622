"""Discrete-architecture training, a proxy distribution distance, repeat-k
selection, and model-size asymmetry reporting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import SideStream, UnpairedDataset
from .losses import LossWeights
from .networks import instantiate_discrete, model_size
from .optim import Adam
from .search import (
    IterationRecord,
    discriminator_objective,
    generator_objective,
    zero_grads,
)
from .space import (
    DISCRIMINATOR,
    ArchitectureSpec,
    CellSpec,
    CellType,
)

FEATURE_DIM = 9


# ---------------------------------------------------------------------------
# proxy distance: Frechet distance between Gaussians fitted to fixed
# hand-crafted per-image features (per-channel mean, variance, and mean
# absolute Laplacian response: 3 x 3 = 9 dimensions)


def image_features(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) image, got shape {img.shape}")
    means = img.mean(axis=(1, 2))
    variances = img.var(axis=(1, 2))
    interior = img[:, 1:-1, 1:-1]
    lap = (img[:, 1:-1, 2:] + img[:, 1:-1, :-2] + img[:, 2:, 1:-1]
           + img[:, :-2, 1:-1] - 4.0 * interior)
    lap_mean = np.abs(lap).mean(axis=(1, 2))
    return np.concatenate([means, variances, lap_mean])


def feature_matrix(images: list[np.ndarray]) -> np.ndarray:
    return np.stack([image_features(img) for img in images])


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    # symmetric square root with negative eigenvalues (estimation noise from
    # tiny sample sets) clipped to zero
    vals, vecs = np.linalg.eigh((m + m.T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_gaussian_distance(mu1: np.ndarray, sigma1: np.ndarray,
                              mu2: np.ndarray, sigma2: np.ndarray) -> float:
    """|mu1-mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2)), via the symmetric form
    (S1^(1/2) S2 S1^(1/2))^(1/2)."""
    diff = mu1 - mu2
    root1 = _sqrtm_psd(sigma1)
    cross = _sqrtm_psd(root1 @ sigma2 @ root1)
    value = float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2.0 * np.trace(cross))
    return max(value, 0.0)


def proxy_frechet(set_x: list[np.ndarray], set_y: list[np.ndarray]) -> float:
    """Distribution distance between two image sets (>= 2 images each)."""
    if len(set_x) < 2 or len(set_y) < 2:
        raise ValueError("proxy_frechet needs at least 2 images per set")
    fx = feature_matrix(set_x)
    fy = feature_matrix(set_y)
    mu_x, mu_y = fx.mean(axis=0), fy.mean(axis=0)
    sigma_x = np.cov(fx, rowvar=False)
    sigma_y = np.cov(fy, rowvar=False)
    return frechet_gaussian_distance(mu_x, sigma_x, mu_y, sigma_y)


# ---------------------------------------------------------------------------
# discrete training


def default_discriminator_spec(hidden_dim: int) -> ArchitectureSpec:
    cell = CellSpec(CellType.ENCODING, "conv3x3", "conv3x3")
    return ArchitectureSpec(role=DISCRIMINATOR, cells=(cell, cell), hidden_dim=hidden_dim)


@dataclass
class TrainResult:
    nets: dict[str, object]
    records: list[IterationRecord]
    seed: int
    epochs: int

    def named_weights(self) -> dict[str, Tensor]:
        out = {}
        for key, net in self.nets.items():
            for name, p in net.parameters().items():
                out[f"{key}.{name}"] = p
        return out


def train_discrete(spec_ga: ArchitectureSpec, spec_gb: ArchitectureSpec,
                   hidden_dim: int, data: UnpairedDataset, epochs: int,
                   weights: LossWeights | None = None, seed: int = 0,
                   spec_da: ArchitectureSpec | None = None,
                   spec_db: ArchitectureSpec | None = None,
                   saturating: bool = False) -> TrainResult:
    """Fixed-operation training loop: same iteration structure as the search
    but with no architecture weights to update."""
    if data.n_a < 1 or data.n_b < 1:
        raise ValueError("both subdatasets must be non-empty")
    weights = weights or LossWeights()
    spec_da = spec_da or default_discriminator_spec(hidden_dim)
    spec_db = spec_db or default_discriminator_spec(hidden_dim)
    channels = data.image_shape[0]
    nets = {
        "g_a": instantiate_discrete(spec_ga, hidden_dim, seed=_child(seed, "g_a"), image_channels=channels),
        "g_b": instantiate_discrete(spec_gb, hidden_dim, seed=_child(seed, "g_b"), image_channels=channels),
        "d_a": instantiate_discrete(spec_da, hidden_dim, seed=_child(seed, "d_a"), image_channels=channels),
        "d_b": instantiate_discrete(spec_db, hidden_dim, seed=_child(seed, "d_b"), image_channels=channels),
    }
    for net in nets.values():
        assert not net.alphas(), "discrete training must not carry architecture weights"

    gen_opt = Adam(_grouped(nets, ("g_a", "g_b")))
    disc_opt = Adam(_grouped(nets, ("d_a", "d_b")))
    stream_a = SideStream(list(range(data.n_a)), seed, "train-a")
    stream_b = SideStream(list(range(data.n_b)), seed, "train-b")
    iters = max(data.n_a, data.n_b)

    records: list[IterationRecord] = []
    for epoch in range(epochs):
        for it in range(iters):
            a = Tensor(data.side_a[stream_a.index_at(epoch, it)][None])
            b = Tensor(data.side_b[stream_b.index_at(epoch, it)][None])
            bd = generator_objective(nets, a, b, weights, saturating, False)
            zero_grads(nets)
            bd.total.backward()
            gen_opt.step()
            dloss = discriminator_objective(nets, a, b, False)
            zero_grads(nets)
            dloss.backward()
            disc_opt.step()
            vals = bd.values()
            records.append(IterationRecord(
                epoch=epoch, iteration=it, adv_ab=vals["adv_ab"], adv_ba=vals["adv_ba"],
                cyc=vals["cyc"], idt_a=vals["idt_a"], idt_b=vals["idt_b"],
                total=vals["total"], slot_entropy={"g_a": [0.0], "g_b": [0.0]},
                slot_argmax={"g_a": [], "g_b": []}))
    return TrainResult(nets=nets, records=records, seed=seed, epochs=epochs)


def _child(seed: int, label: str) -> int:
    from .seeding import rng_for
    return int(rng_for(seed, "train-init", label).integers(0, 2 ** 63 - 1))


def _grouped(nets: dict, keys: tuple[str, ...]) -> dict[str, Tensor]:
    out = {}
    for key in keys:
        for name, p in nets[key].parameters().items():
            out[f"{key}.{name}"] = p
    return out


def translate_all(net, images: list[np.ndarray]) -> list[np.ndarray]:
    out = []
    with ad.no_grad():
        for img in images:
            out.append(net(Tensor(img[None]), False).data[0].copy())
    return out


# ---------------------------------------------------------------------------
# reports


@dataclass
class EvalReport:
    proxy_ab: float
    proxy_ba: float
    bytes_ga: int
    bytes_gb: int
    ratio: float
    seed: int
    epochs: int
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.proxy_ab < 0 or self.proxy_ba < 0:
            raise ValueError("proxy distances must be non-negative")
        if self.ratio <= 0:
            raise ValueError("size ratio must be positive")

    def to_json_dict(self) -> dict:
        doc = {
            "proxy_ab": self.proxy_ab,
            "proxy_ba": self.proxy_ba,
            "bytes_ga": self.bytes_ga,
            "bytes_gb": self.bytes_gb,
            "ratio": self.ratio,
            "seed": self.seed,
            "epochs": self.epochs,
        }
        doc.update(self.extras)
        return doc


def evaluate_pair(nets: dict, data: UnpairedDataset, seed: int, epochs: int) -> EvalReport:
    """Per-direction proxy distances plus per-generator sizes for trained nets."""
    translated_a = translate_all(nets["g_a"], data.side_a)
    translated_b = translate_all(nets["g_b"], data.side_b)
    size_ga = model_size(nets["g_a"])
    size_gb = model_size(nets["g_b"])
    return EvalReport(
        proxy_ab=proxy_frechet(translated_a, data.side_b),
        proxy_ba=proxy_frechet(translated_b, data.side_a),
        bytes_ga=size_ga.bytes,
        bytes_gb=size_gb.bytes,
        ratio=size_ga.bytes / size_gb.bytes,
        seed=seed,
        epochs=epochs,
    )


def select_best(reports: list[EvalReport]) -> EvalReport:
    """Lowest primary-direction (A->B) distance; ties go to the lower seed."""
    return min(reports, key=lambda r: (r.proxy_ab, r.seed))


def best_of_k(spec_ga: ArchitectureSpec, spec_gb: ArchitectureSpec, hidden_dim: int,
              data: UnpairedDataset, k: int = 3, epochs: int = 30,
              weights: LossWeights | None = None,
              seeds: list[int] | None = None,
              spec_da: ArchitectureSpec | None = None,
              spec_db: ArchitectureSpec | None = None) -> tuple[EvalReport, list[EvalReport]]:
    """Repeat weight training k times and keep the best-scoring run."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    seeds = list(seeds) if seeds is not None else list(range(1, k + 1))
    if len(seeds) != k or len(set(seeds)) != k:
        raise ValueError("need k distinct seeds")
    reports = []
    for seed in seeds:
        result = train_discrete(spec_ga, spec_gb, hidden_dim, data, epochs,
                                weights=weights, seed=seed,
                                spec_da=spec_da, spec_db=spec_db)
        reports.append(evaluate_pair(result.nets, data, seed=seed, epochs=epochs))
    return select_best(reports), reports


def asymmetry_report(spec_ga: ArchitectureSpec, spec_gb: ArchitectureSpec,
                     hidden_dim: int) -> tuple[float, "SizeReport", "SizeReport"]:
    """Byte-size ratio of the two generators at a shared hidden dimension."""
    size_ga = model_size(spec_ga, hidden_dim)
    size_gb = model_size(spec_gb, hidden_dim)
    return size_ga.bytes / size_gb.bytes, size_ga, size_gb


RESULTS_CSV_HEADER = "scheme,N,H,seed,proxy_ab,proxy_ba,bytes_ga,bytes_gb,ratio"


def append_results_csv(path, scheme: str, n: int, h: int, report: EvalReport) -> None:
    import os
    new = not os.path.exists(path)
    with open(path, "a", encoding="utf-8") as fh:
        if new:
            fh.write(RESULTS_CSV_HEADER + "\n")
        fh.write(",".join([
            scheme, str(n), str(h), str(report.seed),
            repr(report.proxy_ab), repr(report.proxy_ba),
            str(report.bytes_ga), str(report.bytes_gb), repr(report.ratio),
        ]) + "\n")
