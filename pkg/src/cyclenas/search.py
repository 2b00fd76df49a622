"""Architecture search engines.

One-step search ("of") jointly descends architecture weights and network
weights on the full objective over the whole dataset.  The two-step variants
alternate a network-weight update with an architecture-weight update per
iteration: "tf" anchors weight updates on side A and architecture updates on
side B without splitting, "th" trains on seed-deterministic disjoint halves of
each side, and "ths" additionally swaps the halves at a fixed epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import SideStream, UnpairedDataset
from .losses import (
    LossBreakdown,
    LossWeights,
    combined_loss,
    cycle_loss,
    discriminator_fake_loss,
    discriminator_loss,
    discriminator_real_loss,
    generator_adversarial_loss,
    identity_loss,
    mean_abs_error,
)
from .networks import SupernetPair
from .optim import Adam
from .seeding import rng_for
from .space import DISCRIMINATOR, GENERATOR, AlphaTable, ArchitectureSpec, discretize

SCHEMES = ("of", "tf", "th", "ths")

CSV_HEADER = "epoch,iter,adv_ab,adv_ba,cyc,idt_a,idt_b,total,entropy_ga,entropy_gb"


@dataclass
class SearchConfig:
    scheme: str = "of"
    n_cells: int = 11
    h_search: int = 8
    epochs: int = 400
    swap_epoch: int | None = None
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    batch_size: int = 1
    image_channels: int = 3
    saturating_adversarial: bool = False

    def __post_init__(self):
        self.scheme = self.scheme.lower()
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme '{self.scheme}' (choose from {SCHEMES})")
        if self.batch_size != 1:
            raise ValueError("batch size is fixed at 1")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.n_cells < 3:
            raise ValueError(f"n_cells must be >= 3, got {self.n_cells}")
        if self.h_search < 2:
            raise ValueError(f"h_search must be >= 2, got {self.h_search}")
        if self.scheme == "ths":
            if self.swap_epoch is None:
                self.swap_epoch = self.epochs // 2
            if not 0 < self.swap_epoch < self.epochs:
                raise ValueError(
                    f"swap_epoch must lie strictly inside (0, epochs), got "
                    f"{self.swap_epoch} with {self.epochs} epochs")
        elif self.swap_epoch is not None:
            raise ValueError("swap_epoch only applies to the 'ths' scheme")

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "n_cells": self.n_cells,
            "h_search": self.h_search,
            "epochs": self.epochs,
            "swap_epoch": self.swap_epoch,
            "weights": list(self.weights.as_tuple()),
            "seed": self.seed,
            "batch_size": self.batch_size,
            "image_channels": self.image_channels,
            "saturating_adversarial": self.saturating_adversarial,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchConfig":
        doc = dict(doc)
        if "weights" in doc:
            doc["weights"] = LossWeights(*doc["weights"])
        return cls(**doc)


@dataclass
class IterationRecord:
    epoch: int
    iteration: int
    adv_ab: float
    adv_ba: float
    cyc: float
    idt_a: float
    idt_b: float
    total: float
    slot_entropy: dict[str, list[float]]
    slot_argmax: dict[str, list[str]]

    @property
    def entropy_ga(self) -> float:
        return float(np.mean(self.slot_entropy["g_a"]))

    @property
    def entropy_gb(self) -> float:
        return float(np.mean(self.slot_entropy["g_b"]))

    def csv_row(self) -> str:
        cols = [str(self.epoch), str(self.iteration)]
        cols += [repr(v) for v in (self.adv_ab, self.adv_ba, self.cyc, self.idt_a,
                                   self.idt_b, self.total, self.entropy_ga, self.entropy_gb)]
        return ",".join(cols)


@dataclass
class SearchResult:
    config: SearchConfig
    specs: dict[str, ArchitectureSpec]
    alpha_tables: dict[str, AlphaTable]
    records: list[IterationRecord]
    events: list[dict]
    access_log: list[tuple]
    optimizer_passes: int
    iterations: int
    nets: SupernetPair
    splits: dict[str, list[int]] | None = None


def write_metrics_csv(records: list[IterationRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for record in records:
            fh.write(record.csv_row() + "\n")


# ---------------------------------------------------------------------------
# shared per-iteration passes (also used for discrete-network training)


def _batched(img: np.ndarray) -> Tensor:
    return Tensor(img[None])


def generator_objective(nets: dict, a: Tensor, b: Tensor, weights: LossWeights,
                        saturating: bool = False,
                        differentiable_alpha: bool = True) -> LossBreakdown:
    """Full objective on one sampled pair, as the generators see it."""
    fake_b = nets["g_a"](a, differentiable_alpha)
    fake_a = nets["g_b"](b, differentiable_alpha)
    rec_a = nets["g_b"](fake_b, differentiable_alpha)
    rec_b = nets["g_a"](fake_a, differentiable_alpha)
    idt_img_a = nets["g_a"](b, differentiable_alpha)
    idt_img_b = nets["g_b"](a, differentiable_alpha)
    adv_ab = generator_adversarial_loss(nets["d_b"](fake_b, differentiable_alpha), saturating)
    adv_ba = generator_adversarial_loss(nets["d_a"](fake_a, differentiable_alpha), saturating)
    cyc = cycle_loss(rec_a, a, rec_b, b)
    idt_a = identity_loss(idt_img_a, b)
    idt_b = identity_loss(idt_img_b, a)
    return combined_loss(adv_ab, adv_ba, cyc, idt_a, idt_b, weights)


def discriminator_objective(nets: dict, a: Tensor, b: Tensor,
                            differentiable_alpha: bool = True) -> Tensor:
    """Both discriminators' loss on real images and freshly recomputed fakes.

    The fakes come from the already-updated generators with gradient flow
    severed, so only discriminator parameters receive gradients.
    """
    with ad.no_grad():
        fake_b = nets["g_a"](a, False)
        fake_a = nets["g_b"](b, False)
    loss_db = discriminator_loss(nets["d_b"](b, differentiable_alpha),
                                 nets["d_b"](fake_b, differentiable_alpha))
    loss_da = discriminator_loss(nets["d_a"](a, differentiable_alpha),
                                 nets["d_a"](fake_a, differentiable_alpha))
    return ad.add(loss_db, loss_da)


def zero_grads(nets: dict) -> None:
    for net in nets.values():
        for p in net.parameters().values():
            p.grad = None
        for p in net.alphas().values():
            p.grad = None


# ---------------------------------------------------------------------------
# engine


class _Engine:
    def __init__(self, config: SearchConfig, data: UnpairedDataset):
        if data.n_a < 1 or data.n_b < 1:
            raise ValueError("both subdatasets must be non-empty")
        if config.scheme in ("th", "ths") and (data.n_a < 2 or data.n_b < 2):
            raise ValueError("halved schemes need at least 2 images per side")
        self.config = config
        self.data = data
        self.pair = SupernetPair.build(config.n_cells, config.h_search,
                                       config.image_channels, seed=config.seed)
        self.nets = self.pair.nets()
        self.gen_w = Adam(self.pair.weights(("g_a", "g_b")))
        self.gen_alpha = Adam(self.pair.alphas(("g_a", "g_b")))
        self.disc_w = Adam(self.pair.weights(("d_a", "d_b")))
        self.disc_alpha = Adam(self.pair.alphas(("d_a", "d_b")))
        self.records: list[IterationRecord] = []
        self.events: list[dict] = []
        self.access_log: list[tuple] = []
        self.optimizer_passes = 0
        self.iterations = 0
        self.splits: dict[str, list[int]] | None = None
        self._build_streams()

    # stream wiring -----------------------------------------------------

    def _build_streams(self):
        cfg = self.config
        seed = cfg.seed
        all_a = list(range(self.data.n_a))
        all_b = list(range(self.data.n_b))
        if cfg.scheme in ("of", "tf"):
            self.stream_a = SideStream(all_a, seed, "a")
            self.stream_b = SideStream(all_b, seed, "b")
        else:
            self.splits = {}
            halves = {}
            for side, indices in (("a", all_a), ("b", all_b)):
                perm = rng_for(seed, "split", side).permutation(len(indices))
                cut = (len(indices) + 1) // 2
                first = sorted(int(indices[i]) for i in perm[:cut])
                second = sorted(int(indices[i]) for i in perm[cut:])
                halves[side] = (first, second)
                self.splits[f"{side}1"] = first
                self.splits[f"{side}2"] = second
            self.stream_a1 = SideStream(halves["a"][0], seed, "a1")
            self.stream_a2 = SideStream(halves["a"][1], seed, "a2")
            self.stream_b1 = SideStream(halves["b"][0], seed, "b1")
            self.stream_b2 = SideStream(halves["b"][1], seed, "b2")

    def _phase_streams(self, epoch: int, phase: str):
        """Which (a, b) streams feed a phase of the current epoch."""
        cfg = self.config
        if cfg.scheme == "of":
            return self.stream_a, self.stream_b
        if cfg.scheme == "tf":
            # weight steps consume only A-anchored samples, architecture
            # steps only B-anchored ones
            return (self.stream_a, None) if phase == "w" else (None, self.stream_b)
        swapped = cfg.scheme == "ths" and epoch >= cfg.swap_epoch
        first = (self.stream_a1, self.stream_b1)
        second = (self.stream_a2, self.stream_b2)
        if phase == "w":
            return second if swapped else first
        return first if swapped else second

    @property
    def iterations_per_epoch(self) -> int:
        return max(self.data.n_a, self.data.n_b)

    # bookkeeping ---------------------------------------------------------

    def _sample(self, epoch: int, it: int, phase: str, streams):
        stream_a, stream_b = streams
        a = b = None
        if stream_a is not None:
            ia = stream_a.index_at(epoch, it)
            self.access_log.append((epoch, it, phase, "a", ia))
            a = _batched(self.data.side_a[ia])
        if stream_b is not None:
            ib = stream_b.index_at(epoch, it)
            self.access_log.append((epoch, it, phase, "b", ib))
            b = _batched(self.data.side_b[ib])
        return a, b

    def _update(self, loss: Tensor, groups: list[Adam]) -> None:
        zero_grads(self.nets)
        loss.backward()
        for group in groups:
            group.step()
        self.optimizer_passes += 1

    def _snapshot(self) -> tuple[dict, dict]:
        entropy = {}
        argmax = {}
        for key, net in self.nets.items():
            slots = [slot for cell in net.cells for slot in cell.slots]
            entropy[key] = [slot.entropy() for slot in slots]
            argmax[key] = [slot.argmax_kind() for slot in slots]
        return entropy, argmax

    def _record(self, epoch: int, it: int, comps: dict[str, float],
                entropy: dict, argmax: dict) -> None:
        lam = self.config.weights.as_tuple()
        total = (lam[0] * comps["adv_ab"] + lam[1] * comps["adv_ba"]
                 + lam[2] * comps["cyc"] + lam[3] * comps["idt_a"]
                 + lam[4] * comps["idt_b"])
        self.records.append(IterationRecord(
            epoch=epoch, iteration=it, adv_ab=comps["adv_ab"], adv_ba=comps["adv_ba"],
            cyc=comps["cyc"], idt_a=comps["idt_a"], idt_b=comps["idt_b"], total=total,
            slot_entropy=entropy, slot_argmax=argmax))

    # anchored half-objectives (scheme "tf") -------------------------------

    def _gen_anchored_a(self, a: Tensor, diff_alpha: bool):
        nets = self.nets
        fake_b = nets["g_a"](a, diff_alpha)
        rec_a = nets["g_b"](fake_b, diff_alpha)
        idt_img_b = nets["g_b"](a, diff_alpha)
        adv_ab = generator_adversarial_loss(nets["d_b"](fake_b, diff_alpha),
                                            self.config.saturating_adversarial)
        cyc_a = mean_abs_error(rec_a, a)
        idt_b = identity_loss(idt_img_b, a)
        lam = self.config.weights
        total = ad.add(ad.add(ad.scale(adv_ab, lam.adv_ab), ad.scale(cyc_a, lam.cyc)),
                       ad.scale(idt_b, lam.idt_b))
        comps = {"adv_ab": adv_ab.item(), "cyc_a": cyc_a.item(), "idt_b": idt_b.item()}
        return total, comps

    def _gen_anchored_b(self, b: Tensor, diff_alpha: bool):
        nets = self.nets
        fake_a = nets["g_b"](b, diff_alpha)
        rec_b = nets["g_a"](fake_a, diff_alpha)
        idt_img_a = nets["g_a"](b, diff_alpha)
        adv_ba = generator_adversarial_loss(nets["d_a"](fake_a, diff_alpha),
                                            self.config.saturating_adversarial)
        cyc_b = mean_abs_error(rec_b, b)
        idt_a = identity_loss(idt_img_a, b)
        lam = self.config.weights
        total = ad.add(ad.add(ad.scale(adv_ba, lam.adv_ba), ad.scale(cyc_b, lam.cyc)),
                       ad.scale(idt_a, lam.idt_a))
        comps = {"adv_ba": adv_ba.item(), "cyc_b": cyc_b.item(), "idt_a": idt_a.item()}
        return total, comps

    def _disc_anchored_a(self, a: Tensor, diff_alpha: bool) -> Tensor:
        with ad.no_grad():
            fake_b = self.nets["g_a"](a, False)
        return ad.add(discriminator_real_loss(self.nets["d_a"](a, diff_alpha)),
                      discriminator_fake_loss(self.nets["d_b"](fake_b, diff_alpha)))

    def _disc_anchored_b(self, b: Tensor, diff_alpha: bool) -> Tensor:
        with ad.no_grad():
            fake_a = self.nets["g_b"](b, False)
        return ad.add(discriminator_real_loss(self.nets["d_b"](b, diff_alpha)),
                      discriminator_fake_loss(self.nets["d_a"](fake_a, diff_alpha)))

    # iteration bodies ------------------------------------------------------

    def _iterate_of(self, epoch: int, it: int, entropy, argmax):
        cfg = self.config
        a, b = self._sample(epoch, it, "joint", (self.stream_a, self.stream_b))
        bd = generator_objective(self.nets, a, b, cfg.weights,
                                 cfg.saturating_adversarial, True)
        self._update(bd.total, [self.gen_w, self.gen_alpha])
        dloss = discriminator_objective(self.nets, a, b, True)
        self._update(dloss, [self.disc_w, self.disc_alpha])
        comps = bd.values()
        del comps["total"]
        self._record(epoch, it, comps, entropy, argmax)

    def _iterate_tf(self, epoch: int, it: int, entropy, argmax):
        a, _ = self._sample(epoch, it, "w", self._phase_streams(epoch, "w"))
        total_a, comps_a = self._gen_anchored_a(a, False)
        self._update(total_a, [self.gen_w])
        self._update(self._disc_anchored_a(a, False), [self.disc_w])

        _, b = self._sample(epoch, it, "alpha", self._phase_streams(epoch, "alpha"))
        total_b, comps_b = self._gen_anchored_b(b, True)
        self._update(total_b, [self.gen_alpha])
        self._update(self._disc_anchored_b(b, True), [self.disc_alpha])

        comps = {"adv_ab": comps_a["adv_ab"], "adv_ba": comps_b["adv_ba"],
                 "cyc": comps_a["cyc_a"] + comps_b["cyc_b"],
                 "idt_a": comps_b["idt_a"], "idt_b": comps_a["idt_b"]}
        self._record(epoch, it, comps, entropy, argmax)

    def _iterate_halved(self, epoch: int, it: int, entropy, argmax):
        cfg = self.config
        a, b = self._sample(epoch, it, "w", self._phase_streams(epoch, "w"))
        bd = generator_objective(self.nets, a, b, cfg.weights,
                                 cfg.saturating_adversarial, False)
        self._update(bd.total, [self.gen_w])
        self._update(discriminator_objective(self.nets, a, b, False), [self.disc_w])

        a2, b2 = self._sample(epoch, it, "alpha", self._phase_streams(epoch, "alpha"))
        bd2 = generator_objective(self.nets, a2, b2, cfg.weights,
                                  cfg.saturating_adversarial, True)
        self._update(bd2.total, [self.gen_alpha])
        self._update(discriminator_objective(self.nets, a2, b2, True), [self.disc_alpha])

        comps = bd.values()
        del comps["total"]
        self._record(epoch, it, comps, entropy, argmax)

    # main loop -------------------------------------------------------------

    def run(self) -> SearchResult:
        cfg = self.config
        body = {"of": self._iterate_of, "tf": self._iterate_tf,
                "th": self._iterate_halved, "ths": self._iterate_halved}[cfg.scheme]
        for epoch in range(cfg.epochs):
            if cfg.scheme == "ths" and epoch == cfg.swap_epoch:
                self.events.append({"epoch": epoch, "event": "swap_splits"})
            for it in range(self.iterations_per_epoch):
                entropy, argmax = self._snapshot()
                body(epoch, it, entropy, argmax)
                self.iterations += 1

        specs = {}
        tables = {}
        for key, net in self.nets.items():
            table = net.alpha_table()
            tables[key] = table
            role = GENERATOR if key.startswith("g") else DISCRIMINATOR
            n = cfg.n_cells if role == GENERATOR else None
            specs[key] = discretize(role, n, table, hidden_dim=cfg.h_search)
        return SearchResult(config=cfg, specs=specs, alpha_tables=tables,
                            records=self.records, events=self.events,
                            access_log=self.access_log,
                            optimizer_passes=self.optimizer_passes,
                            iterations=self.iterations, nets=self.pair,
                            splits=self.splits)


def run_search(config: SearchConfig, data: UnpairedDataset) -> SearchResult:
    return _Engine(config, data).run()


def one_step_search(config: SearchConfig, data: UnpairedDataset) -> SearchResult:
    if config.scheme != "of":
        raise ValueError(f"one_step_search requires scheme 'of', got '{config.scheme}'")
    return run_search(config, data)


def two_step_search(config: SearchConfig, data: UnpairedDataset) -> SearchResult:
    if config.scheme not in ("tf", "th", "ths"):
        raise ValueError(f"two_step_search requires a two-step scheme, got '{config.scheme}'")
    return run_search(config, data)
