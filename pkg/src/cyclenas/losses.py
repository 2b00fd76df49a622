"""Translation objectives: adversarial value, cycle consistency, identity, and
their weighted combination."""

from __future__ import annotations

from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import Tensor

# probabilities are clamped before logarithms; the value function is
# undefined at exactly 0 or 1
PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Coefficients for (adv A->B, adv B->A, cycle, identity A, identity B)."""

    adv_ab: float = 1.0
    adv_ba: float = 1.0
    cyc: float = 10.0
    idt_a: float = 5.0
    idt_b: float = 5.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if value < 0:
                raise ValueError(f"loss weight '{name}' must be non-negative, got {value}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.adv_ab, self.adv_ba, self.cyc, self.idt_a, self.idt_b)

    def as_dict(self) -> dict[str, float]:
        return {"adv_ab": self.adv_ab, "adv_ba": self.adv_ba, "cyc": self.cyc,
                "idt_a": self.idt_a, "idt_b": self.idt_b}

    @classmethod
    def parse(cls, text: str) -> "LossWeights":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 5:
            raise ValueError(f"expected 5 comma-separated weights, got {len(parts)}")
        return cls(*parts)


@dataclass
class LossBreakdown:
    """The five objective components and their weighted total."""

    adv_ab: Tensor
    adv_ba: Tensor
    cyc: Tensor
    idt_a: Tensor
    idt_b: Tensor
    total: Tensor

    def values(self) -> dict[str, float]:
        return {
            "adv_ab": self.adv_ab.item(),
            "adv_ba": self.adv_ba.item(),
            "cyc": self.cyc.item(),
            "idt_a": self.idt_a.item(),
            "idt_b": self.idt_b.item(),
            "total": self.total.item(),
        }


def _log_prob(p: Tensor) -> Tensor:
    return ad.reduce_mean(ad.log(ad.clamp(p, PROB_EPS, 1.0 - PROB_EPS)))


def adversarial_loss(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """Two-player value: log D(real) + log(1 - D(fake)), batch-mean per term.

    The discriminator ascends on this value (implemented as descending on its
    negation); see :func:`discriminator_loss`.
    """
    one_minus = 1.0 - ad.clamp(d_fake, PROB_EPS, 1.0 - PROB_EPS)
    return _log_prob(d_real) + ad.reduce_mean(ad.log(one_minus))


def discriminator_loss(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """What the discriminator minimizes: the negated adversarial value."""
    return -adversarial_loss(d_real, d_fake)


def discriminator_real_loss(d_real: Tensor) -> Tensor:
    """The real-sample half of the discriminator loss."""
    return -_log_prob(d_real)


def discriminator_fake_loss(d_fake: Tensor) -> Tensor:
    """The fake-sample half of the discriminator loss."""
    one_minus = 1.0 - ad.clamp(d_fake, PROB_EPS, 1.0 - PROB_EPS)
    return -ad.reduce_mean(ad.log(one_minus))


def generator_adversarial_loss(d_fake: Tensor, saturating: bool = False) -> Tensor:
    """Generator-side adversarial term.

    Non-saturating by default (minimize -log D(fake)); the saturating switch
    uses the raw value orientation (minimize log(1 - D(fake))).
    """
    if saturating:
        one_minus = 1.0 - ad.clamp(d_fake, PROB_EPS, 1.0 - PROB_EPS)
        return ad.reduce_mean(ad.log(one_minus))
    return -_log_prob(d_fake)


def mean_abs_error(x: Tensor, y: Tensor) -> Tensor:
    return ad.reduce_mean(ad.absolute(ad.sub(x, y)))


def cycle_loss(a_rec: Tensor, a: Tensor, b_rec: Tensor, b: Tensor) -> Tensor:
    """Mean absolute reconstruction error, summed over both directions."""
    return mean_abs_error(a_rec, a) + mean_abs_error(b_rec, b)


def identity_loss(g_of_b: Tensor, b: Tensor) -> Tensor:
    """Mean absolute deviation of a generator applied to its target domain."""
    return mean_abs_error(g_of_b, b)


def combined_loss(adv_ab: Tensor, adv_ba: Tensor, cyc: Tensor, idt_a: Tensor,
                  idt_b: Tensor, weights: LossWeights) -> LossBreakdown:
    """Linear combination of the five components under the given weights."""
    if not isinstance(weights, LossWeights):
        weights = LossWeights(*weights)
    components = (adv_ab, adv_ba, cyc, idt_a, idt_b)
    total = None
    for coeff, comp in zip(weights.as_tuple(), components):
        term = ad.scale(comp, coeff)
        total = term if total is None else ad.add(total, term)
    return LossBreakdown(adv_ab=adv_ab, adv_ba=adv_ba, cyc=cyc,
                         idt_a=idt_a, idt_b=idt_b, total=total)
