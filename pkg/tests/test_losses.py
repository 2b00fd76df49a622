"""Objective oracles: analytic values, brute-force comparisons, linearity."""

import math

import numpy as np
import pytest

from cyclenas import autodiff as ad
from cyclenas.autodiff import Tensor, check_gradients
from cyclenas.losses import (
    LossWeights,
    adversarial_loss,
    combined_loss,
    cycle_loss,
    discriminator_fake_loss,
    discriminator_loss,
    discriminator_real_loss,
    generator_adversarial_loss,
    identity_loss,
)


class TestAdversarial:
    def test_coin_flip_discriminator(self):
        val = adversarial_loss(Tensor(0.5), Tensor(0.5)).item()
        assert val == pytest.approx(2 * math.log(0.5), abs=1e-6)
        assert val == pytest.approx(-1.386294, abs=1e-6)

    def test_perfect_discriminator_near_zero(self):
        val = adversarial_loss(Tensor(1.0 - 1e-7), Tensor(1e-7)).item()
        assert abs(val) < 1e-5

    def test_hand_evaluated_point(self):
        val = adversarial_loss(Tensor(0.9), Tensor(0.1)).item()
        assert val == pytest.approx(math.log(0.9) + math.log(0.9), abs=1e-9)
        assert val == pytest.approx(-0.21072, abs=1e-5)

    def test_clamping_makes_extremes_safe(self):
        val = adversarial_loss(Tensor(0.0), Tensor(1.0)).item()
        assert np.isfinite(val)

    def test_discriminator_loss_is_negation(self):
        d_real, d_fake = Tensor(0.7), Tensor(0.2)
        assert discriminator_loss(d_real, d_fake).item() == pytest.approx(
            -adversarial_loss(d_real, d_fake).item())
        half_sum = (discriminator_real_loss(d_real).item()
                    + discriminator_fake_loss(d_fake).item())
        assert half_sum == pytest.approx(discriminator_loss(d_real, d_fake).item())

    def test_gradient_wrt_fake_probability(self):
        def graph(inputs):
            return adversarial_loss(Tensor(0.5), inputs[0])

        d_fake = Tensor(np.asarray(0.3))
        report = check_gradients(graph, [d_fake], tol=1e-6)
        assert report.passed
        # analytic slope of log(1 - p)
        d_fake.grad = None
        graph([d_fake]).backward()
        assert d_fake.grad == pytest.approx(-1.0 / (1.0 - 0.3), rel=1e-9)

    def test_generator_orientations(self):
        d_fake = Tensor(0.3)
        assert generator_adversarial_loss(d_fake).item() == pytest.approx(-math.log(0.3))
        assert generator_adversarial_loss(d_fake, saturating=True).item() == pytest.approx(
            math.log(0.7))


class TestCycleAndIdentity:
    def test_perfect_reconstruction(self):
        a = Tensor(np.random.default_rng(0).normal(size=(1, 3, 4, 4)))
        b = Tensor(np.random.default_rng(1).normal(size=(1, 3, 4, 4)))
        assert cycle_loss(a, a, b, b).item() == 0.0

    def test_constant_offset(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(1, 3, 4, 4))
        b = rng.normal(size=(1, 3, 4, 4))
        val = cycle_loss(Tensor(a + 0.1), Tensor(a), Tensor(b), Tensor(b)).item()
        assert val == pytest.approx(0.1, abs=1e-12)

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(3)
        a_rec, a = rng.normal(size=(2, 3, 5, 5)), rng.normal(size=(2, 3, 5, 5))
        b_rec, b = rng.normal(size=(2, 3, 5, 5)), rng.normal(size=(2, 3, 5, 5))
        expected = (np.abs(a_rec - a).sum() / a.size
                    + np.abs(b_rec - b).sum() / b.size)
        got = cycle_loss(Tensor(a_rec), Tensor(a), Tensor(b_rec), Tensor(b)).item()
        assert got == pytest.approx(expected, abs=1e-12)

    def test_identity_examples(self):
        rng = np.random.default_rng(4)
        b = rng.normal(size=(1, 3, 4, 4))
        assert identity_loss(Tensor(b), Tensor(b)).item() == 0.0
        assert identity_loss(Tensor(b - 0.25), Tensor(b)).item() == pytest.approx(0.25)
        g_of_b = rng.normal(size=b.shape)
        expected = np.abs(g_of_b - b).sum() / b.size
        assert identity_loss(Tensor(g_of_b), Tensor(b)).item() == pytest.approx(
            expected, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            identity_loss(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((1, 3, 2, 2))))

    def test_sign_flip_symmetry(self):
        rng = np.random.default_rng(5)
        x, y = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
        assert identity_loss(Tensor(-x), Tensor(-y)).item() == pytest.approx(
            identity_loss(Tensor(x), Tensor(y)).item(), abs=1e-15)


class TestCombined:
    def test_unit_components_default_weights(self):
        one = Tensor(1.0)
        bd = combined_loss(one, one, one, one, one, LossWeights())
        assert bd.total.item() == pytest.approx(22.0, abs=0.0)

    def test_adversarial_only(self):
        vals = [Tensor(v) for v in (0.3, 0.4, 9.9, 9.9, 9.9)]
        bd = combined_loss(*vals, LossWeights(1, 1, 0, 0, 0))
        assert bd.total.item() == pytest.approx(0.7)

    def test_hand_summed_point(self):
        two_log_half = 2 * math.log(0.5)
        comps = [Tensor(v) for v in (two_log_half, two_log_half, 0.2, 0.1, 0.1)]
        bd = combined_loss(*comps, LossWeights())
        assert bd.total.item() == pytest.approx(3.0 + 4 * math.log(0.5), abs=1e-12)
        assert bd.total.item() == pytest.approx(0.2274113, abs=1e-6)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            LossWeights(1, 1, -10, 5, 5)

    def test_linearity_in_each_component(self):
        rng = np.random.default_rng(6)
        base = [float(v) for v in rng.normal(size=5)]
        weights = LossWeights(*np.abs(rng.normal(size=5)))
        f0 = combined_loss(*[Tensor(v) for v in base], weights).total.item()
        for i, lam in enumerate(weights.as_tuple()):
            bumped = list(base)
            bumped[i] += 1e-3
            f1 = combined_loss(*[Tensor(v) for v in bumped], weights).total.item()
            assert (f1 - f0) / 1e-3 == pytest.approx(lam, rel=1e-6)

    def test_identity_generators_leave_only_adversarial(self):
        # with both generators acting as the identity the reconstruction and
        # identity terms vanish on any batch
        rng = np.random.default_rng(7)
        a = Tensor(rng.normal(size=(1, 3, 4, 4)))
        b = Tensor(rng.normal(size=(1, 3, 4, 4)))
        identity = lambda img: img
        fake_b, fake_a = identity(a), identity(b)
        cyc = cycle_loss(identity(fake_b), a, identity(fake_a), b)
        idt_a = identity_loss(identity(b), b)
        idt_b = identity_loss(identity(a), a)
        adv = Tensor(-1.0)
        bd = combined_loss(adv, adv, cyc, idt_a, idt_b, LossWeights())
        assert cyc.item() == 0.0
        assert idt_a.item() == 0.0 and idt_b.item() == 0.0
        assert bd.total.item() == pytest.approx(-2.0)

    def test_parse_weights(self):
        w = LossWeights.parse("1,1,10,5,5")
        assert w == LossWeights()
        with pytest.raises(ValueError, match="5 comma-separated"):
            LossWeights.parse("1,2,3")
