import numpy as np
import pytest
import torch
from helpers import (
    analytic_grads,
    finite_difference_grads,
    grads_close,
    random_loss_instance,
)

from sgpad.losses import (
    CamInputs,
    LossBreakdown,
    LossConfig,
    alignment_term,
    batch_loss,
    compute_cam,
    cyborg_loss,
)
from sgpad.saliency import Granularity, SaliencyMap, SaliencySource


def make_inputs(features, weights, target=0):
    return CamInputs(
        torch.as_tensor(features, dtype=torch.float64),
        torch.as_tensor(weights, dtype=torch.float64),
        target,
    )


class TestComputeCam:
    def test_identity_weighting(self):
        fm = torch.rand(1, 3, 3, dtype=torch.float64)
        cam = compute_cam(make_inputs(fm, [[1.0]]))
        torch.testing.assert_close(cam, fm[0])

    def test_zero_weights(self):
        cam = compute_cam(make_inputs(torch.rand(2, 3, 3, dtype=torch.float64), [[0.0, 0.0]]))
        assert (cam == 0).all()

    def test_linear_combination_matches_pixel_loop(self):
        rng = np.random.default_rng(0)
        f1, f2 = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        cam = compute_cam(make_inputs(np.stack([f1, f2]), [[2.0, -1.0]]))
        # Oracle: explicit per-pixel loop of the weighted sum.
        expected = np.zeros((3, 4))
        for i in range(3):
            for j in range(4):
                expected[i, j] = 2.0 * f1[i, j] - 1.0 * f2[i, j]
        np.testing.assert_allclose(cam.numpy(), expected, atol=1e-12)

    def test_rejects_channel_mismatch(self):
        with pytest.raises(ValueError, match="channel mismatch"):
            make_inputs(torch.rand(3, 2, 2), [[1.0, 2.0]])

    def test_rejects_bad_target(self):
        with pytest.raises(ValueError, match="target_class"):
            make_inputs(torch.rand(1, 2, 2), [[1.0]], target=1)


class TestAlignmentTerm:
    def test_affine_cam_of_saliency_gives_zero(self):
        rng = np.random.default_rng(1)
        sal = rng.random((4, 4))
        cam = torch.as_tensor(3.0 * sal + 2.0)
        assert float(alignment_term(cam, sal)) == pytest.approx(0.0, abs=1e-12)

    def test_complementary_binary_grids_hit_the_upper_bound(self):
        cam = torch.tensor([[0.0, 1.0], [1.0, 0.0]], dtype=torch.float64)
        sal = np.array([[1.0, 0.0], [0.0, 1.0]])
        # Oracle: hand-evaluated MSE of complementary binary grids is 1.
        assert float(alignment_term(cam, sal)) == pytest.approx(1.0)

    def test_exact_affine_invariance_on_integer_grids(self):
        # Integer-valued grids keep every intermediate exact, so the
        # normalized values (and the term) are bitwise equal.
        rng = np.random.default_rng(2)
        cam = torch.as_tensor(rng.integers(-5, 6, (5, 5)).astype(float))
        sal = rng.random((5, 5))
        base = float(alignment_term(cam, sal))
        for a, b in [(3.0, 2.0), (7.0, -4.0), (2.0, 0.0)]:
            assert float(alignment_term(a * cam + b, sal)) == base

    def test_affine_invariance_general_floats(self):
        rng = np.random.default_rng(3)
        cam = torch.as_tensor(rng.normal(size=(6, 6)))
        sal = rng.random((6, 6))
        base = float(alignment_term(cam, sal))
        assert float(alignment_term(1.7 * cam + 0.3, sal)) == pytest.approx(base, abs=1e-12)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a = torch.as_tensor(rng.normal(size=(3, 3)))
            b = torch.as_tensor(rng.normal(size=(3, 3)))
            ab = float(alignment_term(a, b))
            ba = float(alignment_term(b, a))
            assert ab == pytest.approx(ba, abs=1e-12)
            assert 0.0 <= ab <= 1.0

    def test_pools_saliency_by_area_average(self):
        # 4x4 saliency onto a 2x2 cam: each quadrant collapses to its mean.
        sal = np.kron(np.array([[1.0, 0.0], [0.0, 1.0]]), np.ones((2, 2)))
        cam = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
        assert float(alignment_term(cam, sal)) == pytest.approx(0.0, abs=1e-12)

    def test_constant_cam_normalizes_to_zero(self):
        sal = np.array([[1.0, 0.0], [0.0, 1.0]])
        cam = torch.full((2, 2), 5.0, dtype=torch.float64)
        # Normalized cam is all-zero; saliency stays binary: MSE = mean(sal^2).
        assert float(alignment_term(cam, sal)) == pytest.approx(0.5)

    def test_rejects_saliency_smaller_than_cam(self):
        with pytest.raises(ValueError, match=">="):
            alignment_term(torch.zeros(4, 4), np.zeros((2, 2)))

    def test_accepts_saliency_map_objects(self):
        m = SaliencyMap(np.ones((4, 4)) * 0.5, Granularity.FOI, SaliencySource.SYNTHETIC)
        val = float(alignment_term(torch.rand(2, 2, dtype=torch.float64), m))
        assert 0.0 <= val <= 1.0


class TestCyborgLoss:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.logits = torch.as_tensor(rng.normal(size=2))
        self.inputs = make_inputs(rng.normal(size=(2, 2, 2)), rng.normal(size=(2, 2)))
        self.saliency = rng.random((2, 2))

    def test_alpha_one_is_pure_cross_entropy(self):
        bd = cyborg_loss(self.logits, 1, self.inputs, self.saliency, LossConfig(1.0))
        expected = torch.nn.functional.cross_entropy(self.logits[None], torch.tensor([1]))
        assert abs(float(bd.total) - float(expected)) < 1e-9
        assert float(bd.total) == pytest.approx(float(bd.classification_term), abs=1e-12)

    def test_alpha_zero_is_pure_alignment(self):
        bd = cyborg_loss(self.logits, 0, self.inputs, self.saliency, LossConfig(0.0))
        cam = compute_cam(make_inputs(self.inputs.feature_maps, self.inputs.class_weights, 0))
        expected = alignment_term(cam, self.saliency)
        assert abs(float(bd.total) - float(expected)) < 1e-9

    def test_total_is_affine_in_alpha(self):
        totals = {
            a: float(cyborg_loss(self.logits, 0, self.inputs, self.saliency, LossConfig(a)).total)
            for a in (0.0, 0.5, 1.0)
        }
        assert totals[0.5] == pytest.approx((totals[0.0] + totals[1.0]) / 2, abs=1e-9)

    def test_cam_uses_ground_truth_label(self):
        # target_class in the inputs is ignored; the label drives the CAM.
        inputs_wrong_target = make_inputs(
            self.inputs.feature_maps, self.inputs.class_weights, target=0
        )
        bd = cyborg_loss(self.logits, 1, inputs_wrong_target, self.saliency, LossConfig(0.0))
        cam1 = compute_cam(make_inputs(self.inputs.feature_maps, self.inputs.class_weights, 1))
        assert float(bd.total) == pytest.approx(float(alignment_term(cam1, self.saliency)))

    def test_rejects_bad_label(self):
        with pytest.raises(ValueError, match="label"):
            cyborg_loss(self.logits, 2, self.inputs, self.saliency, LossConfig(0.5))

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError, match="alpha"):
            LossConfig(1.5)

    def test_gradients_match_finite_differences_on_fixed_instance(self):
        rng = np.random.default_rng(11)
        logits, features, weights, label, saliency, _ = random_loss_instance(rng, max_c=2, max_hw=2)
        ga_l, ga_f = analytic_grads(logits, features, weights, label, saliency, 0.5)
        gn_l, gn_f = finite_difference_grads(logits, features, weights, label, saliency, 0.5)
        assert grads_close(ga_l, gn_l)
        assert grads_close(ga_f, gn_f)

    def test_gradients_match_on_random_instances(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            logits, features, weights, label, saliency, alpha = random_loss_instance(rng)
            ga_l, ga_f = analytic_grads(logits, features, weights, label, saliency, alpha)
            gn_l, gn_f = finite_difference_grads(logits, features, weights, label, saliency, alpha)
            assert grads_close(ga_l, gn_l)
            assert grads_close(ga_f, gn_f)

    def test_constant_cam_has_zero_alignment_gradient(self):
        features = torch.ones(1, 2, 2, dtype=torch.float64, requires_grad=True)
        inputs = CamInputs(features, torch.tensor([[1.0], [0.5]], dtype=torch.float64), 0)
        bd = cyborg_loss(
            torch.zeros(2, dtype=torch.float64), 0, inputs, np.array([[1.0, 0.0], [0.0, 1.0]]),
            LossConfig(0.0),
        )
        (grad,) = torch.autograd.grad(bd.total, features)
        assert (grad == 0).all()


class TestBatchLoss:
    def bd(self, total_cls, total_align, alpha):
        t = alpha * total_cls + (1 - alpha) * total_align
        dt = torch.float64
        return LossBreakdown(
            torch.tensor(t, dtype=dt),
            torch.tensor(total_cls, dtype=dt),
            torch.tensor(total_align, dtype=dt),
            alpha,
        )

    def test_single_element_identity(self):
        one = self.bd(0.4, 0.2, 0.5)
        out = batch_loss([one])
        assert float(out.total) == pytest.approx(float(one.total))
        assert out.alpha == one.alpha

    def test_mean_of_two(self):
        out = batch_loss([self.bd(0.2, 0.2, 0.5), self.bd(0.4, 0.4, 0.5)])
        assert float(out.total) == pytest.approx(0.3)

    def test_invariant_preserved(self):
        out = batch_loss([self.bd(0.9, 0.1, 0.25), self.bd(0.3, 0.7, 0.25)])
        recombined = 0.25 * float(out.classification_term) + 0.75 * float(out.alignment_term)
        assert float(out.total) == pytest.approx(recombined, abs=1e-9)

    def test_rejects_mixed_alpha(self):
        with pytest.raises(ValueError, match="alpha"):
            batch_loss([self.bd(0.1, 0.1, 0.5), self.bd(0.1, 0.1, 0.6)])

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="empty"):
            batch_loss([])


class TestLossBreakdownInvariant:
    def test_rejects_inconsistent_total(self):
        with pytest.raises(ValueError, match="inconsistent"):
            LossBreakdown(torch.tensor(1.0), torch.tensor(0.1), torch.tensor(0.1), 0.5)
