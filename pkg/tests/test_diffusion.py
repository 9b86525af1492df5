import numpy as np
import pytest
import torch

from cage.diffusion import (
    ConditionMask,
    build_schedule,
    ddpm_step,
    q_sample,
    sample,
    sample_timesteps,
    training_loss,
    valid_slot_mask,
)
from cage.schema import ArticulationGraph, SchemaError, encode
from cage.synthetic import generate_object


def cumprod_oracle(T=1000, beta_min=1e-4, beta_max=0.02):
    # one-line style loop: alpha_bar via explicit cumulative product
    alpha_bar = 1.0
    for beta in np.linspace(beta_min, beta_max, T):
        alpha_bar *= 1.0 - beta
    return alpha_bar


class TestSchedule:
    def test_endpoint_values(self):
        s = build_schedule()
        assert s.alpha_bar(1) == pytest.approx(0.9999, abs=1e-12)
        assert s.beta(1000) == pytest.approx(0.02, abs=1e-15)
        assert s.beta(1) == pytest.approx(1e-4, abs=1e-15)

    def test_final_alpha_bar_matches_oracle(self):
        s = build_schedule()
        assert abs(s.alpha_bar(1000) - cumprod_oracle()) < 1e-10
        assert s.alpha_bar(1000) < 1e-4

    def test_monotonicity_invariants(self):
        s = build_schedule()
        assert np.all(np.diff(s.betas[1:]) > 0)
        assert np.all(np.diff(s.alpha_bars) < 0)

    def test_invalid_bounds_rejected(self):
        for beta_min, beta_max in ((0.0, 0.02), (0.02, 0.01), (1e-4, 1.0)):
            with pytest.raises(ValueError):
                build_schedule(1000, beta_min, beta_max)

    def test_cached(self):
        assert build_schedule() is build_schedule()


class TestQSample:
    def test_zero_noise_scales_signal(self):
        s = build_schedule()
        x0 = torch.randn(5, 8, 6, dtype=torch.float64)
        for t in (1, 500, 1000):
            out = q_sample(x0, t, torch.zeros_like(x0), s)
            torch.testing.assert_close(out, np.sqrt(s.alpha_bar(t)) * x0)

    def test_zero_signal_scales_noise(self):
        s = build_schedule()
        eps = torch.randn(5, 8, 6, dtype=torch.float64)
        out = q_sample(torch.zeros_like(eps), 700, eps, s)
        torch.testing.assert_close(out, np.sqrt(1 - s.alpha_bar(700)) * eps)

    def test_variance_matches_one_minus_alpha_bar(self):
        # Monte-Carlo oracle over 2e4 draws
        s = build_schedule()
        gen = torch.Generator().manual_seed(0)
        t = 400
        x0 = torch.full((1, 1, 1), 0.3, dtype=torch.float64)
        draws = torch.stack(
            [q_sample(x0, t, torch.randn(x0.shape, generator=gen, dtype=torch.float64), s)
             for _ in range(20000)]
        )
        var = draws.var().item()
        expected = 1 - s.alpha_bar(t)
        assert abs(var - expected) < 0.02 * expected + 0.005

    def test_stepwise_chain_matches_closed_form_marginal(self):
        # applying the one-step kernel t times has the closed-form marginal
        s = build_schedule()
        gen = torch.Generator().manual_seed(1)
        t, n = 50, 4000
        x0 = 0.7
        x = torch.full((n,), x0, dtype=torch.float64)
        for step in range(1, t + 1):
            a = s.alpha(step)
            x = np.sqrt(a) * x + np.sqrt(1 - a) * torch.randn(n, generator=gen, dtype=torch.float64)
        mean_expected = np.sqrt(s.alpha_bar(t)) * x0
        var_expected = 1 - s.alpha_bar(t)
        assert abs(x.mean().item() - mean_expected) < 4 * np.sqrt(var_expected / n)
        assert abs(x.var().item() - var_expected) < 0.1 * var_expected


def overfit_object():
    parts, graph = generate_object("Microwave", np.random.default_rng(5))
    return torch.from_numpy(encode(parts, graph)), graph


class TestTrainingLoss:
    def test_perfect_denoiser_gives_zero(self):
        x0, graph = overfit_object()
        s = build_schedule()
        captured = {}

        def perfect(x_t, t, cats, graphs):
            return captured["eps"].unsqueeze(0)

        gen = torch.Generator().manual_seed(3)
        eps = torch.randn(x0.shape, generator=gen, dtype=x0.dtype)
        captured["eps"] = eps
        loss = training_loss(perfect, x0, graph, "Microwave", t=123, eps=eps)
        assert loss.item() == 0.0

    def test_zero_denoiser_loss_near_one(self):
        x0, graph = overfit_object()
        zero = lambda x_t, t, cats, graphs: torch.zeros_like(x_t)
        gen = torch.Generator().manual_seed(0)
        losses = [
            training_loss(zero, x0, graph, "Microwave", rng=gen).item() for _ in range(200)
        ]
        assert np.mean(losses) == pytest.approx(1.0, abs=0.05)

    def test_padded_slots_do_not_affect_loss(self):
        x0, graph = overfit_object()
        zero = lambda x_t, t, cats, graphs: torch.zeros_like(x_t)
        gen1 = torch.Generator().manual_seed(7)
        gen2 = torch.Generator().manual_seed(7)
        x0_dirty = x0.clone()
        x0_dirty[:, graph.num_parts:, :] = 99.0
        l1 = training_loss(zero, x0, graph, "Microwave", rng=gen1)
        l2 = training_loss(zero, x0_dirty, graph, "Microwave", rng=gen2)
        assert l1.item() == l2.item()


class TestDdpmStep:
    def test_t1_deterministic(self):
        x = torch.randn(5, 8, 6, dtype=torch.float64)
        eps_hat = torch.randn_like(x)
        a = ddpm_step(x, eps_hat, 1)
        b = ddpm_step(x, eps_hat, 1)
        torch.testing.assert_close(a, b)
        s = build_schedule()
        expected = (x - s.beta(1) / np.sqrt(1 - s.alpha_bar(1)) * eps_hat) / np.sqrt(s.alpha(1))
        torch.testing.assert_close(a, expected)

    def test_true_noise_contracts_toward_x0(self):
        # Monte-Carlo: stepping with the exact noise moves closer to x0
        s = build_schedule()
        gen = torch.Generator().manual_seed(2)
        t = 600
        x0 = torch.randn(5, 8, 6, generator=gen, dtype=torch.float64)
        d_before, d_after = [], []
        for _ in range(300):
            eps = torch.randn(x0.shape, generator=gen, dtype=torch.float64)
            x_t = q_sample(x0, t, eps, s)
            x_prev = ddpm_step(x_t, eps, t, s, rng=gen)
            d_before.append((x_t - x0).norm().item())
            d_after.append((x_prev - x0).norm().item())
        assert np.mean(d_after) < np.mean(d_before)

    def test_small_beta_keeps_x(self):
        s = build_schedule()
        x = torch.randn(5, 8, 6, dtype=torch.float64)
        out = ddpm_step(x, torch.zeros_like(x), 1, s)
        torch.testing.assert_close(out, x / np.sqrt(s.alpha(1)))
        assert (out - x).abs().max().item() < 1e-3

    def test_rejects_t_below_one(self):
        x = torch.zeros(5, 8, 6)
        with pytest.raises(ValueError):
            ddpm_step(x, x, 0)


class TestSampler:
    def test_timestep_subsequence(self):
        ts = sample_timesteps(1000, 100)
        assert len(ts) == 100 and ts[0] == 1000 and ts[-1] == 10
        assert all(a - b == 10 for a, b in zip(ts, ts[1:]))

    def test_full_condition_passthrough(self):
        parts, graph = generate_object("Safe", np.random.default_rng(2))
        x0 = encode(parts, graph)
        mask = np.zeros_like(x0)
        mask[:, : graph.num_parts, :] = 1
        cond = ConditionMask(mask, x0)
        zero = lambda x_t, t, cats, graphs: torch.zeros_like(x_t)
        out = sample(zero, graph, "Safe", steps=25, condition=cond, seed=3)
        assert np.array_equal(out, x0 * mask)

    def test_seed_determinism_and_padding(self):
        parts, graph = generate_object("Table", np.random.default_rng(4))
        zero = lambda x_t, t, cats, graphs: torch.zeros_like(x_t)
        a = sample(zero, graph, "Table", steps=50, seed=11)
        b = sample(zero, graph, "Table", steps=50, seed=11)
        c = sample(zero, graph, "Table", steps=50, seed=12)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert np.all(a[:, graph.num_parts:, :] == 0)
        assert np.isfinite(a).all()

    def test_partial_condition_bits_exact(self):
        parts, graph = generate_object("Oven", np.random.default_rng(8))
        x0 = encode(parts, graph)
        mask = np.zeros_like(x0)
        mask[0, : graph.num_parts, :] = 1  # bbox rows only
        cond = ConditionMask(mask, x0 * mask)
        zero = lambda x_t, t, cats, graphs: torch.zeros_like(x_t)
        out = sample(zero, graph, "Oven", steps=25, condition=cond, seed=9)
        assert np.array_equal(out[mask > 0], x0[mask > 0])
        assert not np.array_equal(out[0], out[1])  # unconditioned rows differ

    def test_condition_on_padded_nodes_rejected(self):
        parts, graph = generate_object("Safe", np.random.default_rng(2))
        mask = np.zeros((5, graph.max_nodes, 6))
        mask[0, graph.num_parts, :] = 1
        cond = ConditionMask(mask, np.zeros_like(mask))
        zero = lambda x_t, t, cats, graphs: torch.zeros_like(x_t)
        with pytest.raises(SchemaError, match="padded"):
            sample(zero, graph, "Safe", steps=10, condition=cond, seed=0)
