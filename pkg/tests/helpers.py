"""Independent oracle implementations shared by unit and acceptance tests.

Deliberately brute-force: these re-derive expected values by enumeration
or finite differences, independent of the library code paths they check.
"""
from __future__ import annotations

import numpy as np
import torch

from sgpad.losses import CamInputs, LossConfig, cyborg_loss


def brute_force_auc(bona_scores, spoof_scores) -> float:
    """All-pairs AUC: wins + half-ties over all (spoof, bonafide) pairs."""
    wins = 0.0
    for s in spoof_scores:
        for b in bona_scores:
            if s > b:
                wins += 1.0
            elif s == b:
                wins += 0.5
    return wins / (len(bona_scores) * len(spoof_scores))


def error_rates_at(threshold, bona_scores, spoof_scores):
    """(FPR, FNR) for the decision rule: score > threshold means spoof."""
    bona = np.asarray(bona_scores, dtype=float)
    spoof = np.asarray(spoof_scores, dtype=float)
    fpr = float(np.mean(bona > threshold))
    fnr = float(np.mean(spoof <= threshold))
    return fpr, fnr


def threshold_candidates(scores):
    """Midpoints between adjacent distinct scores plus infinite sentinels."""
    distinct = np.unique(np.asarray(scores, dtype=float))
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate(([-np.inf], mids, [np.inf]))


def eer_threshold_scan(bona_scores, spoof_scores) -> float:
    """Exhaustive scan for the |FPR - FNR|-minimizing candidate threshold."""
    best_t, best_gap = None, None
    for t in threshold_candidates(list(bona_scores) + list(spoof_scores)):
        fpr, fnr = error_rates_at(t, bona_scores, spoof_scores)
        gap = abs(fpr - fnr)
        if best_gap is None or gap < best_gap or (gap == best_gap and t < best_t):
            best_t, best_gap = t, gap
    return best_t


def fnr_at_fpr_scan(bona_scores, spoof_scores, target_fpr) -> float:
    """Smallest candidate threshold with FPR <= target, then its FNR.

    Candidates include the observed scores themselves so the exact
    crossover point is always scanned.
    """
    all_scores = np.asarray(list(bona_scores) + list(spoof_scores), dtype=float)
    candidates = np.sort(np.concatenate((threshold_candidates(all_scores), np.unique(all_scores))))
    for t in candidates:
        fpr, fnr = error_rates_at(t, bona_scores, spoof_scores)
        if fpr <= target_fpr:
            return fnr
    raise AssertionError("unreachable: +inf sentinel always satisfies FPR <= target")


def random_loss_instance(rng: np.random.Generator, k=2, max_c=4, max_hw=4):
    """Random tiny loss instance with min/max tie margins wide enough for
    central finite differences (step 1e-4) to stay on one smooth piece."""
    c = int(rng.integers(1, max_c + 1))
    h = int(rng.integers(1, max_hw + 1))
    w = int(rng.integers(1, max_hw + 1))
    while True:
        logits = rng.normal(0, 2, size=k)
        features = rng.normal(0, 1, size=(c, h, w))
        weights = rng.normal(0, 1, size=(k, c))
        label = int(rng.integers(0, k))
        cam = np.einsum("c,chw->hw", weights[label], features)
        flat = np.sort(cam.ravel())
        if flat.size >= 2 and (flat[1] - flat[0] < 1e-2 or flat[-1] - flat[-2] < 1e-2):
            continue  # resample: near-tied extremes make the loss locally non-smooth
        saliency = rng.random((h, w))
        if saliency.size >= 2:
            s = np.sort(saliency.ravel())
            if s[1] - s[0] < 1e-6 or s[-1] - s[-2] < 1e-6:
                continue
        alpha = float(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]))
        return logits, features, weights, label, saliency, alpha


def loss_total(logits, features, weights, label, saliency, alpha) -> float:
    lt = torch.as_tensor(logits, dtype=torch.float64)
    ft = torch.as_tensor(features, dtype=torch.float64)
    wt = torch.as_tensor(weights, dtype=torch.float64)
    breakdown = cyborg_loss(
        lt, label, CamInputs(ft, wt, 0), torch.as_tensor(saliency), LossConfig(alpha)
    )
    return float(breakdown.total)


def analytic_grads(logits, features, weights, label, saliency, alpha):
    """Autograd gradients of the blended total w.r.t. logits and features."""
    lt = torch.as_tensor(logits, dtype=torch.float64).clone().requires_grad_(True)
    ft = torch.as_tensor(features, dtype=torch.float64).clone().requires_grad_(True)
    wt = torch.as_tensor(weights, dtype=torch.float64)
    breakdown = cyborg_loss(
        lt, label, CamInputs(ft, wt, 0), torch.as_tensor(saliency), LossConfig(alpha)
    )
    gl, gf = torch.autograd.grad(breakdown.total, (lt, ft), allow_unused=True)
    gl = torch.zeros_like(lt) if gl is None else gl
    gf = torch.zeros_like(ft) if gf is None else gf
    return gl.detach().numpy(), gf.detach().numpy()


def finite_difference_grads(logits, features, weights, label, saliency, alpha, step=1e-4):
    """Central finite differences of the blended total, entry by entry."""
    logits = np.asarray(logits, dtype=float)
    features = np.asarray(features, dtype=float)

    def f(lg, ft):
        return loss_total(lg, ft, weights, label, saliency, alpha)

    g_logits = np.zeros_like(logits)
    for i in range(logits.size):
        up, down = logits.copy(), logits.copy()
        up.flat[i] += step
        down.flat[i] -= step
        g_logits.flat[i] = (f(up, features) - f(down, features)) / (2 * step)
    g_features = np.zeros_like(features)
    for i in range(features.size):
        up, down = features.copy(), features.copy()
        up.flat[i] += step
        down.flat[i] -= step
        g_features.flat[i] = (f(logits, up) - f(logits, down)) / (2 * step)
    return g_logits, g_features


def grads_close(analytic, numeric, rel_tol=1e-3, abs_floor=1e-7) -> bool:
    """Relative comparison with a small absolute floor for near-zero entries
    (central differences bottom out around 1e-8 at step 1e-4)."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), abs_floor / rel_tol)
    return bool((np.abs(a - n) <= rel_tol * denom).all())
