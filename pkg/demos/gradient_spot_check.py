"""Spot-check the hand-written backward pass against finite differences.

The head's gradients are derived by hand (layer norm included), so this
script picks a handful of coordinates and prints analytic vs numeric
side by side. The full sweep over every coordinate lives in the tests.
"""

from dataclasses import replace

import numpy as np

from embedfuse.head import cosine_loss, head_backward, head_forward, init_head_params

rng = np.random.Generator(np.random.Philox(key=99))
params = init_head_params(8, 8, seed=3)
# init_head_params starts gains at 1 and biases at 0; nudge everything so
# the check does not run at a symmetric point.
params = replace(
    params,
    norm1_gain=params.norm1_gain + rng.normal(0, 0.2, 8),
    norm2_bias=params.norm2_bias + rng.normal(0, 0.2, 8),
    alpha_fusion_logit=0.37,
)

x = rng.normal(0, 1, 8)
target = rng.normal(0, 1, 8)
loss, grads = head_backward(params, head_forward(params, x), target)
print(f"loss at this point: {loss:.6f}")

step = 1e-5
print(f"{'coordinate':22s} {'analytic':>12s} {'numeric':>12s} {'rel err':>10s}")
for field, idx in [
    ("fc1_weight", (2, 3)),
    ("fc1_bias", (5,)),
    ("norm1_gain", (0,)),
    ("fc2_weight", (7, 1)),
    ("norm2_bias", (4,)),
]:
    base = getattr(params, field)
    plus, minus = base.copy(), base.copy()
    plus[idx] += step
    minus[idx] -= step
    up = cosine_loss(
        head_forward(replace(params, **{field: plus}), x).final_text_emb, target
    )
    down = cosine_loss(
        head_forward(replace(params, **{field: minus}), x).final_text_emb, target
    )
    numeric = (up - down) / (2 * step)
    analytic = getattr(grads, field)[idx]
    rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
    print(f"{field}{str(list(idx)):10s} {analytic:12.8f} {numeric:12.8f} {rel:10.2e}")

up = cosine_loss(
    head_forward(replace(params, alpha_fusion_logit=0.37 + step), x).final_text_emb,
    target,
)
down = cosine_loss(
    head_forward(replace(params, alpha_fusion_logit=0.37 - step), x).final_text_emb,
    target,
)
numeric = (up - down) / (2 * step)
rel = abs(grads.alpha_fusion_logit - numeric) / max(
    abs(grads.alpha_fusion_logit), abs(numeric), 1e-8
)
print(f"{'fusion logit':22s} {grads.alpha_fusion_logit:12.8f} "
      f"{numeric:12.8f} {rel:10.2e}")
