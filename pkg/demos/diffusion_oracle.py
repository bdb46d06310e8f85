"""
Forward noising and an oracle reverse chain
-------------------------------------------

With a linear schedule the marginal of x_t is known in closed form. A
predictor that knows the clean target returns the exact noise, and the
reverse chain then lands on that target.
"""

import math

import numpy as np

from eegdiff import diffusion as dm

s = dm.make_linear_schedule(100)
rng = np.random.default_rng(0)

x0 = 2.0 * rng.standard_normal(100_000)
for t in (1, 10, 50, 100):
    xt = dm.forward_diffuse(x0, np.full(x0.shape, t), rng.standard_normal(x0.shape), s)
    ab = s.alpha_bar(t)
    print(f"t={t:3d}  alpha_bar={ab:.4f}  var(x_t)={xt.var():.4f}  predicted={ab * x0.var() + 1 - ab:.4f}")

target = np.sin(2 * np.pi * 10 * np.arange(256) / 250.0)[None].repeat(4, axis=0)


def oracle(y, t, labels):
    ab = s.alpha_bar(t)
    return (y - math.sqrt(ab) * target) / math.sqrt(1 - ab)


out = dm.sample_batch(oracle, [0], s, target.shape, seed=1)[0]
print("oracle chain max |error|:", np.abs(out - target).max())

# a predictor that always says "no noise" only rescales the start
one = dm.make_linear_schedule(1, 0.5, 0.5)
y = dm.sample_batch(lambda y, t, l: np.zeros_like(y), [0], one, (1, 4), seed=2)
print("zero predictor, T=1:", y.ravel(), "=", np.random.default_rng(2).standard_normal(4) / math.sqrt(0.5))
