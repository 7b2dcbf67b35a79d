"""The grasp net under the hood: forward pass, gradients, RMSProp updates.

Run:  python demos/04_network_and_updates.py
"""

import numpy as np

from advgrasp import tinynet

spec = tinynet.default_net_spec(out_dim=18)
params = tinynet.init_params(spec, rng_seed=0)
print(f"Network: {len(spec.layers)} layers, {params.num_params()} parameters")
for layer in spec.layers:
    print("  ", layer)

rng = np.random.default_rng(1)
patch = rng.uniform(0.0, 1.0, size=(32, 32))
out = tinynet.forward(params, patch)
print(f"\nForward on a random patch: 18 probabilities in "
      f"[{out.min():.3f}, {out.max():.3f}]")

print("\nGradient check against central finite differences")
print("=================================================")
grads = tinynet.backward(params, patch, angle_idx=4, target=1.0)
eps = 1e-5
worst = 0.0
for li, layer in enumerate(params.layers):
    flat = layer["w"].ravel()
    gflat = grads[li]["w"].ravel()
    for i in rng.choice(flat.size, size=5, replace=False):
        orig = flat[i]
        flat[i] = orig + eps
        lp = tinynet.bce_loss(tinynet.forward(params, patch)[4], 1.0)
        flat[i] = orig - eps
        lm = tinynet.bce_loss(tinynet.forward(params, patch)[4], 1.0)
        flat[i] = orig
        num = (lp - lm) / (2 * eps)
        if max(abs(num), abs(gflat[i])) > 1e-6:
            worst = max(worst, abs(num - gflat[i]) / max(abs(num), abs(gflat[i])))
print(f"  worst relative error over sampled coordinates: {worst:.2e}")

print("\nTen RMSProp steps on one example drive its loss down")
print("====================================================")
opt = tinynet.init_opt_state(params, lr=1e-3)
p = params
for step in range(10):
    loss = tinynet.bce_loss(tinynet.forward(p, patch)[4], 1.0)
    if step % 3 == 0:
        print(f"  step {step}: loss {loss:.4f}")
    grads = tinynet.backward(p, patch, 4, 1.0)
    p, opt = tinynet.rmsprop_step(p, grads, opt)
print(f"  final:  loss {tinynet.bce_loss(tinynet.forward(p, patch)[4], 1.0):.4f}")
