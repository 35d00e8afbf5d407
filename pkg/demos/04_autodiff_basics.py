"""Walkthrough: the reverse-mode autodiff core the model is built on.

Run:  python3 demos/04_autodiff_basics.py
"""

import numpy as np

from inductive_qe import autodiff as ad
from inductive_qe.autodiff import AdamState, Tape, Tensor, adam_step, backward
from inductive_qe.gradcheck import primitive_suite

# ---------------------------------------------------------------------------
# Tensors record onto a tape; backward() replays it in reverse.
# ---------------------------------------------------------------------------
x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
w = Tensor(np.eye(3) * 2.0, requires_grad=True)

with Tape() as tape:
    y = ad.matmul(w, x)            # (3,)
    loss = ad.dot(y, y)            # scalar: ||2x||^2
    backward(loss, tape)

print("loss:", loss.item())
print("d loss / d x:", x.grad)     # 8x
print("d loss / d w diag:", np.diag(w.grad))

# ---------------------------------------------------------------------------
# Broadcasting is handled in the backward pass too.
# ---------------------------------------------------------------------------
a = Tensor(np.ones((4, 3)), requires_grad=True)
b = Tensor(np.arange(3.0), requires_grad=True)
with Tape() as tape:
    backward(ad.reduce_sum(ad.mul(a, b)), tape)
print("\nbroadcast grad for b (summed over rows):", b.grad)

# ---------------------------------------------------------------------------
# A couple of Adam steps on a 1-d quadratic.
# ---------------------------------------------------------------------------
p = {"w": Tensor(5.0, requires_grad=True)}
state = AdamState(lr=0.5)
for i in range(40):
    with Tape() as tape:
        loss = ad.mul(p["w"], p["w"])
        backward(loss, tape)
    adam_step(p, state)
    ad.zero_grads(p)
print(f"\nafter {state.step} Adam steps on w^2: w = {p['w'].item():.4f}")

# ---------------------------------------------------------------------------
# Every primitive is finite-difference checked.
# ---------------------------------------------------------------------------
print("\nfinite-difference check of all primitives:")
worst = max(err for _, err in primitive_suite(seed=0))
for name, err in primitive_suite(seed=0):
    print(f"  {name:<22} max rel err {err:.2e}")
print(f"worst: {worst:.2e}")
