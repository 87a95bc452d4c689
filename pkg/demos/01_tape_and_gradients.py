"""A tour of the reverse-mode tape that powers training.

Builds a two-layer perceptron by hand, pulls gradients back through a
scalar loss, then runs the same finite-difference cross-check the test
suite applies to every objective variant. Everything is plain numpy
underneath; the tape records just enough to replay the chain rule.
"""

import numpy as np

from latentprobe import autodiff as ad
from latentprobe.nn import MlpSpec, grad_check, init_mlp, mlp_forward


def main():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((8, 3))

    w1 = ad.Var(0.5 * rng.standard_normal((3, 4)))
    w2 = ad.Var(0.5 * rng.standard_normal((4, 1)))
    out = ad.matmul(ad.relu(ad.matmul(x, w1)), w2)
    loss = ad.vmean(ad.square(out))
    ad.backward(loss)
    print("hand-built network, loss = mean((relu(x w1) w2)^2)")
    print(f"  loss value      {float(ad.data_of(loss)):.6f}")
    print(f"  dL/dw2          {np.round(w2.grad.ravel(), 4)}")
    print(f"  dL/dw1 row 0    {np.round(w1.grad[0], 4)}")

    spec = MlpSpec(widths=(3, 8, 2), activation="relu")
    params = init_mlp(spec, rng)

    def f(leaves):
        return ad.vmean(ad.square(mlp_forward(spec, leaves, x)))

    gap = grad_check(f, params, h=1e-5)
    print("\nfull MLP against central finite differences")
    print(f"  parameter tensors checked  {len(params)}")
    print(f"  max relative gradient gap  {gap:.2e}")


if __name__ == "__main__":
    main()
