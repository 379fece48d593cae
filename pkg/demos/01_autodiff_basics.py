#!/usr/bin/env python3
"""Tour of the tensor engine: forward ops, backward, and a finite-difference check."""

import numpy as np

from vpiseg.tensor import Tensor, backward, conv2d, maxpool2d, upsample2x

rng = np.random.default_rng(0)

# scalar chain rule: d/dx sum(x*x) = 2x
x = Tensor(rng.random((3, 3)), requires_grad=True)
backward((x * x).sum())
print("grad of sum(x*x) equals 2x:", np.allclose(x.grad, 2 * x.data))

# convolution with an identity kernel reproduces its input
img = Tensor(rng.random((1, 1, 6, 6)))
ident = np.zeros((1, 1, 3, 3))
ident[0, 0, 1, 1] = 1.0
out = conv2d(img, Tensor(ident), Tensor(np.zeros(1)))
print("identity kernel preserves the image:", np.array_equal(out.data, img.data))

# pooling inverts nearest-neighbor upsampling
small = Tensor(rng.random((1, 2, 4, 4)))
print("maxpool(upsample(x)) == x:",
      np.array_equal(maxpool2d(upsample2x(small)).data, small.data))

# gradient of a small conv against central finite differences
xv = rng.random((1, 1, 5, 5))
wv = rng.random((2, 1, 3, 3)) - 0.5
x = Tensor(xv, requires_grad=True)
w = Tensor(wv, requires_grad=True)
backward(conv2d(x, w, Tensor(np.zeros(2))).sigmoid().sum())

h = 1e-5
i = 4  # check one weight element
flat = wv.reshape(-1)
orig = flat[i]
flat[i] = orig + h
fp = conv2d(Tensor(xv), Tensor(wv), Tensor(np.zeros(2))).sigmoid().sum().item()
flat[i] = orig - h
fm = conv2d(Tensor(xv), Tensor(wv), Tensor(np.zeros(2))).sigmoid().sum().item()
flat[i] = orig
numeric = (fp - fm) / (2 * h)
analytic = w.grad.reshape(-1)[i]
print(f"conv weight grad: analytic {analytic:.8f} vs finite-diff {numeric:.8f}")
