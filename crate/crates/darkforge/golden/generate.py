"""Regenerates the golden tensors with PyTorch autograd (float64).

Run from this directory: python3 generate.py
"""

import struct

import numpy as np
import torch
import torch.nn.functional as F

torch.set_default_dtype(torch.float64)
rng = np.random.default_rng(20240611)


def save(name, t):
    a = np.ascontiguousarray(t.detach().numpy() if torch.is_tensor(t) else t, dtype="<f8")
    header = "f64 " + " ".join(str(v) for v in (a.ndim, *a.shape)) + "\n"
    with open(name + ".f64", "wb") as f:
        f.write(header.encode("ascii"))
        f.write(a.tobytes())


def leaf(shape, lo=-1.0, hi=1.0):
    return torch.tensor(rng.uniform(lo, hi, size=shape), requires_grad=True)


def backward(y, prefix):
    g = torch.tensor(rng.uniform(-1, 1, size=tuple(y.shape)))
    save(prefix + ".cotangent", g)
    save(prefix + ".y", y)
    (y * g).sum().backward()


def conv():
    x, w, b = leaf((2, 4, 6, 5)), leaf((6, 2, 3, 3)), leaf((6,))
    y = F.conv2d(x, w, b, stride=2, padding=1, groups=2)
    save("conv.x", x), save("conv.w", w), save("conv.b", b)
    backward(y, "conv")
    save("conv.dx", x.grad), save("conv.dw", w.grad), save("conv.db", b.grad)


def bn(x, gamma, beta, eps):
    return F.batch_norm(x, None, None, gamma, beta, training=True, eps=eps)


def batchnorm():
    base = rng.uniform(-1, 1, size=(3, 4, 5, 5)) * np.array([1.0, 3.0, 0.5, 2.0])[None, :, None, None]
    x = torch.tensor(base + np.array([0.0, 2.0, -1.0, 5.0])[None, :, None, None], requires_grad=True)
    gamma, beta = leaf((4,), 0.5, 1.5), leaf((4,))
    y = bn(x, gamma, beta, 1e-5)
    save("bn.x", x), save("bn.gamma", gamma), save("bn.beta", beta)
    backward(y, "bn")
    save("bn.dx", x.grad), save("bn.dgamma", gamma.grad), save("bn.dbeta", beta.grad)


def fslconv():
    x = leaf((2, 4, 8, 8))
    w1, w2 = leaf((3, 4, 3, 3), -0.4, 0.4), leaf((3, 3, 3, 3), -0.4, 0.4)
    g1, b1, g2, b2 = leaf((3,), 0.5, 1.5), leaf((3,)), leaf((3,), 0.5, 1.5), leaf((3,))
    s1 = F.silu(bn(F.conv2d(x, w1, stride=2, padding=1), g1, b1, 1e-5))
    s2 = F.silu(bn(F.conv2d(s1, w2, stride=1, padding=1), g2, b2, 1e-5))
    y = torch.cat([s1, s2], dim=1)
    for n, t in [("x", x), ("w1", w1), ("w2", w2), ("gamma1", g1), ("beta1", b1), ("gamma2", g2), ("beta2", b2)]:
        save("fsl." + n, t)
    backward(y, "fsl")
    for n, t in [("x", x), ("w1", w1), ("w2", w2), ("gamma1", g1), ("beta1", b1), ("gamma2", g2), ("beta2", b2)]:
        save("fsl.d" + n, t.grad)


def snir():
    x, w, b = leaf((2, 3, 4, 5), -2, 2), leaf((3, 3, 1, 1)), leaf((3,))
    s = 2
    u = F.interpolate(x, scale_factor=s, mode="nearest") / (s * s)
    y = u * torch.sigmoid(F.conv2d(u, w, b))
    save("snir.x", x), save("snir.w", w), save("snir.b", b)
    backward(y, "snir")
    save("snir.dx", x.grad), save("snir.dw", w.grad), save("snir.db", b.grad)


def lapm():
    img = rng.uniform(0, 0.003, size=(8, 8, 3))
    img[2:5, 1:4] *= 4.0
    params = torch.tensor([1.3, -0.4, 0.8, 0.25], requires_grad=True)
    lam, tau, eps = 8.0, 0.02, 1e-8
    a = torch.tensor(img) * lam
    gray = 0.299 * a[..., 0] + 0.587 * a[..., 1] + 0.114 * a[..., 2]
    mask = (gray > tau).double()
    save("lapm.image", img), save("lapm.params", params), save("lapm.mask0", mask)
    w, bias, gamma, beta = params
    level = mask[None, None]
    total = 0
    for k in (1, 2):
        level = F.max_pool2d(level, 2)
        z = w * level[0, 0] + bias
        tex = (gamma * z + beta) / (1 + torch.exp(-z) + eps)
        save(f"lapm.mask{k}", level[0, 0])
        save(f"lapm.texture{k}", tex)
        g = torch.tensor(rng.uniform(-1, 1, size=tuple(tex.shape)))
        save(f"lapm.cotangent{k}", g)
        total = total + (tex * g).sum()
    total.backward()
    save("lapm.dparams", params.grad)


conv()
batchnorm()
fslconv()
snir()
lapm()
