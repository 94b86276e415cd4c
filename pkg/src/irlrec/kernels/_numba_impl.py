"""numba @njit twins of the kernels in ``_numpy_impl``.

Matrix products go through np.dot (BLAS); elementwise chains are fused
into single passes, which is where the JIT pays off at the small batch
sizes this package runs at. fastmath stays off so both backends agree
to roundoff.
"""

import numpy as np
from numba import njit

ACT_IDENTITY = 0
ACT_RELU = 1
ACT_TANH = 2
ACT_SIGMOID = 3


@njit(cache=True)
def affine(x, W, b):
    z = np.dot(x, W.T)
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            z[i, j] += b[j]
    return z


@njit(cache=True)
def act(z, code):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            v = z[i, j]
            if code == 0:
                out[i, j] = v
            elif code == 1:
                out[i, j] = v if v > 0.0 else 0.0
            elif code == 2:
                out[i, j] = np.tanh(v)
            else:
                if v >= 0.0:
                    out[i, j] = 1.0 / (1.0 + np.exp(-v))
                else:
                    ev = np.exp(v)
                    out[i, j] = ev / (1.0 + ev)
    return out


@njit(cache=True)
def act_bwd(grad_a, a, code):
    out = np.empty_like(grad_a)
    for i in range(grad_a.shape[0]):
        for j in range(grad_a.shape[1]):
            g = grad_a[i, j]
            y = a[i, j]
            if code == 0:
                out[i, j] = g
            elif code == 1:
                out[i, j] = g if y > 0.0 else 0.0
            elif code == 2:
                out[i, j] = g * (1.0 - y * y)
            else:
                out[i, j] = g * y * (1.0 - y)
    return out


@njit(cache=True)
def affine_bwd(grad_z, x, W, need_gx):
    gW = np.dot(grad_z.T, x)
    gb = np.zeros(grad_z.shape[1])
    for i in range(grad_z.shape[0]):
        for j in range(grad_z.shape[1]):
            gb[j] += grad_z[i, j]
    if need_gx:
        gx = np.dot(grad_z, W)
    else:
        gx = np.empty((0, 0))
    return gW, gb, gx


@njit(cache=True)
def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for i in range(p.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        mhat = m[i] / c1
        vhat = v[i] / c2
        p[i] -= lr * mhat / (np.sqrt(vhat) + eps)


@njit(cache=True)
def gae_scan(rewards, values, bootstrap, dones, gamma, lam):
    n = rewards.shape[0]
    adv = np.zeros(n)
    ret = np.zeros(n)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 0.0 if dones[t] else 1.0
        next_v = bootstrap if t == n - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_v * nonterminal - values[t]
        acc = delta + gamma * lam * nonterminal * acc
        adv[t] = acc
        ret[t] = acc + values[t]
    return adv, ret


@njit(cache=True)
def gauss_logprob(actions, mu, log_std):
    n, d = mu.shape
    const = 0.5 * np.log(2.0 * np.pi)
    lse = 0.0
    for j in range(d):
        lse += log_std[j]
    out = np.empty(n)
    for i in range(n):
        q = 0.0
        for j in range(d):
            z = (actions[i, j] - mu[i, j]) / np.exp(log_std[j])
            q += z * z
        out[i] = -0.5 * q - lse - const * d
    return out


@njit(cache=True)
def soft_blend(target, online, tau):
    for i in range(target.shape[0]):
        target[i] = (1.0 - tau) * target[i] + tau * online[i]
