"""Pure-numpy implementations of the hot numeric kernels.

Semantics here define the contract; the numba twin in ``_numba_impl``
must agree to floating-point roundoff. All arrays are float64 and
C-contiguous. Activation codes: 0 identity, 1 relu, 2 tanh, 3 sigmoid.
"""

import numpy as np

ACT_IDENTITY = 0
ACT_RELU = 1
ACT_TANH = 2
ACT_SIGMOID = 3


def affine(x, W, b):
    """z = x @ W.T + b with W laid out (out, in)."""
    return x @ W.T + b


def act(z, code):
    if code == ACT_IDENTITY:
        return z.copy()
    if code == ACT_RELU:
        return np.maximum(z, 0.0)
    if code == ACT_TANH:
        return np.tanh(z)
    if code == ACT_SIGMOID:
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    raise ValueError(f"unknown activation code {code}")


def act_bwd(grad_a, a, code):
    """grad_z from grad_a; derivative expressed through the activation value."""
    if code == ACT_IDENTITY:
        return grad_a.copy()
    if code == ACT_RELU:
        return grad_a * (a > 0.0)
    if code == ACT_TANH:
        return grad_a * (1.0 - a * a)
    if code == ACT_SIGMOID:
        return grad_a * a * (1.0 - a)
    raise ValueError(f"unknown activation code {code}")


def affine_bwd(grad_z, x, W, need_gx):
    """Gradients of sum(grad_z * (x @ W.T + b)) w.r.t. W, b, x."""
    gW = grad_z.T @ x
    gb = grad_z.sum(axis=0)
    if need_gx:
        gx = grad_z @ W
    else:
        gx = np.empty((0, 0))
    return gW, gb, gx


def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    """One bias-corrected Adam step, in place on 1-d views p, m, v."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def gae_scan(rewards, values, bootstrap, dones, gamma, lam):
    """Backward-recursive advantage scan truncated at episode ends.

    delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t, with V_{t+1}
    read from ``values`` inside the batch and ``bootstrap`` at the end.
    """
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


def gauss_logprob(actions, mu, log_std):
    """Row-wise diagonal-Gaussian log density of ``actions`` under (mu, std)."""
    std = np.exp(log_std)
    z = (actions - mu) / std
    const = 0.5 * np.log(2.0 * np.pi)
    return -0.5 * (z * z).sum(axis=1) - log_std.sum() - const * mu.shape[1]


def soft_blend(target, online, tau):
    """target <- (1 - tau) * target + tau * online, in place on 1-d views."""
    target *= 1.0 - tau
    target += tau * online
