"""Pure-numpy kernel backend.

Mirrors the compiled backend in ``_core.pyx``; both expose the same three
entry points and must agree to floating-point reordering error.
"""

from __future__ import annotations

import numpy as np


def rbf_eval(centers, inv_bw2, norm_const, weights, x, want_input_grad):
    """Evaluate a weighted sum of normalized Gaussian bases at ``x``.

    Returns ``(value, feats, grad_x)`` where ``feats[j]`` is the j-th basis
    value (also the parameter gradient of the model output) and ``grad_x`` is
    the gradient of the output with respect to ``x`` (``None`` unless
    requested).
    """
    d = x[None, :] - centers
    f = norm_const * np.exp(-0.5 * ((d * d) @ inv_bw2))
    value = float(weights @ f)
    grad_x = None
    if want_input_grad:
        grad_x = -((weights * f) @ (d * inv_bw2[None, :]))
    return value, f, grad_x


def _softplus(a):
    return float(np.logaddexp(0.0, a))


def _sigmoid(a):
    if a >= 0:
        return 1.0 / (1.0 + np.exp(-a))
    ea = np.exp(a)
    return ea / (1.0 + ea)


def mlp_eval(params, sizes, x, out_act, want_param_grad, want_input_grad):
    """Evaluate a ReLU multilayer perceptron mapping ``x`` to a positive scalar.

    ``sizes`` lists layer widths including input and the final scalar output.
    ``out_act`` selects the output squashing: 0 applies exp(-tanh(a)),
    1 applies exp(-softplus(a)).  Parameters are a flat vector laid out per
    layer as the row-major weight matrix followed by the bias.  Returns
    ``(value, param_grad, input_grad)``; gradients are ``None`` unless
    requested.
    """
    n_layers = len(sizes) - 1
    weights = []
    biases = []
    off = 0
    for layer in range(n_layers):
        n_in, n_out = sizes[layer], sizes[layer + 1]
        weights.append(params[off : off + n_in * n_out].reshape(n_out, n_in))
        off += n_in * n_out
        biases.append(params[off : off + n_out])
        off += n_out

    acts = [np.asarray(x, dtype=float)]
    pre = []
    h = acts[0]
    for layer in range(n_layers):
        a = weights[layer] @ h + biases[layer]
        pre.append(a)
        h = np.maximum(a, 0.0) if layer < n_layers - 1 else a
        acts.append(h)

    a_out = float(pre[-1][0])
    if out_act == 0:
        g = float(np.tanh(a_out))
        gprime = 1.0 - g * g
    else:
        g = _softplus(a_out)
        gprime = _sigmoid(a_out)
    value = float(np.exp(-g))

    if not (want_param_grad or want_input_grad):
        return value, None, None

    # Reverse pass with upstream dvalue/da_out.
    delta = np.array([-gprime * value])
    param_grad = np.empty_like(params) if want_param_grad else None
    off = params.shape[0]
    for layer in range(n_layers - 1, -1, -1):
        n_in, n_out = sizes[layer], sizes[layer + 1]
        if want_param_grad:
            off -= n_out
            param_grad[off : off + n_out] = delta
            off -= n_in * n_out
            param_grad[off : off + n_in * n_out] = np.outer(delta, acts[layer]).ravel()
        delta = weights[layer].T @ delta
        if layer > 0:
            delta = delta * (pre[layer - 1] > 0.0)
    input_grad = delta if want_input_grad else None
    return value, param_grad, input_grad


def _simplex_project(w, total):
    """Euclidean projection of ``w`` in place onto {w >= 0, sum w = total}.

    Uniform shift of the unclamped components with clamping of negatives,
    exact within k passes; a final touch-up spreads the fp residual and
    clamps the few-ulp negatives the shift can leave behind.
    """
    k = w.shape[0]
    free = np.ones(k, dtype=bool)
    for _ in range(k + 1):
        nfree = int(free.sum())
        if nfree == 0:
            return
        shift = (float(w[free].sum()) - total) / nfree
        w[free] -= shift
        neg = free & (w < 0.0)
        if not neg.any():
            break
        w[neg] = 0.0
        free &= ~neg
    resid = float(w.sum()) - total
    w[free] -= resid / int(free.sum())
    np.maximum(w, 0.0, out=w)


def project_simplex_cap(w, total, feats, cap, max_outer=100):
    """Project ``w`` in place onto {w >= 0, sum w = total, w @ feats <= cap}.

    The plain simplex projection is tried first.  If the cap then binds, its
    multiplier is bracketed and bisected: the cap value of the simplex
    projection of ``w - mu * feats`` is continuous and nonincreasing in
    ``mu``, so halving the bracket pins the multiplier at working precision
    and the last feasible iterate is returned.  Pass ``feats=None`` for the
    plain simplex.  Returns the number of simplex projections spent; -1 when
    the cap cannot be met.
    """
    tol = 1e-12 * max(1.0, abs(total))
    orig = w.copy() if feats is not None else None
    _simplex_project(w, total)
    if feats is None:
        return 1
    if float(w @ feats) <= cap + tol:
        return 1
    fmin = float(feats.min())
    if total * fmin > cap + tol:
        return -1
    cap_tol = 1e-9 * max(1.0, abs(cap))

    passes = 1
    lo = 0.0
    hi = 1.0
    bracketed = False
    for _ in range(2 * max_outer):
        w[:] = orig - hi * feats
        _simplex_project(w, total)
        passes += 1
        if float(w @ feats) <= cap:
            bracketed = True
            break
        lo = hi
        hi *= 2.0
    if not bracketed:
        # The cap is reached only in the limit of a huge multiplier, meaning
        # all mass must sit on the smallest feature values.
        sel = feats <= fmin + 1e-12 * max(1.0, fmin)
        sub = orig[sel].copy()
        _simplex_project(sub, total)
        w[:] = 0.0
        w[sel] = sub
        passes += 1
        return passes if float(w @ feats) <= cap + cap_tol else -1

    for _ in range(max_outer):
        if hi - lo <= 1e-15 * hi:
            break
        mid = 0.5 * (lo + hi)
        w[:] = orig - mid * feats
        _simplex_project(w, total)
        passes += 1
        if float(w @ feats) > cap:
            lo = mid
        else:
            hi = mid
    w[:] = orig - hi * feats
    _simplex_project(w, total)
    passes += 1
    if float(w @ feats) <= cap + cap_tol:
        return passes
    return -1
