"""Pure NumPy fallback for the DAG sweeps."""

from __future__ import annotations

import numpy as np


def sweep(succ_ptr, succ_idx, pred_ptr, pred_idx, v, h, mu, zsink):
    """Stabilized suffix and prefix sums over a topologically ordered DAG.

    Position 0 is the origin, position n-1 the sink. With node utilities ``v``
    (``v[n-1]`` ignored), temperature ``mu`` and additive node functions in the
    columns of ``h`` (shape (n, m)):

    * ``phi[i]``: best suffix utility from i (including v[i]) to the sink.
    * ``zhat[i]``: sum over suffixes from i of exp((U - phi[i]) / mu), times ``zsink``.
    * ``chat[i, c]``: same sum weighted by the suffix total of ``h[:, c]``.
    * ``psi[i]``: best prefix utility from the origin up to but excluding i.
    * ``ahat[i]``: sum over prefixes of exp((U - psi[i]) / mu).
    * ``bhat[i, c]``: same sum weighted by the prefix total of ``h[:, c]``.
    """
    n = v.shape[0]
    m = h.shape[1]
    inv = 1.0 / mu
    phi = np.empty(n)
    zhat = np.empty(n)
    chat = np.zeros((n, m))
    psi = np.empty(n)
    ahat = np.empty(n)
    bhat = np.zeros((n, m))

    phi[n - 1] = 0.0
    zhat[n - 1] = zsink
    chat[n - 1] = h[n - 1] * zsink
    for i in range(n - 2, -1, -1):
        js = succ_idx[succ_ptr[i] : succ_ptr[i + 1]]
        p = phi[js]
        best = p.max()
        w = np.exp((p - best) * inv)
        z = w @ zhat[js]
        phi[i] = v[i] + best
        zhat[i] = z
        chat[i] = w @ chat[js] + h[i] * z

    psi[0] = 0.0
    ahat[0] = 1.0
    for i in range(1, n):
        js = pred_idx[pred_ptr[i] : pred_ptr[i + 1]]
        cand = psi[js] + v[js]
        best = cand.max()
        w = np.exp((cand - best) * inv)
        a = ahat[js]
        psi[i] = best
        ahat[i] = w @ a
        bhat[i] = w @ (bhat[js] + h[js] * a[:, None])
    return phi, zhat, chat, psi, ahat, bhat
