"""Pure numpy implementations of the compiled kernels (same signatures)."""
import numpy as np


def rk4_integrate(ops, coeffs, hs, x0, d, record, hermitize=True):
    """Integrate ``dx/dt = A(t) x`` with ``A(t) = sum_k c_k(t) ops[k]``.

    See the compiled version for the argument layout.  Returns the recorded
    vectors and the largest trace drift seen before renormalisation.
    """
    ops = np.asarray(ops)
    x = np.array(x0, dtype=complex)
    out = []
    max_drift = 0.0
    diag = np.arange(d) * (d + 1)
    perm = np.arange(d * d).reshape(d, d).T.ravel()  # index of X^T entries in vec order
    cache = {}

    def assemble(c):
        key = c.tobytes()
        A = cache.get(key)
        if A is None:
            A = np.tensordot(c, ops, axes=1)
            if len(cache) > 8:
                cache.clear()
            cache[key] = A
        return A

    for n in range(len(hs)):
        h = hs[n]
        A0 = assemble(coeffs[n, 0])
        A1 = assemble(coeffs[n, 1])
        A2 = assemble(coeffs[n, 2])
        k1 = A0 @ x
        k2 = A1 @ (x + 0.5 * h * k1)
        k3 = A1 @ (x + 0.5 * h * k2)
        k4 = A2 @ (x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tr = x[diag].sum()
        max_drift = max(max_drift, abs(tr.real - 1.0) + abs(tr.imag))
        if hermitize:
            x = 0.5 * (x + x[perm].conj())
            x = x / x[diag].sum().real
        if record[n]:
            out.append(x.copy())
    states = np.array(out, dtype=complex).reshape(len(out), d * d)
    return states, max_drift


def qfi_sum(lam, G, floor):
    lam = np.asarray(lam, dtype=float)
    den = lam[:, None] + lam[None, :]
    mask = den > floor
    G = np.asarray(G)
    return 2.0 * float(np.sum(np.abs(G[mask]) ** 2 / den[mask]))
