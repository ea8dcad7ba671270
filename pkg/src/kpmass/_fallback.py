"""Pure-numpy versions of the hot kernels (used when the extension is absent)."""
import numpy as np

_CHUNK = 1 << 22


def osc_integrand_s(s, lam, sigma, alpha, two_p1):
    """``2 s^(2p+1) exp(i(lam s^2 + sigma s^(2 alpha + 2)))`` elementwise."""
    xi = s * s
    return 2.0 * s ** two_p1 * np.exp(1j * (lam * xi + sigma * xi ** (alpha + 1.0)))


def fourier_sum(coeff, coeff_a, xi, xs, u, a):
    """Accumulate ``Re sum_q c[:, q] exp(i xi_q x)`` into ``u`` (and ``a`` for ``coeff_a``).

    ``coeff`` and ``coeff_a`` have shape ``(ny, nq)``; ``u`` and ``a`` have
    shape ``(ny, nx)`` and are updated in place.
    """
    step = max(1, _CHUNK // max(len(xi), 1))
    for c in range(0, len(xs), step):
        phase = np.exp(1j * np.outer(xi, xs[c:c + step]))
        u[:, c:c + step] += (coeff @ phase).real
        a[:, c:c + step] += (coeff_a @ phase).real
