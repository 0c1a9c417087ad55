"""Independent reference implementations used by the tests.

Nothing here imports the package's transform or model code.
"""
import numpy as np


def centered_dft(n):
    m = np.arange(n) - n // 2
    return np.exp(-2j * np.pi * np.outer(m, m) / n) / np.sqrt(n)


def parity_index(n):
    """F^2 sends centred coordinate m to -m, i.e. index i to (2*(n//2) - i) mod n."""
    h = n // 2
    return (2 * h - np.arange(n)) % n


def circular_convolution_centered(f, g):
    """Direct O(n^2) sum over centred coordinates: h[m] = sum_k f[k] g[m - k]."""
    n = len(f)
    h = n // 2
    out = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        m = i - h
        for j in range(n):
            k = j - h
            out[i] += f[j] * g[(m - k + h) % n]
    return out


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def chirp_convolution_quadrature(f_fn, g_fn, a, x, t_step=1.0 / 128, t_max=8.0):
    """Fractional convolution by dense quadrature of its spatial form.

    h(x) = sqrt(1 - i cot t) e_-(x) * integral e(s) f(s) e(x - s) g(x - s) ds
    with e(s) = exp(i pi s^2 cot t), t = a pi / 2.
    """
    t = a * np.pi / 2
    cot = 1.0 / np.tan(t)
    s = np.arange(-t_max, t_max + t_step / 2, t_step)
    e = lambda z: np.exp(1j * np.pi * z ** 2 * cot)
    out = np.empty(len(x), dtype=np.complex128)
    for i, xi in enumerate(x):
        integrand = e(s) * f_fn(s) * e(xi - s) * g_fn(xi - s)
        out[i] = _trapezoid(integrand, s)
    return np.sqrt(1 - 1j * cot) * np.conj(e(x)) * out


def fno_layer(v, w, b, r, modes):
    """Reference FNO layer (no activation): v (B, n, c) real, r (2*modes, c, c) complex.

    Uses numpy's FFT with the retained modes being the central 2*modes bins of
    the centred spectrum, i.e. frequencies -modes .. modes-1.
    """
    n = v.shape[1]
    vh = np.fft.fft(v, axis=1, norm="ortho")
    freqs = np.arange(-modes, modes)
    out_h = np.zeros(vh.shape[:2] + (r.shape[-1],), dtype=np.complex128)
    for j, k in enumerate(freqs):
        out_h[:, k % n, :] = vh[:, k % n, :] @ r[j]
    spec = np.fft.ifft(out_h, axis=1, norm="ortho")
    return v @ w + b + spec.real


def gelu(x):
    from math import erf, sqrt
    return np.vectorize(lambda t: 0.5 * t * (1 + erf(t / sqrt(2))))(x)


def darcy_matrix_loop(a):
    """Dense 5-point matrix for -div(a grad u), assembled node by node."""
    n = a.shape[0]
    m = n - 2
    h2 = (1.0 / (n - 1)) ** 2
    mat = np.zeros((m * m, m * m))
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            row = (i - 1) * m + (j - 1)
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                p, q = a[i, j], a[i + di, j + dj]
                face = 2 * p * q / (p + q)
                mat[row, row] += face / h2
                ii, jj = i + di, j + dj
                if 1 <= ii <= n - 2 and 1 <= jj <= n - 2:
                    mat[row, (ii - 1) * m + (jj - 1)] -= face / h2
    return mat


def burgers_cole_hopf(x, t, nu, eps=0.5, k=1):
    """Exact periodic Burgers solution u = -2 nu phi_x / phi with phi = 1 + eps e^{-nu (2 pi k)^2 t} cos(2 pi k x)."""
    w = 2 * np.pi * k
    decay = eps * np.exp(-nu * w * w * t)
    phi = 1 + decay * np.cos(w * x)
    phi_x = -decay * w * np.sin(w * x)
    return -2 * nu * phi_x / phi
