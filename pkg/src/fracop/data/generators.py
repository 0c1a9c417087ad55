"""Synthetic operator-learning datasets.

All generators are deterministic per seed: sample ``i`` draws from the random
stream ``(seed, i)`` so the first ``k`` samples do not depend on ``n_samples``.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import BlowUp, SolverDivergence
from .grf import GrfSpec, sample_grf_batch
from .nodf import DatasetFile

# ---------------------------------------------------------------------------
# heat


def heat_solution(u0: np.ndarray, t_final: float, diffusivity: float) -> np.ndarray:
    """Exact periodic heat flow on [0, 1): each Fourier mode decays by exp(-nu (2 pi k)^2 T)."""
    n = u0.shape[-1]
    k = np.fft.rfftfreq(n, 1.0 / n)
    decay = np.exp(-diffusivity * (2.0 * np.pi * k) ** 2 * t_final)
    return np.fft.irfft(np.fft.rfft(u0, axis=-1) * decay, n=n, axis=-1)


def gen_heat1d(n_samples: int, grid_n: int = 64, t_final: float = 1.0,
               diffusivity: float = 0.01, seed: int = 0,
               grf: GrfSpec | None = None) -> DatasetFile:
    spec = grf or GrfSpec(grid=(grid_n,), exponent=2.0, tau=3.0, seed=seed)
    u0 = sample_grf_batch(spec, n_samples)
    u1 = heat_solution(u0, t_final, diffusivity)
    return DatasetFile(u0[..., None], u1[..., None])


# ---------------------------------------------------------------------------
# Burgers


def solve_burgers(u0: np.ndarray, t_final: float, viscosity: float,
                  cfl: float = 0.4, max_dt: float = 1e-3) -> np.ndarray:
    """Periodic viscous Burgers ``u_t + (u^2/2)_x = nu u_xx`` on [0, 1).

    Fourier pseudo-spectral in space with 2/3-rule dealiasing of the
    nonlinear term; classic RK4 in time on the integrating-factor variable
    ``exp(nu k^2 t) u_hat`` so diffusion is integrated exactly.
    """
    if viscosity <= 0:
        raise ValueError("viscosity must be positive")
    u0 = np.asarray(u0, dtype=np.float64)
    n = u0.shape[-1]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, 1.0 / n)
    keep = np.fft.rfftfreq(n, 1.0 / n) < n / 3.0
    lin = -viscosity * k ** 2
    umax = max(float(np.max(np.abs(u0))), 1e-12)
    dt = min(cfl * (1.0 / n) / umax, max_dt, t_final)
    steps = max(1, math.ceil(t_final / dt))
    dt = t_final / steps
    half = np.exp(lin * dt / 2.0)
    full = half * half

    def nonlinear(vh):
        u = np.fft.irfft(vh, n=n, axis=-1)
        return -0.5j * k * keep * np.fft.rfft(u * u, axis=-1)

    uh = np.fft.rfft(u0, axis=-1)
    for _ in range(steps):
        k1 = nonlinear(uh)
        k2 = nonlinear(half * (uh + 0.5 * dt * k1))
        k3 = nonlinear(half * uh + 0.5 * dt * k2)
        k4 = nonlinear(full * uh + dt * half * k3)
        uh = full * uh + dt / 6.0 * (full * k1 + 2.0 * half * (k2 + k3) + k4)
        if not np.all(np.isfinite(uh)):
            raise BlowUp("Burgers solution became non-finite")
    return np.fft.irfft(uh, n=n, axis=-1)


def gen_burgers1d(n_samples: int, grid_n: int = 256, t_final: float = 1.0,
                  viscosity: float = 0.1, seed: int = 0,
                  grf: GrfSpec | None = None) -> DatasetFile:
    spec = grf or GrfSpec(grid=(grid_n,), exponent=2.0, tau=5.0, sigma=0.5, seed=seed)
    u0 = sample_grf_batch(spec, n_samples)
    u1 = np.stack([solve_burgers(u, t_final, viscosity) for u in u0])
    return DatasetFile(u0[..., None], u1[..., None])


# ---------------------------------------------------------------------------
# Darcy


def darcy_matrix(a: np.ndarray) -> sp.csr_matrix:
    """5-point operator for ``-div(a grad u)`` on interior nodes of a square grid.

    ``a`` holds nodal coefficients on an ``n x n`` grid spanning [0, 1]^2
    (boundary nodes included, spacing ``1/(n-1)``). Face coefficients are
    harmonic means of the two adjacent nodes; boundary values are zero.
    """
    n = a.shape[0]
    m = n - 2
    h2 = (1.0 / (n - 1)) ** 2

    def hmean(p, q):
        return 2.0 * p * q / (p + q)

    inner = a[1:-1, 1:-1]
    east = hmean(inner, a[2:, 1:-1])
    west = hmean(inner, a[:-2, 1:-1])
    north = hmean(inner, a[1:-1, 2:])
    south = hmean(inner, a[1:-1, :-2])
    idx = np.arange(m * m).reshape(m, m)
    rows, cols, vals = [idx.ravel()], [idx.ravel()], [(east + west + north + south).ravel()]
    for coef, (di, dj) in ((east, (1, 0)), (west, (-1, 0)), (north, (0, 1)), (south, (0, -1))):
        src = idx[max(0, -di): m - max(0, di), max(0, -dj): m - max(0, dj)]
        dst = idx[max(0, di): m + min(0, di) or None, max(0, dj): m + min(0, dj) or None]
        c = coef[max(0, -di): m - max(0, di), max(0, -dj): m - max(0, dj)]
        rows.append(src.ravel())
        cols.append(dst.ravel())
        vals.append(-c.ravel())
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(m * m, m * m))
    return (mat / h2).tocsr()


def solve_darcy(a: np.ndarray, beta: float = 1.0, tol: float = 1e-10) -> tuple[np.ndarray, float]:
    """Solve ``-div(a grad u) = beta`` with zero Dirichlet data.

    Returns the nodal solution (boundary included) and the relative residual
    ``||A u - f|| / ||f||``.
    """
    n = a.shape[0]
    mat = darcy_matrix(a)
    rhs = np.full(mat.shape[0], float(beta))
    sol = spla.spsolve(mat.tocsc(), rhs)
    res = np.linalg.norm(mat @ sol - rhs) / np.linalg.norm(rhs)
    if not np.isfinite(res) or res >= tol:
        sol, info = spla.cg(mat, rhs, x0=sol, rtol=tol * 1e-2, maxiter=10 * mat.shape[0])
        res = np.linalg.norm(mat @ sol - rhs) / np.linalg.norm(rhs)
        if info != 0 or res >= tol:
            raise SolverDivergence(f"Darcy residual {res:.3e} above {tol:g}")
    u = np.zeros((n, n))
    u[1:-1, 1:-1] = sol.reshape(n - 2, n - 2)
    return u, float(res)


def darcy_coefficients(field: np.ndarray, contrast: float = 9.0, low: float = 1.0) -> np.ndarray:
    """Two-level medium: ``low * contrast`` where the field is >= 0, else ``low``."""
    return np.where(field >= 0.0, low * contrast, low)


def gen_darcy2d(n_samples: int, grid_n: int = 85, contrast: float = 9.0, beta: float = 1.0,
                seed: int = 0, grf: GrfSpec | None = None) -> DatasetFile:
    if grid_n < 16:
        raise ValueError("Darcy grid must be >= 16")
    spec = grf or GrfSpec(grid=(grid_n, grid_n), exponent=2.0, tau=3.0, seed=seed)
    fields = sample_grf_batch(spec, n_samples)
    a = darcy_coefficients(fields, contrast)
    u = np.stack([solve_darcy(ai, beta)[0] for ai in a])
    return DatasetFile(a[..., None], u[..., None])


# ---------------------------------------------------------------------------
# chirp operator


def chirp_grid(n: int) -> np.ndarray:
    """Centred coordinates with spacing ``1/sqrt(n)``."""
    return (np.arange(n) - n // 2) / np.sqrt(n)


def _frft_kernel(u: np.ndarray, x: np.ndarray, order: float) -> np.ndarray:
    """Continuous FrFT kernel ``K_a(u, x)`` (rows ``u``, columns ``x``)."""
    t = order * np.pi / 2.0
    if abs(np.sin(t)) < 1e-12:
        raise ValueError("order must not be an even integer")
    cot, csc = 1.0 / np.tan(t), 1.0 / np.sin(t)
    return np.sqrt(1.0 - 1j * cot) * np.exp(
        1j * np.pi * (cot * (u[:, None] ** 2 + x[None, :] ** 2) - 2.0 * csc * np.outer(u, x)))


def lowpass_taper(u: np.ndarray, cutoff: float = 0.6, rolloff: float = 0.3) -> np.ndarray:
    """1 for ``|u| <= cutoff - rolloff``, raised-cosine down to 0 at ``|u| = cutoff``."""
    r = np.clip((np.abs(u) - (cutoff - rolloff)) / rolloff, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * r))


def chirp_filter_matrix(n: int, order: float = 0.5, cutoff: float = 0.6, rolloff: float = 0.3,
                        oversample: int = 4) -> np.ndarray:
    """Fractional-domain low-pass ``x -> Re(F^-a T(u) F^a x)`` on :func:`chirp_grid`.

    ``T`` is :func:`lowpass_taper`. Both transforms are rectangle-rule
    quadratures of the continuous kernel on a grid ``oversample`` times finer
    than the data grid, with the input trigonometrically interpolated onto
    it. Only ``|u| <= cutoff`` is integrated, which keeps the chirp kernel
    well resolved. Returns the real ``n x n`` matrix acting on samples.
    """
    fine_n = oversample * n
    xf = (np.arange(fine_n) - fine_n // 2) / (oversample * np.sqrt(n))
    du = dx = xf[1] - xf[0]
    m = int(np.floor(cutoff / du))
    u = np.arange(-m, m + 1) * du
    fwd = _frft_kernel(u, xf, order) * (dx * lowpass_taper(u, cutoff, rolloff))[:, None]
    back = _frft_kernel(xf, u, -order) * du
    full = (back @ (fwd @ _periodic_interpolator(n, oversample))).real
    return full[::oversample]


def _periodic_interpolator(n: int, factor: int) -> np.ndarray:
    """Real trigonometric interpolation matrix from ``n`` samples to ``factor * n``.

    Fine sample ``factor * i`` coincides with coarse sample ``i``; an even
    grid's Nyquist coefficient is split over +-n/2.
    """
    spec = np.fft.fft(np.eye(n), axis=0)
    big = np.zeros((factor * n, n), dtype=np.complex128)
    h = n // 2
    big[:h] = spec[:h]
    big[factor * n - (n - h - 1):] = spec[h + 1:]
    if n % 2 == 0:
        big[h] = big[factor * n - h] = 0.5 * spec[h]
    else:
        big[h] = spec[h]
    return np.fft.ifft(big, axis=0).real * factor


def chirp_signals(n_samples: int, grid_n: int, rate_range=(-1.0, 1.0), seed: int = 0,
                  max_components: int = 3) -> np.ndarray:
    """Real superpositions of Gaussian-windowed linear chirps on :func:`chirp_grid`.

    Centres, widths, start frequencies and rates are drawn so that every
    component stays inside the grid's time-frequency square.
    """
    x = chirp_grid(grid_n)
    half_width = x[-1]
    out = np.zeros((n_samples, grid_n))
    for i in range(n_samples):
        rng = np.random.default_rng([seed, i])
        for _ in range(rng.integers(1, max_components + 1)):
            x0 = rng.uniform(-0.25, 0.25) * half_width
            width = rng.uniform(0.5, 1.0)
            f0 = rng.uniform(-1.0, 1.0)
            rate = rng.uniform(*rate_range)
            amp = rng.uniform(0.5, 1.5)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            s = x - x0
            out[i] += amp * np.exp(-0.5 * (s / width) ** 2) * np.cos(
                2.0 * np.pi * (f0 * s + 0.5 * rate * s * s) + phase)
    return out


def gen_chirp_operator(n_samples: int, grid_n: int = 128, rate_range=(-1.0, 1.0),
                       seed: int = 0, order: float = 0.5, cutoff: float = 0.6,
                       rolloff: float = 0.3) -> DatasetFile:
    """Inputs are chirp mixtures; targets are their fractional-domain low-pass."""
    x = chirp_signals(n_samples, grid_n, rate_range, seed)
    filt = chirp_filter_matrix(grid_n, order, cutoff, rolloff)
    y = x @ filt.T
    return DatasetFile(x[..., None], y[..., None])
