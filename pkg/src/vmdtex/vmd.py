"""Two-dimensional variational mode decomposition.

The decomposition runs entirely in the DFT domain.  Each mode lives on one
half of the frequency plane (the 2D analogue of an analytic signal); the
spatial mode is recovered as the real part of the inverse transform, which is
the same as adding the conjugate mirror of the half-plane spectrum.

Frequencies are in cycles/pixel.  Arrays are indexed ``[row, col]`` and a
frequency pair is always reported as ``(w_x, w_y)`` = (column, row) direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateMode, NonFinite

DEGENERATE_ENERGY = 1e-12


# -- spectral plumbing -----------------------------------------------------

def forward_dft2(image: np.ndarray) -> np.ndarray:
    """Unnormalised 2D DFT (numpy sign convention, DC at index ``[0, 0]``)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or min(image.shape) < 2:
        raise ValueError(f"need a 2D grid with both sides >= 2, got shape {image.shape}")
    return np.fft.fft2(image)


def inverse_dft2(spectrum: np.ndarray) -> np.ndarray:
    """Inverse of :func:`forward_dft2`; returns the real part."""
    return np.fft.ifft2(spectrum).real


def frequency_grid(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(fx, fy)`` frequency grids of ``shape`` in [-0.5, 0.5) cycles/pixel."""
    rows, cols = shape
    fy = np.fft.fftfreq(rows)[:, None] * np.ones((1, cols))
    fx = np.ones((rows, 1)) * np.fft.fftfreq(cols)[None, :]
    return fx, fy


def _self_conjugate(n: int) -> np.ndarray:
    idx = np.arange(n)
    return idx == (-idx) % n


def half_plane_weights(shape: tuple[int, int]) -> np.ndarray:
    """Analytic-extension mask: 2 on the open half-plane, 1 on self-conjugate bins, 0 elsewhere.

    The half-plane is ``w_x > 0`` plus ``w_x = 0, w_y > 0`` (Nyquist bins count
    as +0.5).  The mask satisfies ``m(w) + m(-w) = 2`` so the real part of the
    inverse transform of ``m * F`` is the original signal.
    """
    rows, cols = shape
    fx, fy = _support_frequencies(shape)
    sx = _self_conjugate(cols)[None, :]
    sy = _self_conjugate(rows)[:, None]
    # columns w_x = 0 and w_x = Nyquist are their own mirror: split them by w_y
    positive = ((fx > 0) & ~sx) | (sx & (fy > 0) & ~sy)
    weights = np.where(positive, 2.0, 0.0)
    weights[sy & sx] = 1.0
    return weights


def _support_frequencies(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = shape
    fx = np.fft.fftfreq(cols)
    fy = np.fft.fftfreq(rows)
    if cols % 2 == 0:
        fx[cols // 2] = 0.5
    if rows % 2 == 0:
        fy[rows // 2] = 0.5
    return np.broadcast_to(fx[None, :], shape), np.broadcast_to(fy[:, None], shape)


# -- types -----------------------------------------------------------------

@dataclass(frozen=True)
class VmdParams:
    modes_K: int = 2
    alpha: float = 5000.0
    tau: float = 0.0
    epsilon: float = 1e-6
    max_iterations: int = 300
    init: str = "fixed"
    seed: int = 0

    def __post_init__(self):
        if self.modes_K < 1:
            raise ConfigError(f"modes_K must be >= 1, got {self.modes_K}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.init not in ("fixed", "random"):
            raise ConfigError(f"init must be 'fixed' or 'random', got {self.init!r}")

    def initial_frequencies(self) -> np.ndarray:
        """Initial ``(K, 2)`` array of ``(w_x, w_y)`` centre frequencies."""
        K = self.modes_K
        if self.init == "fixed":
            step = np.arange(K) / (2.0 * K)
            return np.stack([step, step], axis=1)
        rng = np.random.default_rng(self.seed)
        wx = rng.uniform(0.0, 0.5, K)
        wy = rng.uniform(-0.5, 0.5, K)
        order = np.argsort(np.hypot(wx, wy), kind="stable")
        return np.stack([wx[order], wy[order]], axis=1)


@dataclass
class Mode2D:
    spatial: np.ndarray
    center_frequency: tuple[float, float]
    degenerate: bool = False

    @property
    def radius(self) -> float:
        return float(np.hypot(*self.center_frequency))


@dataclass
class VmdDiagnostics:
    iterations: int
    final_change: float
    residual: float
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)


def _relative_residual(image: np.ndarray, modes: list[Mode2D]) -> float:
    norm = np.linalg.norm(image)
    if norm == 0:
        return 0.0
    recon = np.sum([m.spatial for m in modes], axis=0)
    return float(np.linalg.norm(image - recon) / norm)


# overflow is caught explicitly below and reported as NonFinite
@np.errstate(over="ignore", invalid="ignore", divide="ignore")
def vmd2d(image: np.ndarray, params: VmdParams = VmdParams()) -> tuple[list[Mode2D], VmdDiagnostics]:
    """Decompose ``image`` into ``params.modes_K`` band-limited modes by ADMM.

    Each sweep updates the modes in order (Gauss-Seidel), each as a Wiener
    filter of the current residual centred on its own frequency, then moves the
    centre frequency to the centroid of the mode's power spectrum.  The
    multiplier takes a step of size ``tau`` along the reconstruction error.

    Parameters
    ----------
    image : ndarray, shape (H, W)
        Finite real grid.
    params : VmdParams

    Returns
    -------
    modes : list of Mode2D
        In internal mode order (not sorted by frequency).
    diagnostics : VmdDiagnostics
        Iteration count, last convergence value, and the relative
        reconstruction residual ``||image - sum(modes)|| / ||image||``.
    """
    image = np.asarray(image, dtype=np.float64)
    if not np.all(np.isfinite(image)):
        raise NonFinite("input image contains NaN or Inf")
    shape = image.shape
    support = half_plane_weights(shape)
    mask = support > 0
    f_plus = (forward_dft2(image) * support)[mask]
    fx_all, fy_all = _support_frequencies(shape)
    fx, fy = fx_all[mask], fy_all[mask]

    K = params.modes_K
    alpha, tau = params.alpha, params.tau
    omega = params.initial_frequencies()
    u = np.zeros((K, f_plus.size), dtype=np.complex128)
    mu = np.zeros_like(f_plus)
    total = np.zeros_like(f_plus)
    # energy floor keeps the criterion finite for modes that vanish
    floor = np.finfo(np.float64).eps * max(float(np.vdot(f_plus, f_plus).real), np.finfo(np.float64).tiny)

    history: list[float] = []
    change = np.inf
    n = 0
    for n in range(1, params.max_iterations + 1):
        prev = u.copy()
        for k in range(K):
            others = total - u[k]
            denom = 1.0 + 2.0 * alpha * ((fx - omega[k, 0]) ** 2 + (fy - omega[k, 1]) ** 2)
            u[k] = (f_plus - others + 0.5 * mu) / denom
            total = others + u[k]
            power = u[k].real ** 2 + u[k].imag ** 2
            mass = power.sum()
            if mass > 0:
                omega[k, 0] = np.dot(fx, power) / mass
                omega[k, 1] = np.dot(fy, power) / mass
        if tau > 0:
            mu = mu + tau * (f_plus - total)

        diff = u - prev
        num = np.einsum("ij,ij->i", diff.real, diff.real) + np.einsum("ij,ij->i", diff.imag, diff.imag)
        den = np.einsum("ij,ij->i", prev.real, prev.real) + np.einsum("ij,ij->i", prev.imag, prev.imag)
        change = float(np.sum(num / np.maximum(den, floor)))
        if not (np.isfinite(change) and np.all(np.isfinite(omega))):
            raise NonFinite(f"VMD iterate became non-finite at iteration {n} (alpha={alpha}, tau={tau})")
        history.append(change)
        if change < params.epsilon:
            break

    modes = []
    for k in range(K):
        full = np.zeros(shape, dtype=np.complex128)
        full[mask] = u[k]
        modes.append(Mode2D(inverse_dft2(full), (float(omega[k, 0]), float(omega[k, 1]))))
    diag = VmdDiagnostics(
        iterations=n,
        final_change=change,
        residual=_relative_residual(image, modes),
        converged=change < params.epsilon,
        history=history,
    )
    return modes, diag


# -- repetitive decomposition ---------------------------------------------

@dataclass
class DecompositionLevel:
    low: Mode2D
    high: Mode2D
    diagnostics: VmdDiagnostics | None


@dataclass
class DecompositionTree:
    levels: list[DecompositionLevel]
    truncated: bool = False

    @property
    def components(self) -> list[Mode2D]:
        """Flattened modes: L1-low, L1-high, L2-low, L2-high, ..."""
        return [m for lvl in self.levels for m in (lvl.low, lvl.high)]

    @property
    def residuals(self) -> list[float]:
        return [lvl.diagnostics.residual if lvl.diagnostics else 0.0 for lvl in self.levels]


def _degenerate_level(shape: tuple[int, int]) -> DecompositionLevel:
    zero = np.zeros(shape)
    return DecompositionLevel(
        Mode2D(zero, (0.0, 0.0), degenerate=True),
        Mode2D(zero.copy(), (0.0, 0.0), degenerate=True),
        None,
    )


def iterative_vmd(
    image: np.ndarray,
    levels: int = 5,
    params: VmdParams = VmdParams(),
    strict: bool = False,
) -> DecompositionTree:
    """Repeatedly split the higher-frequency mode in two.

    Level 1 decomposes ``image``; level ``l + 1`` decomposes the mode of level
    ``l`` with the larger centre-frequency magnitude.  With ``levels=5`` this
    yields 10 components.

    If a level's input energy drops below ``1e-12`` the remaining levels are
    filled with zero modes flagged ``degenerate`` and the tree is marked
    ``truncated``; ``strict=True`` raises :class:`DegenerateMode` instead.
    """
    if levels < 1:
        raise ConfigError(f"levels must be >= 1, got {levels}")
    if params.modes_K != 2:
        raise ConfigError(f"iterative decomposition needs modes_K=2, got {params.modes_K}")
    image = np.asarray(image, dtype=np.float64)
    out: list[DecompositionLevel] = []
    truncated = False
    current = image
    for level in range(1, levels + 1):
        if truncated or float(np.sum(current * current)) < DEGENERATE_ENERGY:
            if strict:
                raise DegenerateMode(f"level {level} input has energy below {DEGENERATE_ENERGY}")
            truncated = True
            out.append(_degenerate_level(image.shape))
            continue
        modes, diag = vmd2d(current, params)
        low, high = sorted(modes[:2], key=lambda m: m.radius)  # stable: ties keep mode order
        out.append(DecompositionLevel(low, high, diag))
        current = high.spatial
    return DecompositionTree(out, truncated)
