"""Weighted low-rank + sparse + noise image decomposition.

Solves

    min ||L||_lowrank + lam * ||W (.) E||_1 + noise penalty
    s.t. D = L + E + N

with an alternating-direction loop: a singular-value proximal step for
the background L, elementwise weighted soft-thresholding for the defect
matrix E, a linear shrinkage for N, and a scaled dual update. The loop
runs a fixed small number of iterations; that cap doubles as
regularization, keeping slowly accumulating residual noise out of E.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .image import as_gray

LOWRANK_MODES = ("nuclear", "schatten_p_truncated")


@dataclass(frozen=True)
class SolverConfig:
    """Decomposition parameters.

    lam weights the sparse term and beta the noise term; defaults are
    the square-mesh values, with `for_mesh("circular")` switching to
    the circular-mesh pair. rho is the fixed quadratic penalty of the
    alternating-direction loop. In schatten_p_truncated mode the tau
    largest singular values pass unshrunk and the rest are shrunk by
    the generalized p-power threshold.
    """

    lam: float = 0.11
    beta: float = 0.003
    rho: float = 0.8
    lowrank_mode: str = "nuclear"
    p: float = 0.75
    tau: int = 30
    maxstep: int = 10
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.lam <= 0 or self.beta <= 0 or self.rho <= 0:
            raise ValueError("lam, beta and rho must be positive")
        if self.lowrank_mode not in LOWRANK_MODES:
            raise ValueError(f"lowrank_mode must be one of {LOWRANK_MODES}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.maxstep < 1:
            raise ValueError("maxstep must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def for_mesh(cls, mesh_type: str, **overrides) -> "SolverConfig":
        if mesh_type == "square":
            base = cls(lam=0.11, beta=0.003)
        elif mesh_type == "circular":
            base = cls(lam=0.06, beta=0.004)
        else:
            raise ValueError(f"unknown mesh_type {mesh_type!r}")
        return replace(base, **overrides) if overrides else base


@dataclass
class Decomposition:
    """Solver output: background L, signed defect matrix E, noise N,
    scaled dual u, and the per-iteration (residual, objective) trace."""

    L: np.ndarray
    E: np.ndarray
    N: np.ndarray
    u: np.ndarray
    iterations: int
    converged: bool
    trace: list[tuple[float, float]] = field(default_factory=list)

    @property
    def termination(self) -> str:
        return "converged" if self.converged else "maxstep"


def _generalized_soft_threshold(sig: np.ndarray, threshold: float, p: float,
                                iters: int = 50) -> np.ndarray:
    """Per-value minimizer of 0.5*(x - sigma)^2 + threshold * x^p, x >= 0."""
    sig = np.asarray(sig, dtype=np.float64)
    if threshold == 0.0:
        return sig.copy()
    if p == 1.0:
        return np.maximum(sig - threshold, 0.0)
    x_star = (2.0 * threshold * (1.0 - p)) ** (1.0 / (2.0 - p))
    cutoff = x_star + threshold * p * x_star ** (p - 1.0)
    out = np.zeros_like(sig)
    live = sig > cutoff
    if np.any(live):
        s = sig[live]
        x = s.copy()  # fixed point from above converges onto the larger root
        for _ in range(iters):
            x = s - threshold * p * x ** (p - 1.0)
        out[live] = x
    return out


def _shrink_singular_values(s: np.ndarray, threshold: float, mode: str,
                            p: float, tau: int) -> np.ndarray:
    if mode == "nuclear":
        return np.maximum(s - threshold, 0.0)
    if mode == "schatten_p_truncated":
        out = s.copy()
        out[tau:] = _generalized_soft_threshold(s[tau:], threshold, p)
        return out
    raise ValueError(f"lowrank_mode must be one of {LOWRANK_MODES}")


def _lowrank_prox_with_sigmas(M: np.ndarray, threshold: float, mode: str,
                              p: float, tau: int) -> tuple[np.ndarray, np.ndarray]:
    if not np.all(np.isfinite(M)):
        raise ValueError("cannot decompose a matrix with non-finite entries")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    shrunk = _shrink_singular_values(s, threshold, mode, p, tau)
    return (U * shrunk) @ Vt, shrunk


def lowrank_prox(M: np.ndarray, threshold: float, mode: str = "nuclear",
                 p: float = 0.75, tau: int = 30) -> np.ndarray:
    """Singular-value shrinkage.

    nuclear mode subtracts the threshold from every singular value
    (clipped at zero); schatten_p_truncated passes the tau largest
    through and applies the generalized p-power soft threshold to the
    rest.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    out, _ = _lowrank_prox_with_sigmas(np.asarray(M, dtype=np.float64),
                                       threshold, mode, p, tau)
    return out


def sparse_prox(X: np.ndarray, W: np.ndarray, lam: float, mu: float) -> np.ndarray:
    """Elementwise weighted soft threshold sgn(X) * max(|X| - lam*W/mu, 0)."""
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if X.shape != W.shape:
        raise ValueError(f"dimension mismatch: {X.shape} vs {W.shape}")
    if mu <= 0:
        raise ValueError("mu must be positive")
    eps = lam * W / mu
    return np.sign(X) * np.maximum(np.abs(X) - eps, 0.0)


def noise_update(R: np.ndarray, beta: float, rho: float) -> np.ndarray:
    """Linear noise shrinkage N = rho/(2*beta + rho) * R."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    return (rho / (2.0 * beta + rho)) * np.asarray(R, dtype=np.float64)


def _lowrank_threshold(cfg: SolverConfig) -> float:
    # Schatten mode scales the sparse weight into the singular-value
    # threshold; nuclear mode uses the plain proximal scale 1/rho.
    return 1.0 / cfg.rho if cfg.lowrank_mode == "nuclear" else cfg.lam / cfg.rho


def solve(D: np.ndarray, W: np.ndarray, cfg: SolverConfig = SolverConfig()) -> Decomposition:
    """Decompose D into (L, E, N) guided by the weight matrix W.

    Starts from L = E = N = u = 0 and alternates the three proximal
    updates with a dual ascent until the reconstruction residual
    ||D - L - E - N||_inf drops below cfg.epsilon or cfg.maxstep
    iterations have run. The trace records (residual, objective) per
    iteration.
    """
    D = as_gray(D)
    W = np.asarray(W, dtype=np.float64)
    if D.shape != W.shape:
        raise ValueError(f"dimension mismatch: image {D.shape} vs weights {W.shape}")
    if not np.all((W > 0) & (W <= 1) & np.isfinite(W)):
        raise ValueError("weights must lie in (0, 1]")

    L = np.zeros_like(D)
    E = np.zeros_like(D)
    N = np.zeros_like(D)
    u = np.zeros_like(D)
    thr = _lowrank_threshold(cfg)
    # N must vanish as beta -> 0: were N given the full residual
    # (coefficient rho/(2*beta+rho)), the dual ascent would drain every
    # defect out of E within a few iterations.
    noise_coef = 2.0 * cfg.beta / (2.0 * cfg.beta + cfg.rho)
    trace: list[tuple[float, float]] = []
    converged = False
    iterations = 0

    for k in range(1, cfg.maxstep + 1):
        iterations = k
        L, sigmas = _lowrank_prox_with_sigmas(D - E - N + u, thr,
                                              cfg.lowrank_mode, cfg.p, cfg.tau)
        E = sparse_prox(D - L - N + u, W, cfg.lam, cfg.rho)
        N = noise_coef * (D - L - E + u)
        residual = D - L - E - N
        u = u + residual
        r_max = float(np.abs(residual).max())
        if not np.isfinite(r_max):
            raise FloatingPointError(f"non-finite residual at iteration {k}")
        trace.append((r_max, _objective_terms(sigmas, E, N, W, cfg)))
        if r_max < cfg.epsilon:
            converged = True
            break

    return Decomposition(L=L, E=E, N=N, u=u, iterations=iterations,
                         converged=converged, trace=trace)


def _objective_terms(sigmas: np.ndarray, E: np.ndarray, N: np.ndarray,
                     W: np.ndarray, cfg: SolverConfig) -> float:
    if cfg.lowrank_mode == "nuclear":
        lowrank = float(np.sum(sigmas))
    else:
        lowrank = float(np.sum(sigmas[cfg.tau:] ** cfg.p))
    sparse = cfg.lam * float(np.sum(np.abs(W * E)))
    noise = 0.5 * cfg.beta * float(np.sum(N * N))
    return lowrank + sparse + noise


def objective(decomp: Decomposition, W: np.ndarray, cfg: SolverConfig) -> float:
    """Model objective of a decomposition; diagnostic only."""
    W = np.asarray(W, dtype=np.float64)
    if decomp.L.shape != W.shape:
        raise ValueError("dimension mismatch between decomposition and weights")
    sigmas = np.linalg.svd(decomp.L, compute_uv=False)
    return _objective_terms(sigmas, decomp.E, decomp.N, W, cfg)
