"""Spectral-norm estimation (power iteration) and hard projection.

Residual-block weights are kept inside a spectral-norm ball of radius
``bound``: after every optimizer step one warm-started power iteration
refreshes the top singular value estimate and the weight is rescaled by
bound/sigma whenever the estimate exceeds the bound.  At the end of
training a longer (20-iteration) estimate drives a final projection so
the bound holds for the converged estimate, not just the warm one.
"""

from __future__ import annotations

import numpy as np

from .rng import STREAM_SPECTRAL, derive_seed, make_rng, normals

_TINY = 1e-30


def power_iteration(
    W: np.ndarray, u: np.ndarray, n_iterations: int = 1
) -> tuple[float, np.ndarray]:
    """Estimate the largest singular value of W, warm-starting from u.

    Iterates v = normalize(W^T u), u = normalize(W v) and returns
    (u^T W v, u).  The estimate never exceeds the true spectral norm and
    converges to it as iterations grow.  An all-zero W returns sigma 0
    with the state unchanged.
    """
    if n_iterations < 1:
        raise ValueError(f"n_iterations must be >= 1, got {n_iterations}")
    if W.ndim != 2:
        raise ValueError("W must be 2-D")
    if u.shape != (W.shape[0],):
        raise ValueError(f"u must have shape ({W.shape[0]},), got {u.shape}")
    v = None
    for _ in range(n_iterations):
        v = W.T @ u
        nv = np.linalg.norm(v)
        if nv < _TINY:
            return 0.0, u
        v = v / nv
        u_new = W @ v
        nu = np.linalg.norm(u_new)
        if nu < _TINY:
            return 0.0, u
        u = u_new / nu
    return float(u @ (W @ v)), u


def project_to_bound(W: np.ndarray, sigma: float, bound: float) -> np.ndarray:
    """Rescale W to spectral norm ``bound`` when sigma exceeds it.

    Returns W itself (not a copy) when sigma <= bound, so the in-bound
    path is bitwise a no-op.
    """
    if bound <= 0:
        raise ValueError(f"bound must be > 0, got {bound}")
    if sigma <= bound:
        return W
    return W * (bound / sigma)


class SpectralNormalizer:
    """Stateful projection hook over a model's hidden weight matrices.

    Keeps one persistent left singular vector estimate per tracked
    parameter name (seeded random on first touch), applies
    ``n_power_iterations`` per training step, and a ``final_iterations``
    estimate-project-re-estimate pass at finalization.  The converged
    post-projection sigmas are kept for checkpoint audit.
    """

    def __init__(
        self,
        bound: float = 0.95,
        n_power_iterations: int = 1,
        final_iterations: int = 20,
        seed: int = 0,
    ):
        if bound <= 0:
            raise ValueError(f"bound must be > 0, got {bound}")
        if n_power_iterations < 1 or final_iterations < 1:
            raise ValueError("iteration counts must be >= 1")
        self.bound = float(bound)
        self.n_power_iterations = int(n_power_iterations)
        self.final_iterations = int(final_iterations)
        self.seed = int(seed)
        self._u: dict[str, np.ndarray] = {}
        self.converged_sigmas: dict[str, float] = {}

    def _state(self, name: str, out_dim: int) -> np.ndarray:
        if name not in self._u:
            rng = make_rng(derive_seed(self.seed, STREAM_SPECTRAL, len(self._u)))
            u = normals(rng, out_dim)
            self._u[name] = u / np.linalg.norm(u)
        return self._u[name]

    def step(self, params: dict[str, np.ndarray], targets: list[str]) -> None:
        """Warm power iteration + projection, in place, for each target."""
        for name in targets:
            W = params[name]
            u = self._state(name, W.shape[0])
            sigma, u = power_iteration(W, u, self.n_power_iterations)
            self._u[name] = u
            if sigma > self.bound:
                W *= self.bound / sigma

    def finalize(self, params: dict[str, np.ndarray], targets: list[str]) -> dict[str, float]:
        """Converged estimate, projection, and post-projection re-estimate."""
        for name in targets:
            W = params[name]
            u = self._state(name, W.shape[0])
            sigma, u = power_iteration(W, u, self.final_iterations)
            if sigma > self.bound:
                W *= self.bound / sigma
            sigma_post, u = power_iteration(W, u, self.final_iterations)
            self._u[name] = u
            self.converged_sigmas[name] = float(sigma_post)
        return dict(self.converged_sigmas)
