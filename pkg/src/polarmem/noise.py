"""Stationary first-order Markov noise models.

Each continuous model exposes its stationary marginal density, the one-step
conditional density, and a seeded sampler whose first draw comes from the
stationary marginal.  The Gilbert-Elliott error process is hidden-Markov
rather than order-1 Markov, so it lives outside the continuous interface and
is consumed through the finite-state channel reduction; only its exact pair
statistics are exposed here.
"""

from __future__ import annotations

import numpy as np
from scipy import signal, stats

from .quadrature import (ENUMERATION, QUADRATURE, EstimateWithCI,
                         QuadratureSpec, integrate_2d, plogq)

TAIL_MASS = 1e-10


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    # Counter-based generator: independent streams per (seed, stream) key.
    return np.random.Generator(np.random.Philox(key=(seed, stream)))


def _check_toeplitz_spd(sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (2, 2):
        raise ValueError("sigma must be 2x2")
    if not np.isclose(sigma[0, 1], sigma[1, 0]):
        raise ValueError("sigma must be symmetric")
    if not np.isclose(sigma[0, 0], sigma[1, 1]):
        raise ValueError("sigma must be Toeplitz (equal diagonal)")
    if sigma[0, 0] <= 0 or abs(sigma[0, 1]) >= sigma[0, 0]:
        raise ValueError("sigma must be positive definite")
    return sigma


class MarkovNoiseModel:
    """Interface contract for order-1 stationary noise."""

    order = 1
    continuous = True

    def marginal_pdf(self, n):
        raise NotImplementedError

    def conditional_pdf(self, n1, n0):
        raise NotImplementedError

    def sample_path(self, length: int, seed: int, stream: int = 0) -> np.ndarray:
        raise NotImplementedError

    def marginal_bounds(self, tail: float = TAIL_MASS) -> tuple[float, float]:
        """Symmetric truncation interval for quadrature."""
        raise NotImplementedError

    def scale_hint(self) -> float:
        """Characteristic width used for node compression."""
        raise NotImplementedError

    def tail_power_hint(self) -> float:
        """Node-compression exponent; > 1 for heavy-tailed marginals."""
        return 1.0


class BivariateGaussianNoise(MarkovNoiseModel):
    """Colored Gaussian noise: consecutive pairs are bivariate normal."""

    def __init__(self, sigma):
        self.sigma = _check_toeplitz_spd(sigma)
        self.var = self.sigma[0, 0]
        self.rho = self.sigma[0, 1] / self.sigma[0, 0]
        self.cond_var = float(np.linalg.det(self.sigma)) / self.sigma[0, 0]
        if self.cond_var <= 0:
            raise ValueError("conditional variance must be positive")

    @classmethod
    def from_rho(cls, rho: float, var: float = 1.0) -> "BivariateGaussianNoise":
        return cls([[var, rho * var], [rho * var, var]])

    def marginal_pdf(self, n):
        return stats.norm.pdf(n, scale=np.sqrt(self.var))

    def conditional_pdf(self, n1, n0):
        n0 = np.asarray(n0, dtype=float)
        return stats.norm.pdf(n1, loc=self.rho * n0, scale=np.sqrt(self.cond_var))

    def sample_path(self, length, seed, stream=0):
        if length < 1:
            raise ValueError("length must be >= 1")
        rng = _rng(seed, stream)
        x0 = rng.normal(0.0, np.sqrt(self.var))
        if length == 1:
            return np.array([x0])
        eps = rng.normal(0.0, np.sqrt(self.cond_var), size=length - 1)
        # AR(1) recursion x_i = rho x_{i-1} + eps_i, seeded at the marginal.
        rest = signal.lfilter([1.0], [1.0, -self.rho], eps, zi=[self.rho * x0])[0]
        return np.concatenate(([x0], rest))

    def sample_marginal(self, size, seed, stream=0):
        return _rng(seed, stream).normal(0.0, np.sqrt(self.var), size=size)

    def marginal_bounds(self, tail=TAIL_MASS):
        b = max(8.0 * np.sqrt(self.var),
                stats.norm.ppf(1.0 - tail, scale=np.sqrt(self.var)))
        return -b, b

    def scale_hint(self):
        return float(np.sqrt(self.var))


class BivariateStudentNoise(MarkovNoiseModel):
    """Heavy-tailed noise: consecutive pairs are bivariate Student-t.

    The one-step conditional is the exact joint/marginal ratio, which for the
    bivariate t is again a Student density with nu+1 degrees of freedom,
    location delta = n0 * sigma12 / sigma11 and a scale that widens with |n0|.
    """

    def __init__(self, sigma, nu: float):
        self.sigma = _check_toeplitz_spd(sigma)
        if nu <= 0:
            raise ValueError("nu must be positive")
        self.nu = float(nu)
        self.det = float(np.linalg.det(self.sigma))
        self.cond_scale2 = self.det / self.sigma[0, 0]  # sigma in the paper-free sense

    @classmethod
    def from_first_row(cls, row, nu: float) -> "BivariateStudentNoise":
        s11, s12 = row
        return cls([[s11, s12], [s12, s11]], nu)

    def marginal_pdf(self, n):
        return stats.t.pdf(n, df=self.nu, scale=np.sqrt(self.sigma[0, 0]))

    def joint_pdf(self, n0, n1):
        n0 = np.asarray(n0, dtype=float)
        n1 = np.asarray(n1, dtype=float)
        inv = np.linalg.inv(self.sigma)
        q = inv[0, 0] * n0 ** 2 + 2 * inv[0, 1] * n0 * n1 + inv[1, 1] * n1 ** 2
        from scipy.special import gammaln
        lognorm = (gammaln(0.5 * self.nu + 1.0) - gammaln(0.5 * self.nu)
                   - np.log(self.nu * np.pi) - 0.5 * np.log(self.det))
        return np.exp(lognorm) * (1.0 + q / self.nu) ** (-(0.5 * self.nu + 1.0))

    def _cond_params(self, n0):
        n0 = np.asarray(n0, dtype=float)
        loc = n0 * self.sigma[0, 1] / self.sigma[0, 0]
        scale2 = (self.nu + n0 ** 2 / self.sigma[0, 0]) * self.cond_scale2 / (self.nu + 1.0)
        return loc, np.sqrt(scale2)

    def conditional_pdf(self, n1, n0):
        loc, scale = self._cond_params(n0)
        return stats.t.pdf(n1, df=self.nu + 1.0, loc=loc, scale=scale)

    def sample_path(self, length, seed, stream=0):
        if length < 1:
            raise ValueError("length must be >= 1")
        rng = _rng(seed, stream)
        out = np.empty(length)
        out[0] = np.sqrt(self.sigma[0, 0]) * rng.standard_t(self.nu)
        for i in range(1, length):
            loc, scale = self._cond_params(out[i - 1])
            out[i] = loc + scale * rng.standard_t(self.nu + 1.0)
        return out

    def sample_marginal(self, size, seed, stream=0):
        rng = _rng(seed, stream)
        return np.sqrt(self.sigma[0, 0]) * rng.standard_t(self.nu, size=size)

    def marginal_bounds(self, tail=TAIL_MASS):
        # Quantile-based: moment-based truncation fails for nu <= 2.
        b = float(stats.t.ppf(1.0 - tail, df=self.nu, scale=np.sqrt(self.sigma[0, 0])))
        return -b, b

    def scale_hint(self):
        return float(np.sqrt(self.sigma[0, 0]))

    def tail_power_hint(self):
        return 3.0


class GilbertElliottNoise:
    """Two-state hidden-Markov binary error process.

    Not an order-1 Markov model: it enters the pipeline via the finite-state
    channel reduction.  Pair and marginal statistics are exact state sums.
    """

    continuous = False

    def __init__(self, transition, error_probs):
        P = np.asarray(transition, dtype=float)
        e = np.asarray(error_probs, dtype=float)
        if P.shape != (2, 2) or np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0):
            raise ValueError("transition must be 2x2 row-stochastic")
        if e.shape != (2,) or np.any(e < 0) or np.any(e > 1):
            raise ValueError("error probabilities must lie in [0, 1]")
        if np.any(np.linalg.matrix_power(P, 2) <= 0):
            raise ValueError("chain must be irreducible and aperiodic")
        self.transition = P
        self.error_probs = e
        self.stationary = self._stationary(P)

    @staticmethod
    def _stationary(P: np.ndarray) -> np.ndarray:
        vals, vecs = np.linalg.eig(P.T)
        k = int(np.argmin(np.abs(vals - 1.0)))
        pi = np.real(vecs[:, k])
        pi = pi / pi.sum()
        return pi

    @property
    def error_rate(self) -> float:
        return float(self.stationary @ self.error_probs)

    def emission_pmf(self) -> np.ndarray:
        """P(noise symbol | state), shape (2 states, 2 symbols)."""
        e = self.error_probs
        return np.stack([1.0 - e, e], axis=1)

    def pair_joint(self) -> np.ndarray:
        """Exact joint P(n0, n1) over consecutive error indicators."""
        em = self.emission_pmf()
        # sum_{s0,s1} pi(s0) em(s0,n0) P(s0,s1) em(s1,n1)
        return np.einsum("a,ai,ab,bj->ij", self.stationary, em, self.transition, em)

    def sample_path(self, length, seed, stream=0):
        if length < 1:
            raise ValueError("length must be >= 1")
        states = self.sample_states(length, seed, stream)
        rng = _rng(seed, stream + (1 << 20))
        return (rng.random(length) < self.error_probs[states]).astype(np.int64)

    def sample_states(self, length, seed, stream=0):
        rng = _rng(seed, stream)
        u = rng.random(length)
        states = np.empty(length, dtype=np.int64)
        states[0] = int(u[0] > self.stationary[0])
        p_stay0 = self.transition[:, 0]
        for i in range(1, length):
            states[i] = int(u[i] > p_stay0[states[i - 1]])
        return states


def default_noise_spec(model: MarkovNoiseModel, nodes: int = 2001) -> QuadratureSpec:
    lo, hi = model.marginal_bounds()
    return QuadratureSpec(lo=lo, hi=hi, nodes=nodes, center=0.0,
                          scale=model.scale_hint(),
                          tail_power=model.tail_power_hint())


def noise_pair_mi(model, spec: QuadratureSpec | None = None) -> EstimateWithCI:
    """I(N1; N0) of the stationary pair, in bits."""
    if isinstance(model, GilbertElliottNoise):
        joint = model.pair_joint()
        p0 = joint.sum(axis=1)
        p1 = joint.sum(axis=0)
        ratio = joint / np.outer(p0, p1)
        val = float(np.sum(plogq(joint, ratio)))
        return EstimateWithCI(max(val, 0.0), 0.0, ENUMERATION, joint.size)
    if spec is None:
        spec = default_noise_spec(model)

    def integrand(n0, n1):
        f0 = model.marginal_pdf(n0)
        f1 = model.marginal_pdf(n1)
        c = model.conditional_pdf(n1, n0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(f1 > 0, c / np.maximum(f1, np.finfo(float).tiny), 1.0)
        return plogq(f0 * c, ratio)

    val, resid = integrate_2d(integrand, spec, spec)
    val = max(val, 0.0)
    return EstimateWithCI(val, resid, QUADRATURE, spec.nodes ** 2,
                          converged=resid <= spec.tol)
