"""Binary-input additive-noise channel, its genie-aided companion, and the
finite-state reduction used by the exact trellis machinery."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .noise import (GilbertElliottNoise, MarkovNoiseModel, _rng,
                    default_noise_spec)
from .quadrature import QuadratureSpec

GF2 = "gf2"  # modulation over GF(2): y = x xor error


@dataclass(frozen=True)
class ModulationMap:
    """Real signal levels for input bits 0 and 1."""

    a0: float
    a1: float

    def __post_init__(self):
        if self.a0 == self.a1:
            raise ValueError("modulation levels must differ")

    def amplitude(self, bits):
        bits = np.asarray(bits)
        return np.where(bits == 0, self.a0, self.a1)

    @classmethod
    def antipodal(cls, a: float) -> "ModulationMap":
        return cls(-a, a)


class MemoryChannel:
    """W(y|x) = f_N(y - m(x)) with first-order Markov additive noise."""

    def __init__(self, noise: MarkovNoiseModel, mod_map: ModulationMap):
        if not isinstance(noise, MarkovNoiseModel):
            raise TypeError("MemoryChannel requires an order-1 continuous noise "
                            "model; Gilbert-Elliott noise goes through the "
                            "finite-state path")
        self.noise = noise
        self.map = mod_map

    def likelihood(self, y, x):
        """W(y|x), the memory-ignorant (marginalized) channel law."""
        return self.noise.marginal_pdf(np.asarray(y, dtype=float)
                                       - self.map.amplitude(x))

    def ga_likelihood(self, y, x, n0):
        """Genie-aided law given the previous noise sample."""
        return self.noise.conditional_pdf(np.asarray(y, dtype=float)
                                          - self.map.amplitude(x), n0)

    def transmit(self, bits, seed, stream: int = 0):
        bits = np.asarray(bits)
        n = self.noise.sample_path(len(bits), seed, stream)
        return self.map.amplitude(bits) + n


def default_channel_spec(ch: MemoryChannel, nodes: int = 2001) -> QuadratureSpec:
    """Output-axis quadrature covering both modulation levels and the tails."""
    nlo, nhi = ch.noise.marginal_bounds()
    a_lo, a_hi = min(ch.map.a0, ch.map.a1), max(ch.map.a0, ch.map.a1)
    center = 0.5 * (a_lo + a_hi)
    scale = ch.noise.scale_hint() + 0.5 * (a_hi - a_lo)
    return QuadratureSpec(lo=a_lo + nlo, hi=a_hi + nhi, nodes=nodes,
                          center=center, scale=scale,
                          tail_power=ch.noise.tail_power_hint())


class FiniteStateChannel:
    """Discrete hidden-state channel: states S, row-stochastic transitions,
    per-(state, input) output distributions.

    Convention: at time i the state chain moves s_{i-1} -> s_i and the output
    y_i is emitted from (s_i, x_i).  The state process is independent of the
    inputs, so the stationary state law applies at every block boundary.
    """

    def __init__(self, transition, emission, output_values=None, meta=None,
                 boundary_obs=None):
        T = np.asarray(transition, dtype=float)
        E = np.asarray(emission, dtype=float)
        S = T.shape[0]
        if T.shape != (S, S) or np.any(T < 0) or not np.allclose(T.sum(axis=1), 1.0):
            raise ValueError("transition must be square row-stochastic")
        if E.ndim != 3 or E.shape[0] != S or E.shape[1] != 2 or np.any(E < 0):
            raise ValueError("emission must have shape (states, 2, outputs)")
        if not np.allclose(E.sum(axis=2), 1.0):
            raise ValueError("emission distributions must be normalized")
        self.transition = T
        self.emission = E
        self.n_states = S
        self.n_outputs = E.shape[2]
        self.output_values = (np.asarray(output_values, dtype=float)
                              if output_values is not None
                              else np.arange(self.n_outputs, dtype=float))
        self.stationary = GilbertElliottNoise._stationary(T) if S > 1 else np.ones(1)
        # What a genie at a block boundary observes about the state: the
        # per-state law of the previous noise symbol.  Identity means the
        # state itself is the noise value (observable-state channels).
        B = (np.eye(S) if boundary_obs is None
             else np.asarray(boundary_obs, dtype=float))
        if B.ndim != 2 or B.shape[0] != S or np.any(B < 0) \
                or not np.allclose(B.sum(axis=1), 1.0):
            raise ValueError("boundary_obs must be (states, obs) row-stochastic")
        self.boundary_obs = B
        self.n_boundary_obs = B.shape[1]
        self.meta = dict(meta or {})

    def boundary_prior(self) -> np.ndarray:
        """Stationary law of the boundary observation."""
        return self.stationary @ self.boundary_obs

    def state_posterior(self) -> np.ndarray:
        """P(state | boundary obs), shape (states, obs)."""
        prior = self.boundary_prior()
        joint = self.stationary[:, None] * self.boundary_obs
        return joint / np.maximum(prior[None, :], np.finfo(float).tiny)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_gilbert_elliott(cls, ge: GilbertElliottNoise, mod=GF2):
        """Exact embedding; `mod` is GF2 or a ModulationMap with integer-
        spaced levels (outputs become the distinct values of m(x)+error)."""
        em = ge.emission_pmf()  # (state, error symbol)
        if mod == GF2:
            E = np.zeros((2, 2, 2))
            for s in range(2):
                for x in range(2):
                    for err in range(2):
                        E[s, x, x ^ err] += em[s, err]
            return cls(ge.transition, E, output_values=[0.0, 1.0],
                       meta={"kind": "gilbert_elliott", "mod": GF2},
                       boundary_obs=em)
        levels = [mod.a0, mod.a1]
        outs = sorted({a + err for a in levels for err in (0.0, 1.0)})
        idx = {v: i for i, v in enumerate(outs)}
        E = np.zeros((2, 2, len(outs)))
        for s in range(2):
            for x, a in enumerate(levels):
                for err in range(2):
                    E[s, x, idx[a + err]] += em[s, err]
        return cls(ge.transition, E, output_values=outs,
                   meta={"kind": "gilbert_elliott", "mod": (mod.a0, mod.a1)},
                   boundary_obs=em)

    @classmethod
    def memoryless(cls, probs, output_values=None):
        """Single-state FSC from a (2, outputs) conditional pmf."""
        probs = np.asarray(probs, dtype=float)
        return cls(np.ones((1, 1)), probs[None, :, :], output_values=output_values,
                   meta={"kind": "memoryless"})

    # -- basic laws --------------------------------------------------------

    def mean_emission(self) -> np.ndarray:
        """P(y|s) with uniform input, shape (states, outputs)."""
        return self.emission.mean(axis=1)

    def sample(self, n_blocks: int, block_len: int, bits, seed: int,
               stream: int = 0):
        """Simulate (states, outputs) for iid blocks started at stationarity."""
        rng = _rng(seed, stream)
        bits = np.asarray(bits)
        S = self.n_states
        states = np.empty((n_blocks, block_len), dtype=np.int64)
        cum_pi = np.cumsum(self.stationary)
        cum_T = np.cumsum(self.transition, axis=1)
        u = rng.random((n_blocks, block_len))
        states[:, 0] = np.searchsorted(cum_pi, u[:, 0])
        for i in range(1, block_len):
            row = cum_T[states[:, i - 1]]
            states[:, i] = (u[:, i, None] > row).sum(axis=1)
        cum_E = np.cumsum(self.emission, axis=2)
        v = rng.random((n_blocks, block_len))
        rows = cum_E[states, bits]             # (blocks, len, outputs)
        ys = (v[:, :, None] > rows).sum(axis=2)
        return states, ys

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({
            "transition": self.transition.tolist(),
            "emission": self.emission.tolist(),
            "output_values": self.output_values.tolist(),
            "meta": self.meta,
            "boundary_obs": self.boundary_obs.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "FiniteStateChannel":
        d = json.loads(text)
        return cls(d["transition"], d["emission"], d["output_values"],
                   d["meta"], d.get("boundary_obs"))


def to_fsc(ch, bins: int | None = None, out_bins: int | None = None,
           mod=GF2, grid_nodes: int = 3001) -> FiniteStateChannel:
    """Reduce a channel to a finite-state channel.

    Gilbert-Elliott noise maps exactly (bins ignored).  Continuous noise is
    quantized into equal-probability bins under the stationary marginal, with
    transitions computed from the exact pair density and emissions from the
    within-bin marginal law on a separate output-cell grid.
    """
    if isinstance(ch, GilbertElliottNoise):
        return FiniteStateChannel.from_gilbert_elliott(ch, mod)
    if not isinstance(ch, MemoryChannel):
        raise TypeError("expected MemoryChannel or GilbertElliottNoise")
    if bins is None or bins < 1:
        raise ValueError("continuous noise requires bins >= 1")
    noise = ch.noise
    out_bins = out_bins or max(64, 2 * bins)

    qs = np.linspace(0.0, 1.0, bins + 1)
    lo, hi = noise.marginal_bounds()
    edges = np.empty(bins + 1)
    edges[0], edges[-1] = lo, hi
    if bins > 1:
        edges[1:-1] = _marginal_ppf(noise, qs[1:-1])

    spec = default_noise_spec(noise, grid_nodes)
    y, w = spec.grid()
    fy = noise.marginal_pdf(y) * w
    which = np.clip(np.searchsorted(edges, y, side="right") - 1, 0, bins - 1)
    bin_mass = np.bincount(which, weights=fy, minlength=bins)
    if np.any(bin_mass <= 0):
        raise ValueError("degenerate noise bins (zero mass)")

    # transitions: aggregate the exact pair density over bin pairs
    T = np.zeros((bins, bins))
    for j in range(bins):
        sel = which == j
        y0 = y[sel]
        w0 = fy[sel]
        cond = noise.conditional_pdf(y[None, :], y0[:, None]) * w[None, :]
        contrib = (w0[:, None] * cond).sum(axis=0)
        T[j] = np.bincount(which, weights=contrib, minlength=bins)
    T /= T.sum(axis=1, keepdims=True)

    # output cells: equal-probability under the uniform-input output mixture
    out_edges = _mixture_out_edges(ch, out_bins)

    # emission: P(y in cell | n in bin k, x) from the within-bin marginal law
    E = np.zeros((bins, 2, out_bins))
    for xi, a in enumerate((ch.map.a0, ch.map.a1)):
        n_lo = np.maximum(edges[:-1][:, None], (out_edges[:-1] - a)[None, :])
        n_hi = np.minimum(edges[1:][:, None], (out_edges[1:] - a)[None, :])
        mass = np.clip(_marginal_cdf(noise, n_hi) - _marginal_cdf(noise, n_lo),
                       0.0, None)
        mass[n_hi <= n_lo] = 0.0
        E[:, xi, :] = mass / mass.sum(axis=1, keepdims=True)

    centers = 0.5 * (out_edges[:-1] + out_edges[1:])
    return FiniteStateChannel(T, E, output_values=centers,
                              meta={"kind": "quantized", "bins": bins,
                                    "out_bins": out_bins,
                                    "map": (ch.map.a0, ch.map.a1)})


def _marginal_ppf(noise, q):
    from .noise import BivariateGaussianNoise, BivariateStudentNoise
    if isinstance(noise, BivariateGaussianNoise):
        return stats.norm.ppf(q, scale=np.sqrt(noise.var))
    if isinstance(noise, BivariateStudentNoise):
        return stats.t.ppf(q, df=noise.nu, scale=np.sqrt(noise.sigma[0, 0]))
    raise TypeError("quantile function unavailable for this model")


def _marginal_cdf(noise, x):
    from .noise import BivariateGaussianNoise, BivariateStudentNoise
    if isinstance(noise, BivariateGaussianNoise):
        return stats.norm.cdf(x, scale=np.sqrt(noise.var))
    if isinstance(noise, BivariateStudentNoise):
        return stats.t.cdf(x, df=noise.nu, scale=np.sqrt(noise.sigma[0, 0]))
    raise TypeError("cdf unavailable for this model")


def _mixture_out_edges(ch: MemoryChannel, out_bins: int) -> np.ndarray:
    """Equal-probability cell edges under the uniform-input output marginal."""
    spec = default_channel_spec(ch, 4001)
    y, w = spec.grid()
    dens = 0.5 * (ch.likelihood(y, 0) + ch.likelihood(y, 1))
    cdf = np.cumsum(dens * w)
    cdf /= cdf[-1]
    qs = np.linspace(0.0, 1.0, out_bins + 1)[1:-1]
    inner = np.interp(qs, cdf, y)
    return np.concatenate(([y[0]], inner, [y[-1]]))
