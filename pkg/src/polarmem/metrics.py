"""Scalar information quantities: mutual information, Bhattacharyya
parameters, the genie-aided variants, and the small-block identities.

Continuous channels are handled by quadrature (with Monte-Carlo
cross-checks); finite-state channels by exact enumeration of output strings
via the forward algorithm.
"""

from __future__ import annotations

import numpy as np

from .channel import FiniteStateChannel, MemoryChannel, default_channel_spec
from .noise import (BivariateGaussianNoise, BivariateStudentNoise, _rng,
                    default_noise_spec, noise_pair_mi)
from .quadrature import (ENUMERATION, MONTE_CARLO, QUADRATURE, EstimateWithCI,
                         QuadratureSpec, integrate_2d, plogq)

ENUM_GUARD = 1 << 24


# ---------------------------------------------------------------------------
# continuous channels: quadrature
# ---------------------------------------------------------------------------

def mi_w(ch: MemoryChannel, spec: QuadratureSpec | None = None) -> EstimateWithCI:
    """I(W) in bits, uniform binary input."""
    spec = spec or default_channel_spec(ch)

    def integrand(y):
        w0 = ch.likelihood(y, 0)
        w1 = ch.likelihood(y, 1)
        wy = 0.5 * (w0 + w1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (plogq(0.5 * w0, np.where(wy > 0, w0 / np.maximum(wy, 1e-300), 1.0))
                    + plogq(0.5 * w1, np.where(wy > 0, w1 / np.maximum(wy, 1e-300), 1.0)))

    y, w = spec.grid()
    vals = integrand(y)
    fine = float(vals @ w)
    from .quadrature import _coarsen
    coarse = float(vals[::2] @ _coarsen(w))
    resid = abs(fine - coarse)
    val = float(np.clip(fine, 0.0, 1.0))
    return EstimateWithCI(val, resid, QUADRATURE, spec.nodes,
                          converged=resid <= spec.tol)


def z_w(ch: MemoryChannel, spec: QuadratureSpec | None = None) -> EstimateWithCI:
    """Z(W) = integral of sqrt(W(y|0) W(y|1))."""
    spec = spec or default_channel_spec(ch)
    y, w = spec.grid()
    vals = np.sqrt(ch.likelihood(y, 0) * ch.likelihood(y, 1))
    from .quadrature import _coarsen
    fine = float(vals @ w)
    resid = abs(fine - float(vals[::2] @ _coarsen(w)))
    return EstimateWithCI(float(np.clip(fine, 0.0, 1.0)), resid, QUADRATURE,
                          spec.nodes, converged=resid <= spec.tol)


def _ga_spec(ch: MemoryChannel, n0: float, nodes: int = 1501) -> QuadratureSpec:
    """Output-axis spec adapted to the genie-aided conditional given n0."""
    noise = ch.noise
    if isinstance(noise, BivariateGaussianNoise):
        loc = noise.rho * n0
        scale = float(np.sqrt(noise.cond_var))
        half = 6.5 * scale
    elif isinstance(noise, BivariateStudentNoise):
        loc, s = noise._cond_params(n0)
        loc, scale = float(loc), float(s)
        from scipy import stats
        half = float(stats.t.ppf(1.0 - 1e-10, df=noise.nu + 1.0)) * scale
    else:
        raise TypeError("unsupported noise model")
    a_lo, a_hi = min(ch.map.a0, ch.map.a1), max(ch.map.a0, ch.map.a1)
    return QuadratureSpec(lo=a_lo + loc - half, hi=a_hi + loc + half,
                          nodes=nodes, center=0.5 * (a_lo + a_hi) + loc,
                          scale=scale + 0.5 * (a_hi - a_lo),
                          tail_power=noise.tail_power_hint())


def zg_conditional(ch: MemoryChannel, n0: float,
                   spec: QuadratureSpec | None = None) -> EstimateWithCI:
    """Conditional Bhattacharyya parameter of the genie-aided channel."""
    spec = spec or _ga_spec(ch, n0)
    y, w = spec.grid()
    vals = np.sqrt(ch.ga_likelihood(y, 0, n0) * ch.ga_likelihood(y, 1, n0))
    from .quadrature import _coarsen
    fine = float(vals @ w)
    resid = abs(fine - float(vals[::2] @ _coarsen(w)))
    return EstimateWithCI(float(np.clip(fine, 0.0, 1.0)), resid, QUADRATURE,
                          spec.nodes, converged=resid <= spec.tol)


def zg_w(ch: MemoryChannel, outer_spec: QuadratureSpec | None = None,
         inner_nodes: int = 1201) -> EstimateWithCI:
    """Z_g(W): expectation of the conditional Bhattacharyya parameter over
    the stationary previous-noise marginal."""
    outer = outer_spec or default_noise_spec(ch.noise, 1201)
    n0s, w0 = outer.grid()
    f0 = ch.noise.marginal_pdf(n0s)
    zs = np.empty_like(n0s)
    resid_inner = 0.0
    for k, n0 in enumerate(n0s):
        est = zg_conditional(ch, float(n0), _ga_spec(ch, float(n0), inner_nodes))
        zs[k] = est.value
        resid_inner = max(resid_inner, est.stderr)
    from .quadrature import _coarsen
    vals = f0 * zs
    fine = float(vals @ w0)
    resid = abs(fine - float(vals[::2] @ _coarsen(w0))) + resid_inner
    return EstimateWithCI(float(np.clip(fine, 0.0, 1.0)), resid, QUADRATURE,
                          outer.nodes * inner_nodes, converged=resid <= outer.tol)


def _pair_hypothesis_densities(ch: MemoryChannel, y0, y1):
    """p(y0, y1 | x0, x1) for the four input pairs, via the order-1
    factorization f_N(y0-x0) * f_cond(y1-x1 | y0-x0)."""
    amps = (ch.map.a0, ch.map.a1)
    out = {}
    for x0, a in enumerate(amps):
        base = ch.noise.marginal_pdf(y0 - a)
        n0 = y0 - a
        for x1, b in enumerate(amps):
            out[(x0, x1)] = base * ch.noise.conditional_pdf(y1 - b, n0)
    return out


def _grid2(ch: MemoryChannel, spec: QuadratureSpec | None, nodes: int):
    spec = spec or default_channel_spec(ch, nodes)
    y, w = spec.grid()
    return spec, y, w


def output_pair_mi(ch: MemoryChannel, spec: QuadratureSpec | None = None,
                   nodes: int = 1501) -> EstimateWithCI:
    """I(Y1; Y0) for uniform iid inputs."""
    spec, y, w = _grid2(ch, spec, nodes)
    P = _pair_hypothesis_densities(ch, y[:, None], y[None, :])
    joint = 0.25 * sum(P.values())
    m0 = (joint * w[None, :]).sum(axis=1)
    m1 = (joint * w[:, None]).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = joint / np.maximum(np.outer(m0, m1), 1e-300)
    vals = plogq(joint, ratio)
    from .quadrature import _coarsen
    fine = float(w @ vals @ w)
    wc = _coarsen(w)
    # coarse marginals recomputed on the subgrid for a consistent check
    jc = joint[::2, ::2]
    m0c = (jc * wc[None, :]).sum(axis=1)
    m1c = (jc * wc[:, None]).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vc = plogq(jc, jc / np.maximum(np.outer(m0c, m1c), 1e-300))
    resid = abs(fine - float(wc @ vc @ wc))
    return EstimateWithCI(max(fine, 0.0), resid, QUADRATURE, spec.nodes ** 2,
                          converged=resid <= spec.tol)


def single_layer_mi(ch: MemoryChannel, spec: QuadratureSpec | None = None,
                    nodes: int = 1501) -> tuple[EstimateWithCI, EstimateWithCI]:
    """(I(W2^(1)), I(W2^(2))) for one polarization layer, by 2-D quadrature."""
    spec, y, w = _grid2(ch, spec, nodes)
    P = _pair_hypothesis_densities(ch, y[:, None], y[None, :])

    def both(w_axis):
        sl = slice(None) if w_axis is w else slice(None, None, 2)
        # p(y | u1, u2) with x0 = u1 xor u2, x1 = u2
        pu = {(u1, u2): P[(u1 ^ u2, u2)][sl, sl] for u1 in (0, 1) for u2 in (0, 1)}
        p_u1 = {u1: 0.5 * (pu[(u1, 0)] + pu[(u1, 1)]) for u1 in (0, 1)}
        p_y = 0.5 * (p_u1[0] + p_u1[1])
        i1 = 0.0
        i2 = 0.0
        for u1 in (0, 1):
            with np.errstate(divide="ignore", invalid="ignore"):
                v1 = plogq(0.5 * p_u1[u1],
                           p_u1[u1] / np.maximum(p_y, 1e-300))
            i1 += float(w_axis @ v1 @ w_axis)
            for u2 in (0, 1):
                with np.errstate(divide="ignore", invalid="ignore"):
                    v2 = plogq(0.25 * pu[(u1, u2)],
                               pu[(u1, u2)] / np.maximum(p_u1[u1], 1e-300))
                i2 += float(w_axis @ v2 @ w_axis)
        return i1, i2

    from .quadrature import _coarsen
    i1f, i2f = both(w)
    i1c, i2c = both(_coarsen(w))
    r1, r2 = abs(i1f - i1c), abs(i2f - i2c)
    e1 = EstimateWithCI(float(np.clip(i1f, 0.0, 1.0)), r1, QUADRATURE,
                        spec.nodes ** 2, converged=r1 <= spec.tol)
    e2 = EstimateWithCI(float(np.clip(i2f, 0.0, 1.0)), r2, QUADRATURE,
                        spec.nodes ** 2, converged=r2 <= spec.tol)
    return e1, e2


def lemma1_residual(ch: MemoryChannel, spec: QuadratureSpec | None = None,
                    nodes: int = 1501) -> float:
    """LHS - RHS of the single-layer mutual-information identity
    I(W2^(1)) + I(W2^(2)) = 2 I(W) + I(N1;N0) - I(Y1;Y0)."""
    e1, e2 = single_layer_mi(ch, spec, nodes)
    iw = mi_w(ch)
    nci = noise_pair_mi(ch.noise)
    ypair = output_pair_mi(ch, spec, nodes)
    return (e1.value + e2.value) - 2.0 * iw.value - nci.value + ypair.value


# ---------------------------------------------------------------------------
# continuous channels: Monte-Carlo cross-checks
# ---------------------------------------------------------------------------

def mi_w_mc(ch: MemoryChannel, samples: int, seed: int) -> EstimateWithCI:
    """Independent MC estimate of I(W) from marginal-noise draws."""
    rng = _rng(seed, 0)
    x = rng.integers(0, 2, size=samples)
    n = ch.noise.sample_marginal(samples, seed, stream=1)
    y = ch.map.amplitude(x) + n
    w_true = ch.likelihood(y, x)
    w_mix = 0.5 * (ch.likelihood(y, 0) + ch.likelihood(y, 1))
    stats_ = np.log2(np.maximum(w_true, 1e-300) / np.maximum(w_mix, 1e-300))
    return _mc_estimate(stats_)


def z_w_mc(ch: MemoryChannel, samples: int, seed: int) -> EstimateWithCI:
    """MC estimate of Z(W): mean of sqrt(W(y|1)/W(y|0)) under y ~ W(.|0)."""
    n = ch.noise.sample_marginal(samples, seed, stream=2)
    y = ch.map.a0 + n
    r = np.sqrt(ch.likelihood(y, 1) / np.maximum(ch.likelihood(y, 0), 1e-300))
    return _mc_estimate(r)


def _mc_estimate(stats_: np.ndarray) -> EstimateWithCI:
    m = float(np.mean(stats_))
    se = float(np.std(stats_, ddof=1) / np.sqrt(len(stats_)))
    return EstimateWithCI(m, se, MONTE_CARLO, len(stats_))


# ---------------------------------------------------------------------------
# finite-state channels: exact enumeration
# ---------------------------------------------------------------------------

def _guard(n_strings: int):
    if n_strings > ENUM_GUARD:
        raise ValueError(f"enumeration size {n_strings} exceeds guard {ENUM_GUARD}")


def _forward_strings(fsc: FiniteStateChannel, n_symbols: int) -> np.ndarray:
    """P(y_1^n) for every output string (uniform iid inputs), flat array of
    length |Y|^n with y_1 as the most significant digit."""
    Y = fsc.n_outputs
    _guard(Y ** n_symbols)
    em = fsc.mean_emission()  # (S, Y)
    alpha = fsc.stationary[None, :].copy()
    for step in range(n_symbols):
        alpha = alpha @ fsc.transition
        alpha = (alpha[:, None, :] * em.T[None, :, :]).reshape(-1, fsc.n_states)
    return alpha.sum(axis=1)


def _mi_from_joint(joint: np.ndarray) -> float:
    """MI of a 2-D joint pmf, in bits."""
    p0 = joint.sum(axis=1, keepdims=True)
    p1 = joint.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = joint / np.maximum(p0 * p1, 1e-300)
    return float(np.sum(plogq(joint, ratio)))


def fsc_mi_w(fsc: FiniteStateChannel) -> EstimateWithCI:
    """I(W) of the memory-ignorant single use: W(y|x) = sum_s pi(s) E[s,x,y]."""
    w = np.einsum("s,sxy->xy", fsc.stationary, fsc.emission)
    joint = 0.5 * w
    return EstimateWithCI(_mi_from_joint(joint), 0.0, ENUMERATION, w.size)


def fsc_z_w(fsc: FiniteStateChannel) -> EstimateWithCI:
    w = np.einsum("s,sxy->xy", fsc.stationary, fsc.emission)
    z = float(np.sum(np.sqrt(w[0] * w[1])))
    return EstimateWithCI(min(z, 1.0), 0.0, ENUMERATION, w.size)


def fsc_zg_conditional(fsc: FiniteStateChannel) -> np.ndarray:
    """Z_g given each boundary observation (the previous noise symbol).

    The genie sees the previous noise value, not the hidden state, so the
    conditional law mixes states by the observation posterior:
    P(y | x, obs) = sum_{s0, s} P(s0|obs) T[s0, s] E[s, x, y].
    """
    post = fsc.state_posterior()                       # (S, O)
    w = np.einsum("ao,ab,bxy->oxy", post, fsc.transition, fsc.emission)
    return np.sqrt(w[:, 0, :] * w[:, 1, :]).sum(axis=1)


def fsc_zg_w(fsc: FiniteStateChannel) -> EstimateWithCI:
    zg = float(fsc.boundary_prior() @ fsc_zg_conditional(fsc))
    return EstimateWithCI(min(zg, 1.0), 0.0, ENUMERATION,
                          fsc.n_boundary_obs * fsc.n_outputs)


def fsc_output_pair_mi(fsc: FiniteStateChannel) -> EstimateWithCI:
    em = fsc.mean_emission()
    joint = np.einsum("a,ai,ab,bj->ij", fsc.stationary, em, fsc.transition, em)
    return EstimateWithCI(max(_mi_from_joint(joint), 0.0), 0.0, ENUMERATION,
                          joint.size)


def fsc_noise_pair_mi(fsc: FiniteStateChannel) -> EstimateWithCI:
    """Pair MI of the noise process (emissions with the all-zero input)."""
    e0 = fsc.emission[:, 0, :]
    joint = np.einsum("a,ai,ab,bj->ij", fsc.stationary, e0, fsc.transition, e0)
    return EstimateWithCI(max(_mi_from_joint(joint), 0.0), 0.0, ENUMERATION,
                          joint.size)


def fsc_y0_noise_mi(fsc: FiniteStateChannel) -> float:
    """I(Y0; N1), the tail bound: next-step noise symbol vs current output."""
    em = fsc.mean_emission()
    e0 = fsc.emission[:, 0, :]
    joint = np.einsum("a,ai,ab,bj->ij", fsc.stationary, em, fsc.transition, e0)
    return _mi_from_joint(joint)


def truncated_tail_mi(fsc: FiniteStateChannel, i_max: int) -> np.ndarray:
    """The sequence I(Y0; Y1^i) for i = 1..i_max, by exact enumeration."""
    Y = fsc.n_outputs
    _guard(Y ** (i_max + 1))
    out = np.empty(i_max)
    for i in range(1, i_max + 1):
        p = _forward_strings(fsc, i + 1).reshape(Y, Y ** i)
        out[i - 1] = max(_mi_from_joint(p), 0.0)
    return out


def block_mi_identity(fsc: FiniteStateChannel, l: int) -> tuple[float, float]:
    """Both sides of the telescoping block-MI identity at L = 2^l."""
    L = 2 ** l
    Y = fsc.n_outputs
    _guard(Y ** L)
    lhs = 0.0
    for i in range(1, l + 1):
        m = 2 ** (l - i)
        p = _forward_strings(fsc, 2 * m).reshape(Y ** m, Y ** m)
        lhs += 2 ** (i - 1) * _mi_from_joint(p)
    rhs = float(np.sum(truncated_tail_mi(fsc, L - 1)))
    return lhs, rhs


def i_dagger(source, tail_increment_tol: float = 1e-6,
             i_max: int | None = None, bins: int = 64) -> EstimateWithCI:
    """I_dagger(W) = I(N1;N0) - I(Y1;Y0)/2 - I(Y0;Y1^inf).

    Accepts a FiniteStateChannel (exact enumeration) or a MemoryChannel
    (noise/output terms by quadrature, tail via an FSC quantization).  The
    tail series is truncated once its increment drops below
    ``tail_increment_tol`` or the enumeration guard binds; the last increment
    is folded into the reported one-sided uncertainty.
    """
    if isinstance(source, FiniteStateChannel):
        nci = fsc_noise_pair_mi(source).value
        pair = fsc_output_pair_mi(source).value
        fsc = source
        extra = 0.0
        method = ENUMERATION
        count = source.n_outputs ** 2
    elif isinstance(source, MemoryChannel):
        from .channel import to_fsc
        nci = noise_pair_mi(source.noise).value
        pair_est = output_pair_mi(source)
        pair = pair_est.value
        fsc = to_fsc(source, bins=bins)
        extra = pair_est.stderr
        method = QUADRATURE
        count = pair_est.count
    else:
        raise TypeError("expected FiniteStateChannel or MemoryChannel")

    Y = fsc.n_outputs
    cap = i_max
    if cap is None:
        cap = 1
        while Y ** (cap + 2) <= ENUM_GUARD:
            cap += 1
    seq = []
    prev = 0.0
    increment = 0.0
    for i in range(1, cap + 1):
        p = _forward_strings(fsc, i + 1).reshape(Y, Y ** i)
        cur = max(_mi_from_joint(p), 0.0)
        increment = cur - prev
        seq.append(cur)
        prev = cur
        if increment < tail_increment_tol:
            break
    tail = seq[-1] if seq else 0.0
    value = nci - 0.5 * pair - tail
    uncertainty = max(increment, 0.0) + extra
    converged = increment < tail_increment_tol
    if method == ENUMERATION and converged:
        return EstimateWithCI(value, 0.0, ENUMERATION, count)
    return EstimateWithCI(value, uncertainty, method, count, converged=converged)


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

def i_z_bounds_check(i_val: float, z_val: float, tol: float = 0.0) -> bool:
    """I >= log2(2/(1+Z)) and I^2 + Z^2 <= 1, with optional estimate slack."""
    lower_ok = i_val + tol >= np.log2(2.0 / (1.0 + max(z_val, 0.0)))
    circle_ok = i_val ** 2 + z_val ** 2 <= 1.0 + tol
    return bool(lower_ok and circle_ok)
