from itertools import product
from pathlib import Path

import numpy as np
import pytest

from polarmem.channel import (FiniteStateChannel, ModulationMap)
from polarmem.noise import GilbertElliottNoise
from polarmem.polar import FrozenSet, PolarTransform
from polarmem.trellis import (InequalityRecord, exact_index_report,
                              mc_density_evolution, sc_trellis_decode,
                              split_channel_exact, theorem4_check)

GE_P = [[0.9, 0.1], [0.1, 0.9]]
GE_E = [0.02, 0.25]

GOLDEN = Path(__file__).parent / "golden"


def ge_fsc(mod=None):
    ge = GilbertElliottNoise(GE_P, GE_E)
    if mod is None:
        return FiniteStateChannel.from_gilbert_elliott(ge)
    return FiniteStateChannel.from_gilbert_elliott(ge, mod=mod)


# ---------------------------------------------------------------------------
# independent oracle: split-channel law by direct summation
# ---------------------------------------------------------------------------

def naive_generator(L):
    """B_L F^{kron l} built from scratch (no package code)."""
    F = np.array([[1, 0], [1, 1]], dtype=int)
    G = np.ones((1, 1), dtype=int)
    n = 1
    while n < L:
        G = np.kron(F, G)
        n *= 2
    l = L.bit_length() - 1
    perm = [int(format(i, f"0{l}b")[::-1], 2) for i in range(L)] if l else [0]
    return G[perm] % 2


def naive_block_law(fsc, L):
    """P(y | x) summed over state paths, plain loops."""
    S, Y = fsc.n_states, fsc.n_outputs
    pi = fsc.stationary
    T = fsc.transition
    E = fsc.emission
    law = {}
    for x in product(range(2), repeat=L):
        for y in product(range(Y), repeat=L):
            total = 0.0
            for path in product(range(S), repeat=L):
                p = pi[path[0]] * E[path[0], x[0], y[0]]
                for t in range(1, L):
                    p *= T[path[t - 1], path[t]] * E[path[t], x[t], y[t]]
                total += p
            law[(x, y)] = total
    return law


def naive_split_metrics(fsc, L, i):
    """(Z, I) of the i-th split channel from the definition."""
    G = naive_generator(L)
    law = naive_block_law(fsc, L)
    Y = fsc.n_outputs
    # W_i(y, u_1^{i-1} | u_i) = (1/2^{L-1}) sum over suffixes of P(y | uG)
    w = {}
    for u in product(range(2), repeat=L):
        x = tuple(np.array(u) @ G % 2)
        for y in product(range(Y), repeat=L):
            key = (y, u[: i - 1], u[i - 1])
            w[key] = w.get(key, 0.0) + law[(x, y)] / 2 ** (L - 1)
    z = 0.0
    mi = 0.0
    seen = set()
    for (y, pre, _b) in list(w):
        if (y, pre) in seen:
            continue
        seen.add((y, pre))
        p0 = w.get((y, pre, 0), 0.0)
        p1 = w.get((y, pre, 1), 0.0)
        z += np.sqrt(p0 * p1)
        for p in (p0, p1):
            if p > 0:
                mi += 0.5 * p * np.log2(p / (0.5 * (p0 + p1)))
    return z, mi


@pytest.mark.parametrize("L,i", [(2, 1), (2, 2), (4, 1), (4, 3), (4, 4)])
def test_split_channel_exact_matches_naive_enumeration(L, i):
    fsc = ge_fsc()
    z, mi, _, _ = split_channel_exact(fsc, L, i)
    z_ref, mi_ref = naive_split_metrics(fsc, L, i)
    assert z == pytest.approx(z_ref, abs=1e-12)
    assert mi == pytest.approx(mi_ref, abs=1e-12)


def test_split_channel_exact_additive_map_matches_naive():
    fsc = ge_fsc(mod=ModulationMap(0.0, 1.0))
    for i in (1, 2):
        z, mi, _, _ = split_channel_exact(fsc, 2, i)
        z_ref, mi_ref = naive_split_metrics(fsc, 2, i)
        assert z == pytest.approx(z_ref, abs=1e-12)
        assert mi == pytest.approx(mi_ref, abs=1e-12)


def test_split_channel_memoryless_matches_product_law_reference():
    # classic memoryless SC reference: block law factorizes per symbol
    p = 0.135
    fsc = FiniteStateChannel.memoryless([[1 - p, p], [p, 1 - p]])
    for L, i in ((2, 1), (2, 2), (4, 2), (4, 4)):
        z, mi, zg, _ = split_channel_exact(fsc, L, i)
        z_ref, mi_ref = naive_split_metrics(fsc, L, i)
        assert z == pytest.approx(z_ref, abs=1e-12)
        assert mi == pytest.approx(mi_ref, abs=1e-12)
        # no memory: the genie learns nothing
        assert zg == pytest.approx(z, abs=1e-12)


def test_split_mi_conservation():
    fsc = ge_fsc()
    for L in (2, 4, 8):
        rep = exact_index_report(fsc, L)
        # chain rule: total MI equals the block MI I(U; Y) = I(X; Y)
        total = rep.i.sum()
        bigger = exact_index_report(fsc, 2 * L).i.sum() if L < 8 else None
        assert total <= L * 1.0
        if bigger is not None:
            # block MI is superadditive under memory
            assert bigger >= total - 1e-12


# ---------------------------------------------------------------------------
# Monte-Carlo agreement and report invariants
# ---------------------------------------------------------------------------

def test_mc_density_evolution_matches_exact():
    fsc = ge_fsc()
    exact = exact_index_report(fsc, 4)
    mc = mc_density_evolution(fsc, 4, samples=20_000, seed=0)
    for k in range(4):
        assert abs(mc.z[k] - exact.z[k]) < 4 * max(mc.z_stderr[k], 1e-4)
        assert abs(mc.i[k] - exact.i[k]) < 4 * max(mc.i_stderr[k], 1e-4)
        assert abs(mc.zg[k] - exact.zg[k]) < 4 * max(mc.zg_stderr[k], 1e-4)
    assert abs(mc.avg_i - exact.avg_i) < 4 * max(mc.avg_i_stderr, 1e-4)


def test_mc_density_evolution_deterministic_in_seed():
    fsc = ge_fsc()
    a = mc_density_evolution(fsc, 8, indices=[1, 8], samples=500, seed=3)
    b = mc_density_evolution(fsc, 8, indices=[1, 8], samples=500, seed=3)
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_array_equal(a.i, b.i)


def test_report_csv_golden():
    fsc = ge_fsc()
    rep = exact_index_report(fsc, 4)
    golden = (GOLDEN / "polar_ge_L4.csv").read_text()
    assert rep.to_csv() == golden


def test_report_rejects_inconsistent_iz_pairs():
    with pytest.raises(ValueError):
        from polarmem.trellis import PolarIndexReport
        PolarIndexReport(L=2, indices=np.array([1, 2]),
                         z=np.array([0.0, 0.0]), z_stderr=np.zeros(2),
                         i=np.array([0.0, 0.0]), i_stderr=np.zeros(2),
                         method="enumeration")


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

def test_sc_decode_noiseless_rate_one():
    ge = GilbertElliottNoise(GE_P, [0.0, 0.0])
    fsc = FiniteStateChannel.from_gilbert_elliott(ge)
    pt = PolarTransform(8)
    rng = np.random.default_rng(4)
    u = rng.integers(0, 2, size=(16, 8)).astype(np.uint8)
    y = pt.encode(u).astype(np.int64)       # noiseless GF2: y = x
    u_hat = sc_trellis_decode(fsc, y, FrozenSet(8, ()))
    np.testing.assert_array_equal(u_hat, u)


def test_sc_decode_forces_frozen_zero():
    fsc = ge_fsc()
    frozen = FrozenSet(4, (1, 2))
    y = np.array([[1, 0, 1, 1], [0, 0, 0, 0]])
    u_hat = sc_trellis_decode(fsc, y, frozen)
    assert np.all(u_hat[:, :2] == 0)


def test_sc_decode_single_block_shape():
    fsc = ge_fsc()
    u_hat = sc_trellis_decode(fsc, np.array([0, 1, 0, 1]), FrozenSet(4, (1,)))
    assert u_hat.shape == (4,)


def test_sc_decode_beats_bit_flips():
    # a lightly corrupted codeword decodes back with a low-rate code
    fsc = ge_fsc()
    pt = PolarTransform(16)
    rep16 = mc_density_evolution(fsc, 16, samples=2_000, seed=1)
    from polarmem.polar import select_frozen
    frozen = select_frozen(rep16, rate=0.25)
    info = np.array(frozen.information) - 1
    rng = np.random.default_rng(9)
    u = np.zeros((64, 16), dtype=np.uint8)
    u[:, info] = rng.integers(0, 2, size=(64, len(info)))
    x = pt.encode(u)
    _, y = fsc.sample(64, 16, x, seed=2)
    u_hat = sc_trellis_decode(fsc, y, frozen)
    ber = np.mean(u_hat[:, info] != u[:, info])
    assert ber < 0.15


# ---------------------------------------------------------------------------
# single-unit inequalities
# ---------------------------------------------------------------------------

def test_theorem4_exact_holds_small_blocks():
    fsc = ge_fsc()
    for L in (2, 4):
        for i in range(1, L + 1):
            recs = theorem4_check(fsc, L, i)
            assert {r.name for r in recs} == {
                "odd_upper", "odd_lower", "even_upper", "sum_upper", "jensen"}
            for r in recs:
                assert r.status == "holds", (L, i, r)
                assert r.stderr == 0.0


def test_theorem4_mc_path_statuses():
    fsc = ge_fsc()
    recs = theorem4_check(fsc, 16, 5, samples=2_000, seed=0)
    assert all(r.status in ("holds", "inconclusive") for r in recs)
    assert any(r.stderr > 0 for r in recs)


def test_inequality_record_slack():
    r = InequalityRecord("x", 0.4, 0.5, 0.0, "holds")
    assert r.slack == pytest.approx(0.1)
