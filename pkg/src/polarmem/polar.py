"""Polar transform combinatorics: encoder, bit-reversal permutation,
per-output bit-index sets, and frozen-set selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

F_KERNEL = np.array([[1, 0], [1, 1]], dtype=np.uint8)


def _check_block_len(L: int) -> int:
    if L < 1 or (L & (L - 1)) != 0:
        raise ValueError(f"block length must be a power of 2, got {L}")
    return int(L).bit_length() - 1


def bit_reversal_permutation(L: int) -> np.ndarray:
    """pi_L as an index array: position i holds the bit-reversed index."""
    l = _check_block_len(L)
    idx = np.arange(L)
    out = np.zeros(L, dtype=np.int64)
    for _ in range(l):
        out = (out << 1) | (idx & 1)
        idx >>= 1
    return out


class PolarTransform:
    """The length-2^l polar transform x = u * (B_L F^{kron l}) over GF(2)."""

    def __init__(self, L: int):
        self.l = _check_block_len(L)
        self.L = L
        self.permutation = bit_reversal_permutation(L)

    def generator_matrix(self) -> np.ndarray:
        """Explicit B_L F^{kron l} over GF(2), rows indexed by u."""
        G = np.ones((1, 1), dtype=np.uint8)
        for _ in range(self.l):
            G = np.kron(F_KERNEL, G)
        return G[self.permutation]

    def encode(self, u, return_layers: bool = False):
        """Encode a block (or batch, trailing axis = block).

        With ``return_layers`` the l+1 intermediate vectors are returned,
        from the input layer (k=0) to the codeword (k=l).
        """
        u = np.asarray(u, dtype=np.uint8) & 1
        if u.shape[-1] != self.L:
            raise ValueError(f"expected block length {self.L}, got {u.shape[-1]}")
        lead = u.shape[:-1]
        v = u.reshape(lead + (1, self.L))
        layers = [u]
        # One butterfly stage per level, applied within each segment:
        # (a, b) pairs map to the segment pair (a xor b, b).
        for k in range(self.l):
            nseg, seglen = v.shape[-2], v.shape[-1]
            pairs = v.reshape(lead + (nseg, seglen // 2, 2))
            v = np.stack([pairs[..., 0] ^ pairs[..., 1], pairs[..., 1]],
                         axis=-2).reshape(lead + (2 * nseg, seglen // 2))
            layers.append(v.reshape(lead + (self.L,)))
        x = v.reshape(lead + (self.L,))
        return (x, layers) if return_layers else x


def encode(u, return_layers: bool = False):
    u = np.asarray(u)
    return PolarTransform(u.shape[-1]).encode(u, return_layers)


def bit_index_sets(L: int) -> list[set[int]]:
    """For each output position i (1-based), the set of input indices j such
    that u_j participates in x_i."""
    G = PolarTransform(L).generator_matrix()
    return [set((np.nonzero(G[:, i])[0] + 1).tolist()) for i in range(L)]


@dataclass(frozen=True)
class FrozenSet:
    """Sorted frozen index set (1-based) with all-zero frozen values."""

    L: int
    frozen: tuple[int, ...]

    def __post_init__(self):
        _check_block_len(self.L)
        f = tuple(sorted(self.frozen))
        if f != self.frozen:
            object.__setattr__(self, "frozen", f)
        if any(i < 1 or i > self.L for i in self.frozen):
            raise ValueError("frozen indices must lie in 1..L")
        if len(set(self.frozen)) != len(self.frozen):
            raise ValueError("frozen indices must be distinct")

    @property
    def information(self) -> tuple[int, ...]:
        froz = set(self.frozen)
        return tuple(i for i in range(1, self.L + 1) if i not in froz)

    @property
    def rate(self) -> float:
        return 1.0 - len(self.frozen) / self.L

    def mask(self) -> np.ndarray:
        """Boolean array, True where frozen (0-based positions)."""
        m = np.zeros(self.L, dtype=bool)
        m[[i - 1 for i in self.frozen]] = True
        return m


def select_frozen(report, rate: float) -> FrozenSet:
    """Freeze the ceil((1-rate)*L) indices with largest Z estimates.

    Ties are broken deterministically: the smaller index is frozen first.
    ``report`` is any object with ``L`` and a ``z_values()`` -> array method,
    or a plain sequence of Z values.
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must lie in (0, 1]")
    if hasattr(report, "z_values"):
        z = np.asarray(report.z_values(), dtype=float)
    else:
        z = np.asarray(report, dtype=float)
    L = len(z)
    _check_block_len(L)
    n_frozen = int(np.ceil((1.0 - rate) * L))
    # stable sort on -z keeps equal-Z entries in index order
    order = np.argsort(-z, kind="stable")
    frozen = tuple(sorted(int(i) + 1 for i in order[:n_frozen]))
    return FrozenSet(L, frozen)
