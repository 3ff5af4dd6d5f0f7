"""Two-qubit Clifford group machinery.

The group (11,520 elements up to global phase) is built once per process by
enumerating its four local-equivalence classes over the 24-element
single-qubit Clifford group: purely local (576), CNOT-like (5184, one cZ),
iSWAP-like (5184, two cZ) and SWAP-like (576, three cZ). Every element
carries a native decomposition into single-qubit layers and cZ. Phase is
gauged away by a canonical hash, which also powers composition and inverse
lookup.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
_S = np.diag([1.0, 1.0j]).astype(complex)
_I2 = np.eye(2, dtype=complex)

CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
ISWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex
)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

CLASS_NAMES = ("single_qubit", "cnot_like", "iswap_like", "swap_like")
CLASS_CZ_COUNT = (0, 1, 2, 3)


def canonical_key(m: np.ndarray) -> bytes:
    """Phase-gauged, rounded byte representation of a unitary."""
    f = np.asarray(m, dtype=complex).reshape(-1)
    i = int(np.argmax(np.round(np.abs(f), 6)))
    f = f / (f[i] / abs(f[i]))
    return (np.round(f, 6) + 0.0).tobytes()


def _canonical_keys(ms: np.ndarray) -> list[bytes]:
    f = ms.reshape(len(ms), -1).astype(complex)
    idx = np.argmax(np.round(np.abs(f), 6), axis=1)
    ref = f[np.arange(len(f)), idx]
    f = f / (ref / np.abs(ref))[:, None]
    f = np.round(f, 6) + 0.0
    return [row.tobytes() for row in f]


def single_qubit_cliffords() -> list[np.ndarray]:
    """The 24 single-qubit Cliffords (up to phase), closure of {H, S}."""
    seen = {canonical_key(_I2): _I2}
    frontier = [_I2]
    while frontier:
        new = []
        for m in frontier:
            for g in (_H, _S):
                x = g @ m
                key = canonical_key(x)
                if key not in seen:
                    seen[key] = x
                    new.append(x)
        frontier = new
    out = list(seen.values())
    assert len(out) == 24
    return out


# entangler identities over the native {single-qubit layer, cZ} set,
# verified at import: layers listed in time order (first applied first)
_HH = np.kron(_H, _H)
_IH = np.kron(_I2, _H)
_SH_SH = np.kron(_S @ _H, _S @ _H)

_ENTANGLER_LAYERS = {
    "single_qubit": (np.eye(4, dtype=complex),),
    "cnot_like": (np.eye(4, dtype=complex), "cz", np.eye(4, dtype=complex)),
    "iswap_like": (_HH, "cz", _HH, "cz", _SH_SH),
    "swap_like": (_IH, "cz", _HH, "cz", _HH, "cz", _IH),
}


def _layers_unitary(layers) -> np.ndarray:
    u = np.eye(4, dtype=complex)
    for layer in layers:
        u = (CZ if isinstance(layer, str) else layer) @ u
    return u


assert canonical_key(_layers_unitary(_ENTANGLER_LAYERS["iswap_like"])) == (
    canonical_key(ISWAP)
)
assert canonical_key(_layers_unitary(_ENTANGLER_LAYERS["swap_like"])) == (
    canonical_key(SWAP)
)


@dataclass(frozen=True)
class CliffordElement:
    index: int
    unitary: np.ndarray
    decomposition: tuple  # single-qubit 4x4 layers interleaved with "cz"
    class_name: str

    @property
    def n_cz(self) -> int:
        return sum(1 for layer in self.decomposition if isinstance(layer, str))


class CliffordGroup:
    """The full two-qubit Clifford group with lookup tables."""

    def __init__(self):
        singles = single_qubit_cliffords()
        self.singles = singles
        pairs = np.array(
            [np.kron(a, b) for a in singles for b in singles]
        )
        self.pair_unitaries = pairs

        unitaries: list[np.ndarray] = []
        meta: list[tuple[int, int, int]] = []
        index: dict[bytes, int] = {}
        class_sizes = []
        for class_id, name in enumerate(CLASS_NAMES):
            entangler = _layers_unitary(_ENTANGLER_LAYERS[name])
            size0 = len(unitaries)
            if class_id == 0:
                for i, key in enumerate(_canonical_keys(pairs)):
                    index[key] = len(unitaries)
                    unitaries.append(pairs[i])
                    meta.append((0, i, i))
            else:
                for i in range(len(pairs)):
                    left = pairs[i] @ entangler
                    batch = np.einsum("ab,jbc->jac", left, pairs)
                    for j, key in enumerate(_canonical_keys(batch)):
                        if key not in index:
                            index[key] = len(unitaries)
                            unitaries.append(batch[j])
                            meta.append((class_id, i, j))
            class_sizes.append(len(unitaries) - size0)

        assert tuple(class_sizes) == (576, 5184, 5184, 576), class_sizes
        self.unitaries = np.array(unitaries)
        self.meta = meta
        self.index = index
        self.class_sizes = tuple(class_sizes)

    @property
    def order(self) -> int:
        return len(self.meta)

    def element(self, i: int) -> CliffordElement:
        class_id, outer, inner = self.meta[i]
        base = _ENTANGLER_LAYERS[CLASS_NAMES[class_id]]
        layers = [
            layer if isinstance(layer, str) else layer.copy() for layer in base
        ]
        if len(layers) == 1:
            layers[0] = self.pair_unitaries[outer].copy()
        else:
            layers[0] = layers[0] @ self.pair_unitaries[inner]
            layers[-1] = self.pair_unitaries[outer] @ layers[-1]
        return CliffordElement(
            index=i,
            unitary=self.unitaries[i],
            decomposition=tuple(layers),
            class_name=CLASS_NAMES[class_id],
        )

    def lookup(self, u: np.ndarray) -> int:
        try:
            return self.index[canonical_key(u)]
        except KeyError:
            raise KeyError("unitary is not a two-qubit Clifford") from None

    def compose(self, a: int, b: int) -> int:
        """Index of the element equal to U_a @ U_b (b applied first)."""
        return self.lookup(self.unitaries[a] @ self.unitaries[b])

    def inverse(self, a: int) -> int:
        return self.lookup(self.unitaries[a].conj().T)

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.order))


@functools.lru_cache(maxsize=1)
def two_qubit_clifford_group() -> CliffordGroup:
    return CliffordGroup()


def sample_clifford(rng: np.random.Generator) -> CliffordElement:
    """Uniform sample over the 11,520 two-qubit Cliffords."""
    group = two_qubit_clifford_group()
    return group.element(group.sample(rng))
