"""Random +/-1 memory patterns arranged as a circular sequence."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

GENERATOR_ID = "numpy.random.PCG64"

# bit-packed integer codes are used for distinctness checks up to this width
_MAX_CODE_BITS = 62


@dataclass(frozen=True, eq=False)
class MemorySequence:
    """Stored patterns ``xi[mu]``; memory ``mu`` is followed by ``(mu + 1) % P``.

    Indices are 0-based throughout the Python API. Exported files label
    memories 1..P.
    """

    xi: np.ndarray
    seed: int | None = None
    generator: str = GENERATOR_ID
    kind: str = "rademacher"
    _prev: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xi = np.array(self.xi, dtype=np.float64)
        if xi.ndim != 2 or xi.shape[0] == 0 or xi.shape[1] == 0:
            raise ValueError("xi must be a non-empty P x N matrix")
        if not np.all(np.abs(xi) == 1.0):
            raise ValueError("pattern entries must be -1 or +1")
        xi.setflags(write=False)
        prev = np.roll(xi, 1, axis=0)
        prev.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "_prev", prev)

    @property
    def n_memories(self):
        return self.xi.shape[0]

    @property
    def n_features(self):
        return self.xi.shape[1]

    @property
    def prev(self):
        """Row ``mu`` holds the predecessor pattern ``xi[(mu - 1) % P]``."""
        return self._prev

    def predecessor(self, mu):
        return predecessor_index(mu, self.n_memories)

    def successor(self, mu):
        return (mu + 1) % self.n_memories

    def meta(self):
        return {
            "N": self.n_features,
            "P": self.n_memories,
            "seed": self.seed,
            "generator": self.generator,
            "kind": self.kind,
        }


def predecessor_index(mu, n_memories):
    """Circular predecessor; works elementwise on integer arrays."""
    if np.ndim(mu):
        return (np.asarray(mu) - 1) % n_memories
    return (int(mu) - 1) % n_memories


def _codes_to_signs(codes, n_features):
    bits = (codes[:, None] >> np.arange(n_features, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.float64)


def _unique_in_order(codes):
    _, first = np.unique(codes, return_index=True)
    return codes[np.sort(first)]


def distinct_rademacher(rng, n_features, n_memories):
    """Draw ``n_memories`` pairwise-distinct Rademacher rows from ``rng``.

    Rows are drawn independently and duplicates are rejected and redrawn
    until enough distinct rows exist. When more than half of all ``2**N``
    patterns are requested the rows are instead a uniformly random ordered
    subset of all patterns, which has the same distribution.
    """
    if n_features <= 0 or n_memories <= 0:
        raise ValueError("n_features and n_memories must be positive")
    if n_features <= _MAX_CODE_BITS:
        total = 1 << n_features
        if n_memories > total:
            raise ValueError(f"cannot draw {n_memories} distinct patterns of length {n_features}")
        if 2 * n_memories > total:
            codes = rng.choice(total, size=n_memories, replace=False)
            return _codes_to_signs(np.asarray(codes, dtype=np.int64), n_features)
        codes = rng.integers(0, total, size=n_memories, dtype=np.int64)
        codes = _unique_in_order(codes)
        while codes.size < n_memories:
            need = n_memories - codes.size
            extra = rng.integers(0, total, size=need, dtype=np.int64)
            merged = np.concatenate([codes, extra])
            codes = _unique_in_order(merged)
        return _codes_to_signs(codes[:n_memories], n_features)

    xi = rng.choice(np.array([-1.0, 1.0]), size=(n_memories, n_features))
    while True:
        _, first = np.unique(xi, axis=0, return_index=True)
        if first.size == n_memories:
            return xi
        keep = xi[np.sort(first)]
        extra = rng.choice(np.array([-1.0, 1.0]), size=(n_memories - first.size, n_features))
        xi = np.concatenate([keep, extra])


def generate_rademacher_memories(n_features, n_memories, seed):
    if n_features <= 0 or n_memories <= 0:
        raise ValueError("n_features and n_memories must be positive")
    if n_features <= _MAX_CODE_BITS and n_memories > (1 << n_features):
        raise ValueError(
            f"n_memories={n_memories} exceeds the 2**{n_features} distinct patterns available"
        )
    rng = np.random.default_rng(seed)
    return MemorySequence(distinct_rademacher(rng, n_features, n_memories), seed=seed)


def generate_orthogonal_memories(n_features, n_memories, seed):
    """Mutually orthogonal +/-1 patterns: random rows of a Sylvester Hadamard matrix.

    Each row is multiplied by a random sign. Cross-overlaps are exactly
    zero, which removes finite-N crosstalk; useful as a control next to
    Rademacher patterns. ``n_features`` must be a power of two.
    """
    if n_features <= 0 or n_features & (n_features - 1):
        raise ValueError("n_features must be a power of two")
    if not 0 < n_memories <= n_features:
        raise ValueError("need 0 < n_memories <= n_features")
    H = np.array([[1.0]])
    while H.shape[0] < n_features:
        H = np.block([[H, H], [H, -H]])
    rng = np.random.default_rng(seed)
    rows = rng.choice(n_features, size=n_memories, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(n_memories, 1))
    return MemorySequence(H[rows] * signs, seed=seed, kind="orthogonal")


def overlap(x, mu, mems):
    """Mattis overlap ``(1/N) <xi[mu], x>``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (mems.n_features,):
        raise ValueError(f"expected a vector of length {mems.n_features}, got shape {x.shape}")
    if not 0 <= mu < mems.n_memories:
        raise IndexError(f"memory index {mu} out of range for P={mems.n_memories}")
    return float(mems.xi[mu] @ x) / mems.n_features


def overlaps(x, mems):
    """All P overlaps at once; ``x`` may also be a stack of states (T x N)."""
    return np.asarray(x, dtype=float) @ mems.xi.T / mems.n_features


def argmax_memory(x, mems):
    """Index of the memory with the largest overlap; ties go to the smallest index."""
    x = np.asarray(x, dtype=float)
    if x.shape != (mems.n_features,):
        raise ValueError(f"expected a vector of length {mems.n_features}, got shape {x.shape}")
    return int(np.argmax(mems.xi @ x))


def save_patterns(mems, csv_path, json_path):
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in mems.xi.astype(int):
            writer.writerow(row.tolist())
    with open(json_path, "w") as fh:
        json.dump(mems.meta(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_patterns(csv_path, json_path=None):
    xi = np.loadtxt(csv_path, delimiter=",", ndmin=2)
    meta = {}
    if json_path is not None:
        with open(json_path) as fh:
            meta = json.load(fh)
        if meta.get("N") != xi.shape[1] or meta.get("P") != xi.shape[0]:
            raise ValueError("pattern header does not match the CSV shape")
    return MemorySequence(
        xi,
        seed=meta.get("seed"),
        generator=meta.get("generator", GENERATOR_ID),
        kind=meta.get("kind", "rademacher"),
    )
