"""Balanced k-means over atoms and construction of shallow cluster trees.

The tree has L internal levels with high fan-out, given by ``branching``;
below level L every atom hangs as its own leaf, so leaves sit at depth L+1.
Each level is produced by a capacity-constrained variant of k-means: clusters
that reach the capacity C = ceil(count/k) are frozen with their C members
nearest to the centroid, everything left over is re-clustered, and the final
stragglers (at most C of them) form the last cluster.

On unit-norm vectors squared Euclidean distance and inner product induce the
same ordering (|u - v|^2 = 2 - 2 u.v), which is what lets a distance-based
clustering serve an inner-product-based search.

Tree file layout (little-endian):

    magic "STMPTREE" | u32 version=1 | u64 dictionary fingerprint | u64 n |
    u32 L | L x u32 branching | preorder node records

Node records: u8 is_leaf; leaves carry u64 atom_index, internal nodes carry
n x float32 centroid and u32 child_count.  Leaf centroids are not stored;
they are the dictionary atoms themselves.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import _binio
from .dictionary import Dictionary
from .errors import FormatError, StaleTreeError, UnsupportedFormatError

_TREE_MAGIC = b"STMPTREE"
_TREE_VERSION = 1
_DEGENERATE_NORM = 1e-12

CENTROID_NORM_TOL = 1e-5


def _seed_sequence(seed, *key) -> np.random.SeedSequence:
    """Derive a child seed stream; accepts a plain int or a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + key
        )
    return np.random.SeedSequence(entropy=int(seed), spawn_key=key)


def _derived_seed(seed, *key) -> int:
    """Collapse a seed path to a fresh 64-bit integer seed."""
    return int(_seed_sequence(seed, *key).generate_state(1, np.uint64)[0])


def _squared_distances(vectors: np.ndarray, sq_norms: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = sq_norms[:, None] - 2.0 * (vectors @ centroids.T) + (centroids * centroids).sum(axis=1)[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeanspp_init(vectors: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    count = vectors.shape[0]
    chosen = [int(rng.integers(count))]
    diff = vectors.astype(np.float64) - vectors[chosen[0]].astype(np.float64)
    d2 = (diff * diff).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass sits on already-chosen duplicates
            taken = np.zeros(count, dtype=bool)
            taken[chosen] = True
            nxt = int(np.flatnonzero(~taken)[0])
        else:
            nxt = int(rng.choice(count, p=d2 / total))
        chosen.append(nxt)
        diff = vectors.astype(np.float64) - vectors[nxt].astype(np.float64)
        np.minimum(d2, (diff * diff).sum(axis=1), out=d2)
    return vectors[chosen].copy()


def _group_means(vectors: np.ndarray, assignments: np.ndarray, counts: np.ndarray,
                 old: np.ndarray) -> np.ndarray:
    k, n = old.shape
    sums = np.empty((k, n), dtype=np.float64)
    for j in range(n):
        sums[:, j] = np.bincount(assignments, weights=vectors[:, j], minlength=k)
    centroids = old.copy()
    nonempty = counts > 0
    centroids[nonempty] = (sums[nonempty] / counts[nonempty, None]).astype(np.float32)
    return centroids


def kmeans(vectors, k: int, seed, max_iters: int = 25) -> tuple[np.ndarray, np.ndarray]:
    """Seeded Lloyd iterations with k-means++ initialization.

    Returns (centroids, assignments).  Empty clusters are re-seeded at the
    point currently farthest from its own centroid.  All tie-breaks go to the
    lowest index, so the output is a pure function of (vectors, k, seed).
    """
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise ValueError(f"expected 2-D vectors, got shape {vectors.shape}")
    count = vectors.shape[0]
    if not 1 <= k <= count:
        raise ValueError(f"cluster count {k} must be in [1, {count}]")
    if k == count:
        return vectors.copy(), np.arange(count, dtype=np.int64)
    rng = np.random.default_rng(_seed_sequence(seed))
    centroids = _kmeanspp_init(vectors, k, rng)
    sq_norms = (vectors.astype(np.float64) ** 2).sum(axis=1).astype(np.float32)
    previous = None
    assignments = np.zeros(count, dtype=np.int64)
    for _ in range(max_iters):
        d2 = _squared_distances(vectors, sq_norms, centroids)
        assignments = d2.argmin(axis=1).astype(np.int64)
        counts = np.bincount(assignments, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            own = d2[np.arange(count), assignments].astype(np.float64)
            for c in empties:
                far = int(np.argmax(own))
                centroids[c] = vectors[far]
                assignments[far] = c
                own[far] = -np.inf
            counts = np.bincount(assignments, minlength=k)
        if previous is not None and np.array_equal(assignments, previous):
            break
        previous = assignments
        centroids = _group_means(vectors, assignments, counts, centroids)
    return centroids, assignments


@dataclass(eq=False)
class BalancedPartition:
    """Capacity-constrained clustering of one batch of atoms."""

    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    sizes: np.ndarray

    @property
    def capacity(self) -> int:
        return math.ceil(self.assignments.size / self.k)


def _unit_mean(block: np.ndarray) -> np.ndarray:
    mean = block.astype(np.float64).mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < _DEGENERATE_NORM:
        # members cancel; fall back to a fixed unit vector
        fallback = np.zeros(block.shape[1], dtype=np.float32)
        fallback[0] = 1.0
        return fallback
    return (mean / norm).astype(np.float32)


def balanced_cluster(atoms, k: int, seed) -> BalancedPartition:
    """Partition atoms into at most k clusters of capacity C = ceil(m/k).

    Rounds of k-means over the not-yet-frozen atoms; every cluster that
    reaches capacity is frozen with its C members nearest to the centroid.
    If a round produces no such cluster, the largest one is frozen anyway,
    topped up with the nearest leftover atoms, so the loop always finishes.
    Cluster ids are issued in freezing order; the final cluster holds the
    last 1..C atoms.
    """
    atoms = np.ascontiguousarray(atoms, dtype=np.float32)
    if atoms.ndim != 2 or atoms.shape[0] == 0:
        raise ValueError(f"expected non-empty 2-D atoms, got shape {atoms.shape}")
    if k < 1:
        raise ValueError(f"cluster count must be positive, got {k}")
    m = atoms.shape[0]
    capacity = math.ceil(m / k)
    remaining = np.arange(m, dtype=np.int64)
    clusters: list[np.ndarray] = []
    round_no = 0
    while remaining.size > capacity:
        k_round = min(k - len(clusters), remaining.size)
        sub = atoms[remaining]
        cents, assign = kmeans(sub, k_round, _seed_sequence(seed, round_no))
        sizes = np.bincount(assign, minlength=k_round)
        large = np.flatnonzero(sizes >= capacity)
        taken = np.zeros(remaining.size, dtype=bool)
        if large.size:
            for c in large:
                members = np.flatnonzero(assign == c)
                diff = sub[members].astype(np.float64) - cents[c].astype(np.float64)
                dist = (diff * diff).sum(axis=1)
                keep = members[np.argsort(dist, kind="stable")[:capacity]]
                keep.sort()
                clusters.append(remaining[keep])
                taken[keep] = True
        else:
            c = int(np.argmax(sizes))
            members = np.flatnonzero(assign == c)
            others = np.flatnonzero(assign != c)
            diff = sub[others].astype(np.float64) - cents[c].astype(np.float64)
            dist = (diff * diff).sum(axis=1)
            pad = others[np.argsort(dist, kind="stable")[: capacity - members.size]]
            keep = np.sort(np.concatenate([members, pad]))
            clusters.append(remaining[keep])
            taken[keep] = True
        remaining = remaining[~taken]
        round_no += 1
    if remaining.size:
        clusters.append(remaining)
    assignments = np.empty(m, dtype=np.int64)
    centroids = np.empty((len(clusters), atoms.shape[1]), dtype=np.float32)
    sizes = np.empty(len(clusters), dtype=np.int64)
    for cid, members in enumerate(clusters):
        assignments[members] = cid
        centroids[cid] = _unit_mean(atoms[members])
        sizes[cid] = members.size
    return BalancedPartition(k=k, assignments=assignments, centroids=centroids, sizes=sizes)


@dataclass(eq=False)
class TreeNode:
    """One node of the shallow hierarchy.

    Internal nodes carry the renormalized mean of their member atoms; leaves
    carry the atom itself (``centroid`` is None for leaves of a freshly
    loaded tree until validated against a dictionary).  ``child_matrix`` and
    ``child_atom_indices`` are derived scoring caches.
    """

    centroid: np.ndarray | None
    children: list = field(default_factory=list)
    atom_index: int | None = None
    member_atoms: np.ndarray | None = field(default=None, repr=False)
    child_matrix: np.ndarray | None = field(default=None, repr=False)
    child_atom_indices: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_leaf(self) -> bool:
        return self.atom_index is not None

    def build_caches(self) -> None:
        if not self.children:
            return
        if self.children[0].is_leaf:
            self.child_atom_indices = np.array(
                [child.atom_index for child in self.children], dtype=np.int64
            )
        else:
            self.child_matrix = np.stack(
                [child.centroid for child in self.children]
            ).astype(np.float64)


@dataclass(eq=False)
class ClusterTree:
    root: TreeNode
    branching: tuple[int, ...]
    dictionary_fingerprint: int
    n: int

    @property
    def levels(self) -> int:
        return len(self.branching)

    @property
    def atom_count(self) -> int:
        return int(self.root.member_atoms.size)


@dataclass
class TreeReport:
    """Outcome of validate_tree: ok, or the first violation found."""

    ok: bool
    violation: str = ""


def _check_branching(branching) -> tuple[int, ...]:
    branching = tuple(int(k) for k in branching)
    if not branching:
        raise ValueError("branching must name at least one level")
    for level, k in enumerate(branching):
        if k < 2:
            raise ValueError(f"branching entry {k} at level {level} must be at least 2")
    return branching


def build_tree(d: Dictionary, branching, seed) -> ClusterTree:
    """Recursively balanced-cluster the dictionary into a shallow tree."""
    branching = _check_branching(branching)
    levels = len(branching)
    atoms = d.atoms

    def make(members: np.ndarray, depth: int, path: tuple[int, ...]) -> TreeNode:
        node = TreeNode(centroid=_unit_mean(atoms[members]), member_atoms=members)
        if depth == levels:
            node.children = [
                TreeNode(
                    centroid=atoms[i],
                    atom_index=int(i),
                    member_atoms=np.array([i], dtype=np.int64),
                )
                for i in members
            ]
        else:
            part = balanced_cluster(atoms[members], branching[depth], _derived_seed(seed, *path))
            for cid in range(part.sizes.size):
                child_members = members[part.assignments == cid]
                node.children.append(make(child_members, depth + 1, path + (cid,)))
        node.build_caches()
        return node

    root = make(np.arange(d.m, dtype=np.int64), 0, ())
    return ClusterTree(
        root=root,
        branching=branching,
        dictionary_fingerprint=d.fingerprint(),
        n=d.n,
    )


def validate_tree(t: ClusterTree, d: Dictionary) -> TreeReport:
    """Structural audit of a tree against its dictionary.

    Trees are bound to a dictionary by fingerprint; a mismatch raises
    StaleTreeError.  Everything else (partitioning, coverage, balance,
    leaf/atom equality, centroid norms, uniform leaf depth) is reported as
    the first violation found.  Leaves of a loaded tree have their centroids
    bound to the dictionary atoms here.
    """
    if t.dictionary_fingerprint != d.fingerprint():
        raise StaleTreeError(
            f"tree fingerprint {t.dictionary_fingerprint:#018x} does not match "
            f"dictionary fingerprint {d.fingerprint():#018x}"
        )
    if t.n != d.n:
        return TreeReport(False, f"tree atom dimension {t.n} != dictionary dimension {d.n}")
    levels = t.levels
    leaf_indices: list[np.ndarray] = []

    def walk(node: TreeNode, depth: int) -> str:
        if node.is_leaf:
            if depth != levels + 1:
                return f"leaf for atom {node.atom_index} at depth {depth}, expected {levels + 1}"
            if node.children:
                return f"leaf for atom {node.atom_index} has children"
            if not 0 <= node.atom_index < d.m:
                return f"leaf atom index {node.atom_index} outside [0, {d.m})"
            if node.centroid is None:
                node.centroid = d.atoms[node.atom_index]
            elif not np.array_equal(
                np.asarray(node.centroid, dtype=np.float32), d.atoms[node.atom_index]
            ):
                return f"leaf centroid differs from atom {node.atom_index}"
            leaf_indices.append(node.member_atoms)
            return ""
        if depth > levels:
            return f"internal node at depth {depth}, expected leaves below depth {levels}"
        if not node.children:
            return f"internal node at depth {depth} has no children"
        norm = float(np.linalg.norm(np.asarray(node.centroid, dtype=np.float64)))
        if abs(norm - 1.0) > CENTROID_NORM_TOL:
            return f"internal centroid at depth {depth} has norm {norm:.8f}"
        child_members = np.sort(np.concatenate([c.member_atoms for c in node.children]))
        if not np.array_equal(child_members, node.member_atoms):
            return f"children do not partition the node's {node.member_atoms.size} atoms at depth {depth}"
        if depth < levels:
            k = t.branching[depth]
            if len(node.children) > k:
                return f"node at depth {depth} has {len(node.children)} children, branching allows {k}"
            cap = math.ceil(node.member_atoms.size / k)
            counts = [c.member_atoms.size for c in node.children]
            off = [c for c in counts if c != cap]
            if len(off) > 1 or any(not 1 <= c <= cap for c in off):
                return (
                    f"unbalanced split at depth {depth}: sizes {counts} "
                    f"with capacity {cap}"
                )
        for child in node.children:
            msg = walk(child, depth + 1)
            if msg:
                return msg
        return ""

    msg = walk(t.root, 0)
    if msg:
        return TreeReport(False, msg)
    covered = np.concatenate(leaf_indices) if leaf_indices else np.empty(0, dtype=np.int64)
    covered = np.sort(covered)
    if covered.size != d.m or not np.array_equal(covered, np.arange(d.m, dtype=np.int64)):
        return TreeReport(False, f"leaves cover {covered.size} atoms, expected all {d.m} exactly once")
    return TreeReport(True)


def save_tree(t: ClusterTree, path) -> None:
    parts = [
        _TREE_MAGIC,
        _binio.u32(_TREE_VERSION),
        _binio.u64(t.dictionary_fingerprint),
        _binio.u64(t.n),
        _binio.u32(t.levels),
    ]
    parts.extend(_binio.u32(k) for k in t.branching)

    def emit(node: TreeNode) -> None:
        if node.is_leaf:
            parts.append(_binio.u8(1))
            parts.append(_binio.u64(node.atom_index))
            return
        parts.append(_binio.u8(0))
        centroid = np.asarray(node.centroid, dtype=np.float32)
        if centroid.shape != (t.n,):
            raise ValueError(f"internal centroid has shape {centroid.shape}, expected ({t.n},)")
        parts.append(_binio.f32_bytes(centroid))
        parts.append(_binio.u32(len(node.children)))
        for child in node.children:
            emit(child)

    emit(t.root)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_tree(path) -> ClusterTree:
    with open(path, "rb") as fh:
        reader = _binio.Reader(fh.read(), source=str(path))
    reader.magic(_TREE_MAGIC)
    version = reader.u32("version")
    if version != _TREE_VERSION:
        raise UnsupportedFormatError(
            f"{path}: unsupported tree format version {version} at offset 8"
        )
    fingerprint = reader.u64("dictionary fingerprint")
    n = reader.u64("atom dimension")
    if n == 0:
        raise FormatError(f"{path}: zero atom dimension at offset 20")
    levels = reader.u32("level count")
    if levels == 0:
        raise FormatError(f"{path}: zero level count at offset 28")
    branching = tuple(reader.u32(f"branching of level {i}") for i in range(levels))
    if any(k < 2 for k in branching):
        raise FormatError(f"{path}: branching {branching} has an entry below 2")

    def read_node(depth: int) -> TreeNode:
        at = reader.offset
        is_leaf = reader.u8("node tag")
        if is_leaf == 1:
            idx = reader.u64("leaf atom index")
            return TreeNode(
                centroid=None,
                atom_index=idx,
                member_atoms=np.array([idx], dtype=np.int64),
            )
        if is_leaf != 0:
            raise FormatError(f"{path}: bad node tag {is_leaf} at offset {at}")
        if depth > levels:
            raise FormatError(f"{path}: internal node below level {levels} at offset {at}")
        centroid = reader.f32_array(n, "centroid")
        child_count = reader.u32("child count")
        if child_count == 0:
            raise FormatError(f"{path}: internal node with no children at offset {at}")
        node = TreeNode(centroid=centroid)
        node.children = [read_node(depth + 1) for _ in range(child_count)]
        kinds = {c.is_leaf for c in node.children}
        if len(kinds) != 1:
            raise FormatError(f"{path}: node at offset {at} mixes leaf and internal children")
        node.member_atoms = np.sort(
            np.concatenate([c.member_atoms for c in node.children])
        )
        node.build_caches()
        return node

    root = read_node(0)
    reader.expect_end()
    return ClusterTree(root=root, branching=branching, dictionary_fingerprint=fingerprint, n=n)
