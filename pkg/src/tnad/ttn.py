"""Balanced binary tree tensor network density model.

Leaves carry two encoded features each; internal nodes carry only bonds.
Axis conventions: the root tensor has axes ``(left_child, right_child)``,
internal nodes ``(parent, left_child, right_child)``, and leaves
``(parent, phys_even, phys_odd)``. An odd feature count is padded with one
dummy feature pinned to the encoding of the rescaled interval midpoint
0.5, so leaves are always full.

The two-site training primitives mirror the MPS ones with "adjacent
sites" generalized to tree edges; one full sweep is a depth-first closed
walk over all edges starting and ending at the canonical center.
"""

from __future__ import annotations

from collections import deque
from typing import TYPE_CHECKING

import numpy as np

from .encoding import orthonormal_basis
from .errors import DataError, DimensionError
from .tensors import truncated_svd

if TYPE_CHECKING:
    from .encoding import LegendreFeatureMap

__all__ = ["TtnModel", "TtnEnvironments"]

_AXIS_LETTERS = "acdefghij"  # einsum labels; 'b' is reserved for the batch axis


class TtnModel:
    """Trainable tree tensor network over encoded real-valued features.

    Attributes
    ----------
    tensors : list of np.ndarray
        One tensor per node, indexed by node id; the root is node 0 and
        every child id is larger than its parent's (pre-order).
    parents : list of int
        Parent node per node (-1 for the root).
    children : list of tuple or None
        ``(left, right)`` child ids for root/internal nodes, None for leaves.
    center : int
        Node id of the canonical center.
    padding : int
        Number of appended dummy features (0 or 1).
    """

    def __init__(
        self,
        tensors,
        parents,
        children,
        leaf_features,
        n_features: int,
        padding: int,
        center: int,
        encoder: "LegendreFeatureMap | None" = None,
    ):
        self.tensors = [np.asarray(t, dtype=np.float64) for t in tensors]
        self.parents = list(parents)
        self.children = list(children)
        self.leaf_features = list(leaf_features)
        self.n_features = n_features
        self.padding = padding
        self.center = center
        self.encoder = encoder
        self._pad_vector = orthonormal_basis(self.phys_dim, 0.5) if padding else None
        self._check_structure()

    def _check_structure(self) -> None:
        for u, v in self._edges():
            du = self.tensors[u].shape[self.axis_to(u, v)]
            dv = self.tensors[v].shape[self.axis_to(v, u)]
            if du != dv:
                raise DimensionError(f"bond mismatch on edge ({u}, {v}): {du} vs {dv}")

    # -- construction ------------------------------------------------------

    @classmethod
    def random(
        cls,
        n_features: int,
        phys_dim: int,
        init_bond: int = 2,
        seed: int = 0,
        encoder: "LegendreFeatureMap | None" = None,
    ) -> "TtnModel":
        """Seeded random balanced tree, canonicalized to the right-most leaf.

        Feature counts that are not a power of two are handled by splitting
        the leaf count as evenly as possible at every internal node; an odd
        count is padded with one dummy feature. Bonds are capped at the
        exact rank possible across each edge.
        """
        if n_features < 3:
            # one leaf is no tree: there is no root tensor and nothing to sweep
            raise DataError(f"a tree needs >= 3 features (got {n_features}); use an MPS instead")
        if phys_dim < 1 or init_bond < 1:
            raise DataError("phys_dim and init_bond must be >= 1")
        padding = n_features % 2
        padded = n_features + padding
        n_leaves = padded // 2

        parents: list[int] = []
        children: list = []

        def build(count: int, parent: int) -> int:
            idx = len(parents)
            parents.append(parent)
            children.append(None)
            if count > 1:
                left = build((count + 1) // 2, idx)
                right = build(count - (count + 1) // 2, idx)
                children[idx] = (left, right)
            return idx

        build(n_leaves, -1)
        n_nodes = len(parents)

        leaf_features: list = [None] * n_nodes
        leaf_ids = [u for u in range(n_nodes) if children[u] is None]
        for k, u in enumerate(leaf_ids):
            leaf_features[u] = (2 * k, 2 * k + 1)

        # exact-rank cap per parent bond: phys dimensions below vs above the cut
        phys_below = [0] * n_nodes
        for u in reversed(range(n_nodes)):
            if children[u] is None:
                phys_below[u] = 2
            else:
                phys_below[u] = phys_below[children[u][0]] + phys_below[children[u][1]]
        bond = [1] * n_nodes
        for u in range(1, n_nodes):
            bond[u] = min(
                init_bond, phys_dim ** phys_below[u], phys_dim ** (padded - phys_below[u])
            )

        rng = np.random.default_rng(seed)
        tensors = []
        for u in range(n_nodes):
            if children[u] is None:
                shape = (bond[u] if parents[u] >= 0 else 1, phys_dim, phys_dim)
            elif parents[u] < 0:
                shape = (bond[children[u][0]], bond[children[u][1]])
            else:
                shape = (bond[u], bond[children[u][0]], bond[children[u][1]])
            tensors.append(rng.standard_normal(shape) / np.sqrt(np.prod(shape)))

        model = cls(
            tensors, parents, children, leaf_features, n_features, padding,
            center=leaf_ids[-1], encoder=encoder,
        )
        model.canonicalize(leaf_ids[-1])
        model.normalize()
        return model

    # -- structure queries ---------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.tensors)

    @property
    def phys_dim(self) -> int:
        return self.tensors[self.leaf_ids()[0]].shape[1]

    @property
    def padded_features(self) -> int:
        return self.n_features + self.padding

    def leaf_ids(self) -> list[int]:
        return [u for u in range(self.n_nodes) if self.children[u] is None]

    def leaf_of_feature(self, feature: int) -> tuple[int, int]:
        """Node id and physical slot (1 or 2) holding a padded-domain feature."""
        leaf = self.leaf_ids()[feature // 2]
        return leaf, 1 + feature % 2

    def neighbors(self, u: int) -> tuple[int, ...]:
        out = []
        if self.parents[u] >= 0:
            out.append(self.parents[u])
        if self.children[u] is not None:
            out.extend(self.children[u])
        return tuple(out)

    def axis_to(self, u: int, v: int) -> int:
        """Axis of node ``u``'s tensor that carries the bond to neighbor ``v``."""
        has_parent = self.parents[u] >= 0
        if self.parents[u] == v:
            return 0
        if self.children[u] is not None:
            if self.children[u][0] == v:
                return 1 if has_parent else 0
            if self.children[u][1] == v:
                return 2 if has_parent else 1
        raise DataError(f"nodes {u} and {v} are not neighbors")

    def axis_spec(self, u: int) -> list[tuple[str, int]]:
        """Describe every axis of node ``u``: ('bond', neighbor) or ('phys', feature)."""
        spec: list[tuple[str, int]] = []
        if self.parents[u] >= 0:
            spec.append(("bond", self.parents[u]))
        if self.children[u] is None:
            f0, f1 = self.leaf_features[u]
            spec.extend([("phys", f0), ("phys", f1)])
        else:
            spec.extend(("bond", c) for c in self.children[u])
        return spec

    def _edges(self) -> list[tuple[int, int]]:
        return [(self.parents[u], u) for u in range(self.n_nodes) if self.parents[u] >= 0]

    def bond_profile(self) -> list[int]:
        """Parent-bond extent of every non-root node, in node-id order."""
        return [self.tensors[u].shape[0] for u in range(1, self.n_nodes)]

    def features_behind(self, u: int, v: int) -> set[int]:
        """Padded-domain features in the component of ``u`` when edge (u, v) is cut."""
        seen = {v, u}
        stack = [u]
        feats: set[int] = set()
        while stack:
            w = stack.pop()
            if self.children[w] is None:
                feats.update(self.leaf_features[w])
            for x in self.neighbors(w):
                if x not in seen:
                    seen.add(x)
                    stack.append(x)
        return feats

    def copy(self) -> "TtnModel":
        return TtnModel(
            [t.copy() for t in self.tensors], self.parents, self.children,
            self.leaf_features, self.n_features, self.padding, self.center, self.encoder,
        )

    # -- norms and amplitudes ----------------------------------------------

    def state_norm(self) -> float:
        return float(np.linalg.norm(self.tensors[self.center]))

    def normalize(self) -> None:
        norm = self.state_norm()
        if norm == 0.0:
            raise DataError("cannot normalize a zero state")
        self.tensors[self.center] = self.tensors[self.center] / norm

    def isometry_defect(self) -> float:
        """Largest deviation from isometry-toward-center over non-center nodes."""
        order, toward = self._orientation(self.center)
        worst = 0.0
        for u in order:
            if u == self.center:
                continue
            ax = self.axis_to(u, toward[u])
            moved = np.moveaxis(self.tensors[u], ax, -1)
            m = moved.reshape(-1, moved.shape[-1])
            worst = max(worst, float(np.abs(m.T @ m - np.eye(m.shape[1])).max()))
        return worst

    def pad_batch(self, encoded: np.ndarray) -> np.ndarray:
        """Append the fixed dummy-feature encoding when the tree is padded."""
        encoded = np.asarray(encoded, dtype=np.float64)
        if encoded.ndim != 3 or encoded.shape[1] != self.n_features:
            raise DataError(
                f"encoded batch has shape {encoded.shape}, expected "
                f"(n, {self.n_features}, {self.phys_dim})"
            )
        if not self.padding:
            return encoded
        pad = np.broadcast_to(self._pad_vector, (encoded.shape[0], 1, self.phys_dim))
        return np.concatenate([encoded, pad], axis=1)

    def log_amplitudes(self, encoded: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Log magnitude and sign of the amplitude for a batch (n, L, N)."""
        enc = self.pad_batch(encoded)
        batch = enc.shape[0]
        log_scale = np.zeros(batch)
        msgs: dict[int, np.ndarray] = {}

        def renorm(vec: np.ndarray) -> np.ndarray:
            norms = np.linalg.norm(vec, axis=1)
            nonlocal log_scale
            with np.errstate(divide="ignore"):
                log_scale = log_scale + np.log(norms)
            return vec / np.where(norms > 0.0, norms, 1.0)[:, None]

        for u in reversed(range(self.n_nodes)):
            t = self.tensors[u]
            if self.children[u] is None:
                f0, f1 = self.leaf_features[u]
                vec = np.einsum("dpq,bp,bq->bd", t, enc[:, f0, :], enc[:, f1, :], optimize=True)
            elif self.parents[u] < 0:
                c0, c1 = self.children[u]
                amp = np.einsum("lr,bl,br->b", t, msgs.pop(c0), msgs.pop(c1), optimize=True)
                break
            else:
                c0, c1 = self.children[u]
                vec = np.einsum("dlr,bl,br->bd", t, msgs.pop(c0), msgs.pop(c1), optimize=True)
            msgs[u] = renorm(vec)

        with np.errstate(divide="ignore"):
            log_abs = log_scale + np.log(np.abs(amp))
        sign = np.where(amp < 0.0, -1.0, 1.0)
        return log_abs, sign

    def log_amplitude(self, encoded_sample: np.ndarray) -> tuple[float, float]:
        log_abs, sign = self.log_amplitudes(np.asarray(encoded_sample)[None, :, :])
        return float(log_abs[0]), float(sign[0])

    # -- canonical form ------------------------------------------------------

    def _orientation(self, target: int) -> tuple[list[int], dict[int, int]]:
        """Nodes in increasing distance from ``target`` plus next-hop map."""
        toward: dict[int, int] = {target: -1}
        order = [target]
        queue = deque([target])
        while queue:
            u = queue.popleft()
            for v in self.neighbors(u):
                if v not in toward:
                    toward[v] = u
                    order.append(v)
                    queue.append(v)
        return order, toward

    def canonicalize(self, target: int) -> None:
        """Make every non-target node an isometry toward ``target`` (QR passes).

        The represented state is unchanged up to rounding.
        """
        if not 0 <= target < self.n_nodes:
            raise DataError(f"node {target} out of range")
        order, toward = self._orientation(target)
        for u in reversed(order):
            if u == target:
                continue
            self._orthonormalize_toward(u, toward[u])
        self.center = target

    def _orthonormalize_toward(self, u: int, v: int) -> None:
        ax = self.axis_to(u, v)
        moved = np.moveaxis(self.tensors[u], ax, -1)
        other_shape = moved.shape[:-1]
        q, r = np.linalg.qr(moved.reshape(-1, moved.shape[-1]))
        self.tensors[u] = np.moveaxis(q.reshape(other_shape + (q.shape[1],)), -1, ax)
        ax_v = self.axis_to(v, u)
        absorbed = np.tensordot(r, self.tensors[v], axes=(1, ax_v))
        self.tensors[v] = np.moveaxis(absorbed, 0, ax_v)

    # -- two-site primitives --------------------------------------------------

    def traversal_schedule(self, start: int | None = None) -> list[tuple[int, int]]:
        """Closed depth-first walk over all edges, once per direction.

        Starts and ends at ``start`` (default: the canonical center);
        consecutive edges share the node that is the current center, and
        every leaf other than the start is entered only to be immediately
        left upward.
        """
        start = self.center if start is None else start
        edges: list[tuple[int, int]] = []

        def tour(u: int, came_from: int) -> None:
            for v in self.neighbors(u):
                if v != came_from:
                    edges.append((u, v))
                    tour(v, u)
                    edges.append((v, u))

        tour(start, -1)
        return edges

    def merge_edge(self, edge: tuple[int, int]) -> np.ndarray:
        """Contract the two node tensors across ``edge`` into one tensor.

        Result axes are node ``edge[0]``'s remaining axes (in order)
        followed by node ``edge[1]``'s. The model is unchanged until
        :meth:`split_edge` writes the result back.
        """
        a, b = edge
        ax_a = self.axis_to(a, b)
        ax_b = self.axis_to(b, a)
        if self.center not in (a, b):
            raise DataError(f"canonical center is at {self.center}, expected {a} or {b}")
        return np.tensordot(self.tensors[a], self.tensors[b], axes=(ax_a, ax_b))

    def split_edge(
        self,
        edge: tuple[int, int],
        merged: np.ndarray,
        rel_threshold: float = 0.0,
        max_rank: int | None = None,
    ) -> float:
        """Split a merged edge tensor via truncated SVD, center moving to ``edge[1]``.

        The singular values are absorbed into the tensor at ``edge[1]``,
        which is renormalized to unit state norm. Returns the discarded
        weight.
        """
        a, b = edge
        ax_a = self.axis_to(a, b)
        ax_b = self.axis_to(b, a)
        a_shape = tuple(d for i, d in enumerate(self.tensors[a].shape) if i != ax_a)
        b_shape = tuple(d for i, d in enumerate(self.tensors[b].shape) if i != ax_b)
        merged = np.asarray(merged, dtype=np.float64)
        if merged.shape != a_shape + b_shape:
            raise DimensionError(
                f"merged tensor has shape {merged.shape}, expected {a_shape + b_shape}"
            )
        result = truncated_svd(
            merged.reshape(int(np.prod(a_shape)), int(np.prod(b_shape))),
            rel_threshold,
            max_rank,
        )
        k = result.rank
        self.tensors[a] = np.moveaxis(result.left_isometry.reshape(a_shape + (k,)), -1, ax_a)
        weight = result.singular_values / np.linalg.norm(result.singular_values)
        absorbed = (weight[:, None] * result.right_isometry).reshape((k,) + b_shape)
        self.tensors[b] = np.moveaxis(absorbed, 0, ax_b)
        self.center = b
        return result.discarded_weight

    # -- generic trainer interface ---------------------------------------------

    def sweep_start(self) -> int:
        return self.leaf_ids()[-1]

    def sweep_schedule(self) -> list[tuple[int, int]]:
        return self.traversal_schedule(self.sweep_start())

    def environment_cache(self, encoded: np.ndarray) -> "TtnEnvironments":
        return TtnEnvironments(self, encoded)


class TtnEnvironments:
    """Per-sample subtree contractions ("messages") for every directed edge.

    ``message(u, v)`` is the contraction, per sample, of everything on
    node ``u``'s side of edge (u, v) including ``u`` itself: an
    ``(n_samples, D_uv)`` array plus a per-sample log scale. The cache
    keeps exactly the messages pointing toward the current canonical
    center and is refreshed one edge at a time as training walks the tree.
    """

    def __init__(self, model: TtnModel, encoded: np.ndarray):
        self.model = model
        self.encoded = model.pad_batch(encoded)
        self.n_samples = self.encoded.shape[0]
        self._messages: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        order, toward = model._orientation(model.center)
        for u in reversed(order):
            if u != model.center:
                self.push(u, toward[u])

    def message(self, u: int, v: int) -> tuple[np.ndarray, np.ndarray]:
        return self._messages[(u, v)]

    def _axis_operands(self, node: int, exclude: int):
        """Factor arrays and log scales for every axis of ``node`` except ``exclude``."""
        arrays, logs = [], np.zeros(self.n_samples)
        for ax, (kind, ref) in enumerate(self.model.axis_spec(node)):
            if ax == exclude:
                continue
            if kind == "phys":
                arrays.append(self.encoded[:, ref, :])
            else:
                vec, log_scale = self.message(ref, node)
                arrays.append(vec)
                logs = logs + log_scale
        return arrays, logs

    def push(self, u: int, v: int) -> None:
        """Recompute the message ``u -> v`` from node ``u``'s current tensor."""
        t = self.model.tensors[u]
        ax_uv = self.model.axis_to(u, v)
        arrays, logs = self._axis_operands(u, ax_uv)
        subs_t = _AXIS_LETTERS[: t.ndim]
        in_subs = [subs_t] + ["b" + subs_t[ax] for ax in range(t.ndim) if ax != ax_uv]
        vec = np.einsum(
            ",".join(in_subs) + "->b" + subs_t[ax_uv], t, *arrays, optimize=True
        )
        norms = np.linalg.norm(vec, axis=1)
        with np.errstate(divide="ignore"):
            logs = logs + np.log(norms)
        vec = vec / np.where(norms > 0.0, norms, 1.0)[:, None]
        self._messages[(u, v)] = (vec, logs)
        self._messages.pop((v, u), None)

    def factors(self, edge, rows=None):
        """Per-sample environment factors of the merged tensor at ``edge``.

        One factor of shape ``(len(rows), d_axis)`` per merged-tensor axis,
        ordered to match :meth:`TtnModel.merge_edge`; their outer product is
        the amplitude gradient with respect to the merged tensor up to the
        returned per-sample log scale.
        """
        a, b = edge
        arrays_a, logs_a = self._axis_operands(a, self.model.axis_to(a, b))
        arrays_b, logs_b = self._axis_operands(b, self.model.axis_to(b, a))
        idx = slice(None) if rows is None else rows
        return [arr[idx] for arr in arrays_a + arrays_b], (logs_a + logs_b)[idx]

    def advance(self, edge) -> None:
        """Refresh the message along ``edge`` after a split moved the center."""
        self.push(edge[0], edge[1])
