"""Brute-force oracles shared by the test modules.

Everything here goes through full coefficient tensors and explicit
einsum/tensordot calls, independent of the library's contraction,
canonicalization, and environment code paths it is used to check.
"""

import numpy as np

from tnad import orthonormal_basis


def mps_full_tensor(model):
    """Full coefficient tensor of an MPS, shape (N,) * L."""
    theta = model.cores[0]
    for core in model.cores[1:]:
        theta = np.tensordot(theta, core, axes=(theta.ndim - 1, 0))
    return theta[0, ..., 0]


def ttn_full_tensor(model):
    """Full coefficient tensor of a TTN over the real features.

    The padded slot (if any) is contracted with the fixed midpoint
    encoding, exactly as the model pins it.
    """

    def rec(u):
        tensor = model.tensors[u]
        if model.children[u] is None:
            return tensor, list(model.leaf_features[u])
        c0, c1 = model.children[u]
        t0, feats0 = rec(c0)
        t1, feats1 = rec(c1)
        if model.parents[u] < 0:
            out = np.tensordot(tensor, t0, axes=(0, 0))
            out = np.tensordot(out, t1, axes=(0, 0))
            return out, feats0 + feats1
        out = np.tensordot(tensor, t0, axes=(1, 0))
        out = np.tensordot(out, t1, axes=(1, 0))
        return out, feats0 + feats1

    theta, feats = rec(0)
    order = np.argsort(feats)
    theta = np.transpose(theta, order)
    if model.padding:
        pad = orthonormal_basis(model.phys_dim, 0.5)
        theta = np.tensordot(theta, pad, axes=(theta.ndim - 1, 0))
    return theta


def full_tensor(model):
    return mps_full_tensor(model) if hasattr(model, "cores") else ttn_full_tensor(model)


def mps_full_tensor_with_merged(model, site, merged):
    """Full tensor with cores ``site`` and ``site + 1`` replaced by ``merged``."""
    pieces = model.cores[:site] + [merged] + model.cores[site + 2 :]
    theta = pieces[0]
    for piece in pieces[1:]:
        theta = np.tensordot(theta, piece, axes=(theta.ndim - 1, 0))
    return theta[0, ..., 0]


def _ttn_subtree_tensor(model, node, toward):
    """Everything on ``node``'s side of edge (node, toward): (bond, feats...)."""
    tensor = model.tensors[node]
    out_axis = model.axis_to(node, toward)
    spec = model.axis_spec(node)
    work = np.moveaxis(tensor, out_axis, 0)
    feats = []
    axis_cursor = 1
    for ax, (kind, ref) in enumerate(spec):
        if ax == out_axis:
            continue
        if kind == "phys":
            feats.append(ref)
            axis_cursor += 1
        else:
            sub, sub_feats = _ttn_subtree_tensor(model, ref, node)
            work = np.tensordot(work, sub, axes=(axis_cursor, 0))
            # contracted axis is consumed; subtree features land at the end
            work = np.moveaxis(
                work, list(range(work.ndim - len(sub_feats), work.ndim)),
                list(range(axis_cursor, axis_cursor + len(sub_feats))),
            )
            feats.extend(sub_feats)
            axis_cursor += len(sub_feats)
    return work, feats


def ttn_full_tensor_with_merged(model, edge, merged):
    """Full tensor (over real features) with the edge pair replaced by ``merged``."""
    a, b = edge
    theta = merged
    feats = []
    cursor = 0
    for node, other in ((a, b), (b, a)):
        for ax, (kind, ref) in enumerate(model.axis_spec(node)):
            if ax == model.axis_to(node, other):
                continue
            if kind == "phys":
                feats.append(ref)
                cursor += 1
            else:
                sub, sub_feats = _ttn_subtree_tensor(model, ref, node)
                theta = np.tensordot(theta, sub, axes=(cursor, 0))
                theta = np.moveaxis(
                    theta, list(range(theta.ndim - len(sub_feats), theta.ndim)),
                    list(range(cursor, cursor + len(sub_feats))),
                )
                feats.extend(sub_feats)
                cursor += len(sub_feats)
    theta = np.transpose(theta, np.argsort(feats))
    if model.padding:
        pad = orthonormal_basis(model.phys_dim, 0.5)
        theta = np.tensordot(theta, pad, axes=(theta.ndim - 1, 0))
    return theta


def full_tensor_with_merged(model, edge, merged):
    if hasattr(model, "cores"):
        return mps_full_tensor_with_merged(model, min(edge), merged)
    return ttn_full_tensor_with_merged(model, edge, merged)


def brute_amplitude(theta, encoded_sample):
    """Contract a full coefficient tensor with one encoded sample (L, N)."""
    out = theta
    for i in range(encoded_sample.shape[0]):
        out = np.tensordot(out, encoded_sample[i], axes=(0, 0))
    return float(out)


def brute_rdm(theta, targets, conditions=None, phys_dim=2):
    """Reduced density matrix by explicit partial trace of the full tensor.

    ``conditions`` maps site -> rescaled value; conditioned sites are
    contracted with their encodings before tracing. Rows/columns run
    row-major over ``targets`` in the order given.
    """
    conditions = conditions or {}
    n_sites = theta.ndim
    work = theta
    remaining = list(range(n_sites))
    for site in sorted(conditions, reverse=True):
        vec = orthonormal_basis(phys_dim, conditions[site])
        axis = remaining.index(site)
        work = np.tensordot(work, vec, axes=(axis, 0))
        remaining.remove(site)
    other_axes = [i for i, s in enumerate(remaining) if s not in set(targets)]
    rho = np.tensordot(work, work, axes=(other_axes, other_axes))
    kept = [s for s in remaining if s in set(targets)]
    perm = [kept.index(t) for t in targets]
    k = len(targets)
    rho = np.transpose(rho, perm + [k + p for p in perm])
    rho = rho.reshape(phys_dim**k, phys_dim**k)
    return rho / np.trace(rho)


def brute_entropy(matrix):
    lam = np.linalg.eigvalsh(matrix)
    lam = lam[lam > 1e-14]
    return float(-(lam * np.log(lam)).sum())


def brute_log_amplitude(model, encoded_sample):
    theta = full_tensor(model)
    amp = brute_amplitude(theta, np.asarray(encoded_sample))
    return (np.log(abs(amp)) if amp != 0 else -np.inf), (1.0 if amp >= 0 else -1.0)


def random_encoded(rng, n_samples, n_sites, phys_dim):
    """Random "encodings" (any real vectors work for multilinear checks)."""
    return rng.standard_normal((n_samples, n_sites, phys_dim)) + 0.2


def random_unit_samples(rng, n_samples, n_sites):
    return rng.uniform(0.0, 1.0, size=(n_samples, n_sites))
