"""Sparse pixel-affinity graphs and the row-stochastic transition matrix.

A pixel grid induces a symmetric neighbor pattern: pixel i connects to
every pixel j != i whose grid coordinates lie within a radius R of i's.
All per-edge quantities (per-channel feature distances, affinities W,
transition weights A, ground-truth targets) are flat arrays parallel to
one shared pattern, stored in CSR order. The transition matrix is the
row normalization A = D^-1 W with D_ii the sum of row i's off-diagonal
affinities; its rows are probability distributions over neighbors.

Backward passes are exact Jacobian transposes:
  affinity head   W_e = exp(sum_c theta_c F_ec)  ->  dtheta_c = sum_e dW_e W_e F_ec
  row normalize   A_ij = W_ij / D_i              ->  dW_ij = (dA_ij - sum_j' dA_ij' A_ij') / D_i
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError


@dataclass
class SparsityPattern:
    """Symmetric neighbor structure of a height x width pixel grid.

    Edges are directed pairs (i, j) stored in CSR order:
    ``indices[indptr[i]:indptr[i+1]]`` lists the neighbors of pixel i in
    ascending order. ``rows[e]`` is the source pixel of edge slot e and
    ``reverse[e]`` is the slot of the mirrored edge (j, i), so an edge
    array ``v`` is symmetric iff ``v[reverse] == v``.
    """

    height: int
    width: int
    radius: int
    indptr: np.ndarray
    indices: np.ndarray
    rows: np.ndarray
    reverse: np.ndarray

    @property
    def num_pixels(self) -> int:
        return self.height * self.width

    @property
    def num_edges(self) -> int:
        return int(self.indices.size)

    def csr(self, values: np.ndarray) -> sp.csr_matrix:
        """View an edge-value array as a scipy CSR matrix (no value copy)."""
        n = self.num_pixels
        return sp.csr_matrix((values, self.indices, self.indptr), shape=(n, n))


def build_sparsity(height: int, width: int, radius: int,
                   metric: str = "euclidean") -> SparsityPattern:
    """Enumerate all ordered pixel pairs within `radius` of each other.

    `metric` selects how the offset length is measured: "euclidean"
    (matches the circular neighborhood) or "chebyshev" (square window,
    for ablations). Self-pairs are never included. Deterministic.
    """
    if height < 1 or width < 1:
        raise InvalidInputError(f"bad grid {height}x{width}")
    if radius < 1:
        raise InvalidInputError(f"radius must be >= 1, got {radius}")
    if metric not in ("euclidean", "chebyshev"):
        raise InvalidInputError(f"unknown metric {metric!r}")

    span = int(radius)
    offsets = []
    for dy in range(-span, span + 1):
        for dx in range(-span, span + 1):
            if dy == 0 and dx == 0:
                continue
            if metric == "euclidean" and dy * dy + dx * dx > radius * radius:
                continue
            if metric == "chebyshev" and max(abs(dy), abs(dx)) > radius:
                continue
            offsets.append((dy, dx))

    srcs, dsts = [], []
    for dy, dx in offsets:
        y0, y1 = max(0, -dy), height - max(0, dy)
        x0, x1 = max(0, -dx), width - max(0, dx)
        if y0 >= y1 or x0 >= x1:
            continue
        ys = np.arange(y0, y1, dtype=np.int64)
        xs = np.arange(x0, x1, dtype=np.int64)
        base = ys[:, None] * width + xs[None, :]
        srcs.append(base.ravel())
        dsts.append((base + dy * width + dx).ravel())

    n = height * width
    if srcs:
        rows = np.concatenate(srcs)
        cols = np.concatenate(dsts)
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)

    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    # edge keys i*n + j are sorted; the mirrored edge lives at key j*n + i
    keys = rows * n + cols
    reverse = np.searchsorted(keys, cols * n + rows)
    return SparsityPattern(height, width, radius, indptr, cols, rows, reverse)


def channel_distances(stack: np.ndarray, pattern: SparsityPattern) -> np.ndarray:
    """Per-edge, per-channel L1 distances: out[e, c] = |stack_i[c] - stack_j[c]|.

    Distances are kept separate per channel, one row per edge of the
    pattern, both edge directions stored.
    """
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim == 3:
        if stack.shape[0] * stack.shape[1] != pattern.num_pixels:
            raise InvalidInputError(
                f"stack {stack.shape[:2]} does not match pattern "
                f"{pattern.height}x{pattern.width}")
        flat = stack.reshape(pattern.num_pixels, stack.shape[2])
    elif stack.ndim == 2 and stack.shape[0] == pattern.num_pixels:
        flat = stack
    else:
        raise InvalidInputError(f"bad stack shape {stack.shape}")
    return np.abs(flat[pattern.rows] - flat[pattern.indices])


def affinity_forward(fdist: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Affinity head: W_e = exp(sum_c theta_c * fdist[e, c]).

    A 1x1 convolution over the k distance channels followed by an
    exponential; no bias, so the head has exactly k parameters.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise InvalidInputError("non-finite affinity parameters")
    if fdist.ndim != 2 or fdist.shape[1] != theta.shape[0]:
        raise InvalidInputError(
            f"distance tensor has {fdist.shape[1]} channels, theta has "
            f"{theta.shape[0]}")
    with np.errstate(over="ignore"):  # overflow to inf is caught in transition
        return np.exp(fdist @ theta)


def affinity_backward(fdist: np.ndarray, w: np.ndarray,
                      dw: np.ndarray) -> np.ndarray:
    """Chain rule through the exponential and the 1x1 convolution.

    dtheta_c = sum_e dw[e] * w[e] * fdist[e, c]. Summation order is the
    fixed edge order, so repeated calls are bit-identical.
    """
    return fdist.T @ (dw * w)


def ground_truth_affinity(labels: np.ndarray,
                          pattern: SparsityPattern) -> np.ndarray:
    """Target affinities: 1 where the edge joins same-label pixels, else 0."""
    labels = np.asarray(labels).ravel()
    if labels.size != pattern.num_pixels:
        raise InvalidInputError(
            f"{labels.size} labels for {pattern.num_pixels} pixels")
    return (labels[pattern.rows] == labels[pattern.indices]).astype(np.float64)


def affinity_loss_grad(w: np.ndarray, targets: np.ndarray):
    """Euclidean loss over edges: loss = 1/2 sum_e (w_e - t_e)^2, dW = w - t."""
    if w.shape != targets.shape:
        raise InvalidInputError(
            f"affinities {w.shape} and targets {targets.shape} differ")
    diff = w - targets
    return 0.5 * float(diff @ diff), diff


@dataclass
class TransitionMatrix:
    """Row-stochastic walk matrix A = D^-1 W over a shared pattern.

    `values[e]` is A at edge slot e, `degree[i]` is D_ii (the sum of row
    i's affinities). Rows without neighbors stay empty: such a pixel
    receives nothing from the walk and is held in place by the damped
    step's (1 - alpha) f term.
    """

    pattern: SparsityPattern
    values: np.ndarray
    degree: np.ndarray
    _csr: sp.csr_matrix = field(default=None, repr=False, compare=False)
    _csr_t: sp.csr_matrix = field(default=None, repr=False, compare=False)

    @property
    def num_pixels(self) -> int:
        return self.pattern.num_pixels

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """A @ x for a dense (n, m) matrix of per-pixel rows."""
        if self._csr is None:
            self._csr = self.pattern.csr(self.values)
        return self._csr @ x

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        """A^T @ x. The pattern is symmetric, so the transpose reuses it
        with each edge value swapped for its mirror's."""
        if self._csr_t is None:
            self._csr_t = self.pattern.csr(self.values[self.pattern.reverse])
        return self._csr_t @ x

    def dense(self) -> np.ndarray:
        if self._csr is None:
            self._csr = self.pattern.csr(self.values)
        return self._csr.toarray()


def transition(pattern: SparsityPattern, w: np.ndarray) -> TransitionMatrix:
    """Row-normalize affinities into walk probabilities A_ij = W_ij / D_i."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (pattern.num_edges,):
        raise InvalidInputError(
            f"{w.shape} affinities for {pattern.num_edges} edges")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("non-finite affinities")
    degree = np.bincount(pattern.rows, weights=w, minlength=pattern.num_pixels)
    # every row that has neighbors must be normalizable
    occupied = np.diff(pattern.indptr) > 0
    if np.any(degree[occupied] <= 0.0):
        raise InvalidInputError("row of affinities sums to zero")
    values = w / degree[pattern.rows] if w.size else w.copy()
    return TransitionMatrix(pattern, values, degree)


def transition_backward(a: TransitionMatrix, da: np.ndarray) -> np.ndarray:
    """Jacobian-transpose of row normalization.

    dW_ij = (dA_ij - sum_j' dA_ij' A_ij') / D_i. A uniform dA within a
    row yields zero because each row of A sums to one.
    """
    pattern = a.pattern
    if da.shape != (pattern.num_edges,):
        raise InvalidInputError(
            f"{da.shape} gradients for {pattern.num_edges} edges")
    row_dot = np.bincount(pattern.rows, weights=da * a.values,
                          minlength=pattern.num_pixels)
    return (da - row_dot[pattern.rows]) / a.degree[pattern.rows]


def dump_edges(pattern: SparsityPattern, values: np.ndarray, fh) -> None:
    """Write per-edge values as text triplets "i j value", one per line."""
    for i, j, v in zip(pattern.rows, pattern.indices, values):
        fh.write(f"{i} {j} {float(v)!r}\n")
