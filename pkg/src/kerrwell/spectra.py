"""Eigendecomposition, transition spectra, gap tracking and the ILAS diagnostic.

All energies are quasi-energies: eigenvalues of ``Hamiltonian.quasi_matrix``,
sorted ascending so that index 0 is the deepest well state for both families.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NumericalError, UsageError
from .hilbert import (
    AXES,
    Hamiltonian,
    ModelParams,
    build_hamiltonian,
    default_dim,
    parity_operator,
    position_operator,
)

logger = logging.getLogger(__name__)

RESIDUAL_RTOL = 1e-8
TRACKING_MIN_OVERLAP = 0.5
ILAS_CAP = 1e3
ILAS_LOG_FLOOR = 1e-3


@dataclass
class Spectrum:
    energies: np.ndarray
    eigenvectors: np.ndarray
    params: ModelParams | None
    dim: int
    basis_freq: float = 1.0

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    def parity(self) -> np.ndarray:
        """<Pi> for each retained eigenvector."""
        signs = (-1.0) ** np.arange(self.dim)
        return np.einsum("i,ik->k", signs, np.abs(self.eigenvectors) ** 2)

    def position(self) -> np.ndarray:
        x = position_operator(self.dim, self.basis_freq)
        v = self.eigenvectors
        return np.real(np.einsum("ik,ij,jk->k", v.conj(), x, v))


@dataclass
class GapTrace:
    axis: str
    values: np.ndarray
    pairs: list[tuple[int, int]]
    gaps: np.ndarray  # shape (len(values), len(pairs))
    warnings: dict[int, list[str]] = field(default_factory=dict)

    def gap(self, pair_index: int = 0) -> np.ndarray:
        return self.gaps[:, pair_index]


def _degenerate_clusters(energies, tol):
    clusters, start = [], 0
    for k in range(1, len(energies) + 1):
        if k == len(energies) or energies[k] - energies[k - 1] > tol:
            if k - start > 1:
                clusters.append((start, k))
            start = k
    return clusters


def _rotate_cluster(vecs, op, descending):
    """Diagonalize ``op`` inside the span of ``vecs``; order by its expectation."""
    sub = vecs.conj().T @ op @ vecs
    sub = 0.5 * (sub + sub.conj().T)
    w, u = np.linalg.eigh(sub)
    order = np.argsort(-w if descending else w, kind="stable")
    return vecs @ u[:, order], w[order]


def _fix_phase(vecs):
    idx = np.argmax(np.abs(vecs), axis=0)
    phases = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(phases) / phases)


def eigensystem(h: Hamiltonian | np.ndarray, n_keep: int | None = None) -> Spectrum:
    """Lowest ``n_keep`` quasi-energies and eigenvectors, residual-checked.

    A bare array is taken to be the quasi-energy matrix already.  Exactly
    degenerate levels are rotated into parity eigenstates (even first) and,
    failing that, into position eigenstates (left first) so the returned basis
    does not depend on LAPACK internals.
    """
    if isinstance(h, Hamiltonian):
        q, params, freq = h.quasi_matrix, h.params, h.basis_freq
    else:
        q, params, freq = np.asarray(h, dtype=complex), None, 1.0
    dim = q.shape[0]
    n_keep = dim if n_keep is None else int(n_keep)
    if not 1 <= n_keep <= dim:
        raise UsageError(f"n_keep must lie in [1, {dim}], got {n_keep}")

    energies, vecs = np.linalg.eigh(q)
    scale = max(float(np.max(np.abs(energies))), 1.0)
    tol = 64 * np.finfo(float).eps * scale
    parity, x = parity_operator(dim), position_operator(dim, freq)
    for a, b in _degenerate_clusters(energies, tol):
        block, w = _rotate_cluster(vecs[:, a:b], parity, descending=True)
        if np.ptp(w) < 0.5:
            block, _ = _rotate_cluster(block, x, descending=False)
        vecs[:, a:b] = block
    vecs = _fix_phase(vecs)

    energies, vecs = energies[:n_keep], vecs[:, :n_keep]
    spread = max(float(energies[-1] - energies[0]) if n_keep > 1 else 0.0, 1.0)
    residual = np.max(np.abs(q @ vecs - vecs * energies), axis=0)
    if np.any(residual > RESIDUAL_RTOL * spread):
        raise NumericalError(f"eigen-residual {residual.max():.2e} exceeds tolerance")
    return Spectrum(energies, vecs, params, dim, freq)


def transition_spectrum(spec: Spectrum) -> np.ndarray:
    """|E_n - E_0| for every retained level."""
    return np.abs(spec.energies - spec.energies[0])


def _point_spectrum(params, dim, n_keep):
    return eigensystem(build_hamiltonian(params, dim), n_keep)


def gap_trace(
    params_base: ModelParams,
    axis: str,
    values,
    pairs,
    dim: int | None = None,
    n_keep: int | None = None,
    track: bool = True,
) -> GapTrace:
    """Energy separation of level pairs along one parameter axis.

    Pairs are level indices at the first axis point.  With ``track=True`` the
    level identities are followed by maximal eigenvector overlap with the
    previous point (ties broken by energy proximity); otherwise pairs are
    sorted indices at every point.
    """
    if axis not in AXES[params_base.family]:
        raise UsageError(f"axis {axis!r} is not valid for the {params_base.family.value} model")
    values = np.asarray(values, dtype=float)
    pairs = [tuple(int(i) for i in p) for p in pairs]
    top = max(max(p) for p in pairs)
    if dim is None:
        dim = max(default_dim(params_base.with_value(axis, v)) for v in values)
    n_keep = min(dim, max(top + 1, 2 * top + 10) if n_keep is None else n_keep)

    gaps = np.empty((len(values), len(pairs)))
    warnings: dict[int, list[str]] = {}
    tracked = sorted({k for p in pairs for k in p})
    labels = np.arange(n_keep)  # labels[k] = current index of original level k
    prev = None
    for i, v in enumerate(values):
        spec = _point_spectrum(params_base.with_value(axis, v), dim, n_keep)
        if track and prev is not None:
            overlap = np.abs(prev.eigenvectors.conj().T @ spec.eigenvectors) ** 2
            de = np.abs(prev.energies[:, None] - spec.energies[None, :])
            cost = -overlap + 1e-9 * de / (1.0 + de.max())
            rows, cols = linear_sum_assignment(cost)
            mapping = np.empty(n_keep, dtype=int)
            mapping[rows] = cols
            before, labels = labels, mapping[labels]
            worst = min(overlap[before[k], labels[k]] for k in tracked)
            if worst < TRACKING_MIN_OVERLAP:
                warnings.setdefault(i, []).append(
                    f"tracking lost: best overlap {worst:.3f} < {TRACKING_MIN_OVERLAP}"
                )
        for j, (a, b) in enumerate(pairs):
            ia, ib = (labels[a], labels[b]) if track else (a, b)
            gaps[i, j] = abs(spec.energies[ia] - spec.energies[ib])
        prev = spec
    return GapTrace(axis, values, pairs, gaps, warnings)


def default_n_cff(eps2: float) -> int:
    return 2 * math.ceil(max(eps2, 0.0)) + 6


def ilas_terms(gaps) -> np.ndarray:
    """|1 / log(gap)| with 0 -> 0 and a cap of 1e3 where |log gap| < 1e-3."""
    gaps = np.asarray(gaps, dtype=float)
    out = np.zeros_like(gaps)
    pos = gaps > 0
    logs = np.log(gaps[pos])
    vals = np.where(np.abs(logs) < ILAS_LOG_FLOOR, ILAS_CAP, np.abs(1.0 / np.where(logs == 0, 1.0, logs)))
    out[pos] = vals
    return out


def ilas(spec: Spectrum, n_cff: int | None = None) -> float:
    """Inverse logarithmic anti-cross space: sum over n = 0..n_cff of |1/log(E_{n+1} - E_n)|."""
    if n_cff is None:
        depth = spec.params.depth_drive if spec.params is not None else 0.0
        n_cff = default_n_cff(depth)
    if n_cff + 2 > spec.n_levels:
        raise UsageError(f"n_cff={n_cff} needs {n_cff + 2} levels, spectrum has {spec.n_levels}")
    energies = np.sort(spec.energies)[: n_cff + 2]
    return float(ilas_terms(np.diff(energies)).sum())
