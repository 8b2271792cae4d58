"""Fermionic exact diagonalization of the t-V model in the physical Fock space.

Ground truth for energies, spectra, and quench trajectories, built without any
qubit encoding: occupation bitmasks over the N sites, a fixed row-major mode
ordering for the second-quantization signs, and explicit boundary-condition
signs on wrapping edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse

from .lattice import LatticeSpec, Site, edge_sites, edge_wraps, edges, site_index, sites

MAX_SITES = 12
DENSE_GUARD = 4096


class BCSector(NamedTuple):
    sx: int  # boundary hopping sign in x
    sy: int  # boundary hopping sign in y


ALL_SECTORS = [BCSector(sx, sy) for sx in (+1, -1) for sy in (+1, -1)]


@dataclass(frozen=True)
class FockState:
    mask: int
    n_sites: int

    @property
    def count(self) -> int:
        return self.mask.bit_count()

    def occupations(self) -> List[int]:
        return [(self.mask >> i) & 1 for i in range(self.n_sites)]


@dataclass
class EDResult:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    occupations: Optional[np.ndarray] = None  # shape (len(times), N)


def sector_basis(n_sites: int, n_f: int) -> np.ndarray:
    """Ascending occupation bitmasks with popcount n_f."""
    masks = [sum(1 << i for i in c) for c in combinations(range(n_sites), n_f)]
    return np.array(sorted(masks), dtype=np.int64)


def _hop_sign(mask: int, i: int, j: int) -> int:
    # parity of occupied modes strictly between i and j in the 1D ordering
    lo, hi = (i, j) if i < j else (j, i)
    between = mask & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))
    return -1 if between.bit_count() & 1 else +1


def ed_hamiltonian(
    spec: LatticeSpec,
    t: float,
    V: float,
    potentials: Optional[Dict[Site, float]],
    sector: BCSector,
    n_f: int,
) -> scipy.sparse.csr_matrix:
    N = spec.n_sites
    if N > MAX_SITES:
        raise ValueError(f"fermionic ED limited to {MAX_SITES} sites")
    if not 0 <= n_f <= N:
        raise ValueError("particle number outside [0, N]")
    basis = sector_basis(N, n_f)
    index = {int(m): k for k, m in enumerate(basis)}
    dim = basis.size

    pot = np.zeros(N)
    for r, mu in (potentials or {}).items():
        pot[site_index(spec, Site(*r))] += mu

    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []

    edge_list = []
    for e in edges(spec):
        r, s = edge_sites(spec, e)
        w = 1.0
        if edge_wraps(spec, e):
            w = float(sector.sx if e.direction == "x" else sector.sy)
        edge_list.append((site_index(spec, r), site_index(spec, s), w))

    for k, m in enumerate(map(int, basis)):
        diag = 0.0
        for i, j, w in edge_list:
            occ_i = (m >> i) & 1
            occ_j = (m >> j) & 1
            if occ_i and occ_j:
                diag += V
            # -t (c^+_i c_j + c^+_j c_i), boundary sign folded into w
            if occ_i != occ_j:
                m2 = m ^ (1 << i) ^ (1 << j)
                rows.append(index[m2])
                cols.append(k)
                vals.append(-t * w * _hop_sign(m, i, j))
        for i in range(N):
            if (m >> i) & 1:
                diag += pot[i]
        if diag:
            rows.append(k)
            cols.append(k)
            vals.append(diag)

    H = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    return H


def ed_ground(
    spec: LatticeSpec,
    t: float,
    V: float,
    potentials: Optional[Dict[Site, float]],
    sector: BCSector,
    n_f: int,
) -> Tuple[float, np.ndarray]:
    H = ed_hamiltonian(spec, t, V, potentials, sector, n_f).toarray()
    evals, evecs = np.linalg.eigh(H)
    energy, vec = float(evals[0]), evecs[:, 0]
    resid = float(np.linalg.norm(H @ vec - energy * vec))
    if resid > 1e-10:
        raise AssertionError(f"ED eigenpair residual {resid}")
    return energy, vec


def ed_spectrum(
    spec: LatticeSpec,
    t: float,
    V: float,
    potentials: Optional[Dict[Site, float]],
    sector: BCSector,
    n_f: int,
) -> EDResult:
    H = ed_hamiltonian(spec, t, V, potentials, sector, n_f)
    if H.shape[0] > DENSE_GUARD:
        raise ValueError(f"dense spectrum limited to {DENSE_GUARD} states")
    evals = np.linalg.eigvalsh(H.toarray())
    return EDResult(eigenvalues=np.sort(evals))


def single_particle_matrix(spec: LatticeSpec, t: float, sector: BCSector) -> np.ndarray:
    """Hopping matrix h with H(V=0) = sum h_ij c^+_i c_j."""
    N = spec.n_sites
    h = np.zeros((N, N))
    for e in edges(spec):
        r, s = edge_sites(spec, e)
        w = 1.0
        if edge_wraps(spec, e):
            w = float(sector.sx if e.direction == "x" else sector.sy)
        i, j = site_index(spec, r), site_index(spec, s)
        h[i, j] += -t * w
        h[j, i] += -t * w
    return h


def ed_propagate(
    spec: LatticeSpec,
    t: float,
    V: float,
    initial: np.ndarray,
    sector: BCSector,
    n_f: int,
    times: Sequence[float],
) -> EDResult:
    N = spec.n_sites
    basis = sector_basis(N, n_f)
    if initial.shape != (basis.size,):
        raise ValueError("initial vector does not match the sector dimension")
    if abs(np.linalg.norm(initial) - 1.0) > 1e-10:
        raise ValueError("initial vector is not normalized")
    H = ed_hamiltonian(spec, t, V, None, sector, n_f).toarray()
    evals, evecs = np.linalg.eigh(H)
    coeff = evecs.conj().T @ initial.astype(np.complex128)
    occ_table = np.array(
        [[(int(m) >> i) & 1 for i in range(N)] for m in basis], dtype=float
    )
    times_arr = np.asarray(list(times), dtype=float)
    occs = np.zeros((times_arr.size, N))
    for k, tau in enumerate(times_arr):
        psi = evecs @ (np.exp(-1j * evals * tau) * coeff)
        drift = abs(np.linalg.norm(psi) - 1.0)
        if drift > 1e-10:
            raise AssertionError(f"propagation norm drift {drift}")
        occs[k] = (np.abs(psi) ** 2) @ occ_table
    return EDResult(eigenvalues=evals, times=times_arr, occupations=occs)


def match_bc_sector(
    spec: LatticeSpec,
    t: float,
    V: float,
    encoded: Dict[int, np.ndarray],
    tol: float = 1e-8,
) -> BCSector:
    """Single BC sector whose per-n_f ED spectra match the encoded ones.

    encoded maps n_f to the ascending eigenvalues of the bosonized Hamiltonian
    restricted to that occupation sector of the constrained subspace.
    """
    matches = []
    for sector in ALL_SECTORS:
        ok = True
        for n_f, vals in encoded.items():
            ref = ed_spectrum(spec, t, V, None, sector, n_f).eigenvalues
            if ref.size != len(vals) or np.max(np.abs(ref - np.asarray(vals))) > tol:
                ok = False
                break
        if ok:
            matches.append(sector)
    if not matches:
        raise ValueError("no fermionic BC sector matches the encoded spectra")
    return matches[0]
