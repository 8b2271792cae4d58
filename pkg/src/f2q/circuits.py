"""Circuit IR, lattice circuit constructions, scheduling, and text export.

Gate matrices use the convention that targets[0] is the most significant
local bit. Rotation angles follow RZ(a) = exp(-i a Z / 2) and analogues;
every gate-level identity is pinned by dense-exponential tests rather
than trusted from a decomposition sketch.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .lattice import (
    Edge,
    LatticeSpec,
    Site,
    aux_index,
    edge_sites,
    edges,
    phys_index,
    plaquette_sites,
    sites,
    vacuum_plaquette_set,
)
from .pauli import ConstraintSet, PauliString
from .statevec import StateVector, apply_matrix_gate

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_S = np.diag([1, 1j]).astype(np.complex128)

FIXED_1Q = {"x": _X, "y": _Y, "z": _Z, "h": _H, "s": _S, "sdg": _S.conj()}
CONTROLLED_2Q = {"cnot": _X, "cy": _Y, "cz": _Z, "ch": _H}

GATE_ARITY = {
    "x": 1, "y": 1, "z": 1, "h": 1, "s": 1, "sdg": 1,
    "rx": 1, "ry": 1, "rz": 1,
    "cnot": 2, "cy": 2, "cz": 2, "ch": 2, "cphase": 2,
    "ccz": 3,
}
GATE_PARAMS = {"rx": 1, "ry": 1, "rz": 1, "cphase": 1}


@dataclass(eq=False)
class Gate:
    kind: str
    targets: Tuple[int, ...]
    params: Tuple[float, ...] = ()
    matrix: Optional[np.ndarray] = None
    two_qubit_cost: Optional[int] = None
    slots: Tuple[int, ...] = ()

    def __post_init__(self):
        self.targets = tuple(int(q) for q in self.targets)
        self.params = tuple(float(p) for p in self.params)
        if self.kind == "matrix":
            if self.matrix is None:
                raise ValueError("matrix gate without a matrix")
            self.matrix = np.asarray(self.matrix, dtype=np.complex128)
            d = 1 << len(self.targets)
            if self.matrix.shape != (d, d):
                raise ValueError("matrix shape does not match target count")
            if np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(d))) > 1e-10:
                raise ValueError("matrix gate is not unitary")
        else:
            if self.kind not in GATE_ARITY:
                raise ValueError(f"unknown gate kind {self.kind!r}")
            if len(self.targets) != GATE_ARITY[self.kind]:
                raise ValueError(f"{self.kind} expects {GATE_ARITY[self.kind]} targets")
            if len(self.params) != GATE_PARAMS.get(self.kind, 0):
                raise ValueError(f"{self.kind} has wrong parameter count")
            if self.matrix is not None:
                raise ValueError("only matrix gates carry an explicit matrix")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("duplicate targets")
        if len(set(self.slots)) != len(self.slots):
            raise ValueError("duplicate parameter slots on one gate")

    @property
    def arity(self) -> int:
        return len(self.targets)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Gate):
            return NotImplemented
        if (self.kind, self.targets, self.params, self.two_qubit_cost) != (
            other.kind, other.targets, other.params, other.two_qubit_cost
        ):
            return False
        if (self.matrix is None) != (other.matrix is None):
            return False
        return self.matrix is None or np.array_equal(self.matrix, other.matrix)


def gate_unitary(g: Gate) -> np.ndarray:
    if g.kind == "matrix":
        return g.matrix
    if g.kind in FIXED_1Q:
        return FIXED_1Q[g.kind]
    if g.kind == "rx":
        a = g.params[0] / 2
        return np.array([[math.cos(a), -1j * math.sin(a)],
                         [-1j * math.sin(a), math.cos(a)]], dtype=np.complex128)
    if g.kind == "ry":
        a = g.params[0] / 2
        return np.array([[math.cos(a), -math.sin(a)],
                         [math.sin(a), math.cos(a)]], dtype=np.complex128)
    if g.kind == "rz":
        a = g.params[0] / 2
        return np.diag([cmath.exp(-1j * a), cmath.exp(1j * a)]).astype(np.complex128)
    if g.kind in CONTROLLED_2Q:
        out = np.eye(4, dtype=np.complex128)
        out[2:, 2:] = CONTROLLED_2Q[g.kind]
        return out
    if g.kind == "cphase":
        return np.diag([1, 1, 1, cmath.exp(1j * g.params[0])]).astype(np.complex128)
    if g.kind == "ccz":
        out = np.eye(8, dtype=np.complex128)
        out[7, 7] = -1
        return out
    raise ValueError(f"unknown gate kind {g.kind!r}")


@dataclass
class Circuit:
    n_qubits: int
    gates: List[Gate] = field(default_factory=list)

    def add(self, gate: Gate) -> "Circuit":
        if any(not 0 <= q < self.n_qubits for q in gate.targets):
            raise ValueError("gate target outside register")
        self.gates.append(gate)
        return self

    def extend(self, other: "Circuit") -> "Circuit":
        for g in other.gates:
            self.add(g)
        return self

    def __iter__(self):
        return iter(self.gates)

    def __len__(self):
        return len(self.gates)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Circuit):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self.gates == other.gates

    @property
    def param_slots(self) -> Dict[int, List[int]]:
        """slot index -> positions of gates bound to it."""
        out: Dict[int, List[int]] = {}
        for i, g in enumerate(self.gates):
            for s in g.slots:
                out.setdefault(s, []).append(i)
        return out

    @property
    def n_parameterized(self) -> int:
        return sum(1 for g in self.gates if g.slots)


def apply_circuit(state: StateVector, c: Circuit) -> StateVector:
    if c.n_qubits != state.register_size:
        raise ValueError("register size mismatch")
    for g in c.gates:
        apply_matrix_gate(state, gate_unitary(g), g.targets)
    return state


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Dense unitary of the whole circuit (small registers only)."""
    if c.n_qubits > 12:
        raise ValueError("dense circuit unitary limited to 12 qubits")
    n = c.n_qubits
    dim = 1 << n
    U = np.eye(dim, dtype=np.complex128)
    for g in c.gates:
        k = g.arity
        axes = [n - 1 - q for q in g.targets]
        M = gate_unitary(g).reshape([2] * (2 * k))
        T = U.reshape([2] * n + [dim])
        T = np.tensordot(M, T, axes=(list(range(k, 2 * k)), axes))
        T = np.moveaxis(T, list(range(k)), axes)
        U = np.ascontiguousarray(T).reshape(dim, dim)
    return U


def restrict_circuit(c: Circuit, support: Sequence[int]) -> Circuit:
    """Remap a circuit whose gates all act within `support` onto qubits 0..k-1."""
    pos = {q: i for i, q in enumerate(support)}
    out = Circuit(len(support))
    for g in c.gates:
        try:
            tgts = tuple(pos[q] for q in g.targets)
        except KeyError:
            raise ValueError("gate acts outside the given support")
        out.add(Gate(g.kind, tgts, params=g.params, matrix=g.matrix,
                     two_qubit_cost=g.two_qubit_cost, slots=g.slots))
    return out


def adjoint(c: Circuit) -> Circuit:
    inv = {"s": "sdg", "sdg": "s"}
    out = Circuit(c.n_qubits)
    for g in reversed(c.gates):
        if g.kind == "matrix":
            out.add(Gate("matrix", g.targets, matrix=g.matrix.conj().T,
                         two_qubit_cost=g.two_qubit_cost))
        elif g.kind in GATE_PARAMS:
            out.add(Gate(g.kind, g.targets, params=tuple(-p for p in g.params)))
        else:
            out.add(Gate(inv.get(g.kind, g.kind), g.targets))
    return out


# ------------------------------------------------- exact stabilizer tracking

_PAULI_1Q = [np.eye(2, dtype=np.complex128), _X, _Y, _Z]


def _local_pauli(letters: Sequence[int]) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for l in letters:
        out = np.kron(out, _PAULI_1Q[l])
    return out


def _snap_to_pauli(M: np.ndarray, k: int) -> Tuple[List[int], complex]:
    """Write M = phase * (Pauli tensor) or fail."""
    best = None
    for code in range(4 ** k):
        letters = [(code >> (2 * (k - 1 - i))) & 3 for i in range(k)]
        P = _local_pauli(letters)
        coeff = complex(np.trace(P.conj().T @ M)) / (1 << k)
        if abs(coeff) > 0.5:
            best = (letters, coeff)
        elif abs(coeff) > 1e-12:
            raise ValueError("operator is not a single Pauli after conjugation")
    if best is None:
        raise ValueError("operator is not a single Pauli after conjugation")
    letters, coeff = best
    for phase in (1, -1, 1j, -1j):
        if abs(coeff - phase) < 1e-12:
            return letters, phase
    raise ValueError("non-Clifford conjugation phase")


def conjugate_string(c: Circuit, s: PauliString) -> Tuple[PauliString, complex]:
    """U^dagger S U for a Clifford circuit, tracked exactly as a Pauli."""
    letters = bytearray(s.letters)
    phase = complex(s.phase)
    for g in reversed(c.gates):
        sup = g.targets
        if all(letters[q] == 0 for q in sup):
            continue
        U = gate_unitary(g)
        P = _local_pauli([letters[q] for q in sup])
        M = U.conj().T @ P @ U
        new_letters, ph = _snap_to_pauli(M, len(sup))
        for q, l in zip(sup, new_letters):
            letters[q] = l
        phase *= ph
    return PauliString(s.n, bytes(letters)), phase


def stabilizer_expectations(c: Circuit, cs: ConstraintSet) -> List[complex]:
    """<0...0| U^dagger S U |0...0> for each stabilizer, exactly (Clifford only)."""
    out = []
    for s, _ in cs:
        conj, phase = conjugate_string(c, s)
        flip, _, _ = conj.masks()
        if flip:
            out.append(0j)
        else:
            out.append(phase)  # all-Z strings give +1 on |0...0>
    return out


# ------------------------------------------------- model circuit constructions

def periodicity_circuit(spec: LatticeSpec) -> Circuit:
    """X gates on auxiliary qubits giving every loop stabilizer its target."""
    c = Circuit(spec.n_qubits)
    if spec.Lx % 2 == 1:
        return c  # odd lattices: all loop targets are +1 on |0...0>
    if spec.Lx == spec.Ly:
        cells = [Site(m, m) for m in range(spec.Lx)]
    else:
        # one X per row and an odd count per column
        cells = [Site(0, ry) for ry in range(spec.Ly - 1)]
        cells += [Site(cx, spec.Ly - 1) for cx in range(1, spec.Lx)]
    for r in cells:
        c.add(Gate("x", (aux_index(spec, r),)))
    return c


def vacuum_anchor_order(spec: LatticeSpec) -> List[Site]:
    """Vacuum plaquette anchors, rows ascending, columns descending.

    Within each row the column order is reversed so that a deferred X on a
    control qubit fires before any block whose plaquette anticommutes with it.
    """
    anchors = vacuum_plaquette_set(spec)
    rows: Dict[int, List[Site]] = {}
    for r in anchors:
        rows.setdefault(r.ry, []).append(r)
    out: List[Site] = []
    for ry in sorted(rows):
        out.extend(sorted(rows[ry], key=lambda s: -s.rx))
    return out


def vacuum_circuit(spec: LatticeSpec) -> Circuit:
    c = Circuit(spec.n_qubits)
    vp = periodicity_circuit(spec)
    control_of = {}  # control qubit -> anchor
    for r in vacuum_anchor_order(spec):
        control_of[aux_index(spec, spec.shift(r, 0, 1))] = r
    deferred: Dict[Site, Gate] = {}
    for g in vp.gates:
        q = g.targets[0]
        if q in control_of:
            deferred[control_of[q]] = g
        else:
            c.add(g)
    for r in vacuum_anchor_order(spec):
        _, rx_, rxy, ry_ = plaquette_sites(spec, r)
        ctrl = aux_index(spec, ry_)
        c.add(Gate("h", (ctrl,)))
        c.add(Gate("cy", (ctrl, aux_index(spec, r))))
        c.add(Gate("cnot", (ctrl, aux_index(spec, rx_))))
        c.add(Gate("cy", (ctrl, aux_index(spec, rxy))))
        if r in deferred:
            c.add(deferred[r])
    return c


def pair_creation(spec: LatticeSpec, e: Edge) -> Circuit:
    r, s = edge_sites(spec, e)
    c = Circuit(spec.n_qubits)
    c.add(Gate("x", (phys_index(spec, r),)))
    c.add(Gate("x", (phys_index(spec, s),)))
    if e.direction == "x":
        c.add(Gate("z", (aux_index(spec, s),)))
    else:
        c.add(Gate("y", (aux_index(spec, r),)))
        c.add(Gate("x", (aux_index(spec, s),)))
    return c


def w_circuit(n_qubits: int, a: int, b: int) -> Circuit:
    """Hermitian two-qubit W with W (Z_a - Z_b) W = XX + YY."""
    if a == b:
        raise ValueError("distinct qubits required")
    c = Circuit(n_qubits)
    c.add(Gate("cnot", (a, b)))
    c.add(Gate("ch", (b, a)))
    c.add(Gate("cnot", (a, b)))
    return c


def zz_rotation(n_qubits: int, q1: int, q2: int, theta: float) -> Circuit:
    """exp(+i theta Z_q1 Z_q2) as CNOT - RZ - CNOT."""
    c = Circuit(n_qubits)
    c.add(Gate("cnot", (q1, q2)))
    c.add(Gate("rz", (q2,), params=(-2.0 * theta,)))
    c.add(Gate("cnot", (q1, q2)))
    return c


def zyx_rotation(n_qubits: int, qz: int, qy: int, qx: int, theta: float) -> Circuit:
    """exp(-i theta Z_qz Y_qy X_qx) via basis-rotated CNOT ladder."""
    c = Circuit(n_qubits)
    c.add(Gate("rx", (qy,), params=(-math.pi / 2,)))
    c.add(Gate("ry", (qx,), params=(math.pi / 2,)))
    c.add(Gate("cnot", (qx, qy)))
    c.add(Gate("cnot", (qy, qz)))
    c.add(Gate("rz", (qz,), params=(2.0 * theta,)))
    c.add(Gate("cnot", (qy, qz)))
    c.add(Gate("cnot", (qx, qy)))
    c.add(Gate("rx", (qy,), params=(math.pi / 2,)))
    c.add(Gate("ry", (qx,), params=(-math.pi / 2,)))
    return c


def hop_x_evolution(spec: LatticeSpec, e: Edge, theta: float) -> Circuit:
    """exp(+i theta (XX+YY)_phys Z(2)_{r+x}) on an x-edge."""
    if e.direction != "x":
        raise ValueError("x-edge required")
    r, s = edge_sites(spec, e)
    pr, ps, a = phys_index(spec, r), phys_index(spec, s), aux_index(spec, s)
    c = Circuit(spec.n_qubits)
    c.extend(w_circuit(spec.n_qubits, pr, ps))
    c.extend(zz_rotation(spec.n_qubits, pr, a, +theta))
    c.extend(zz_rotation(spec.n_qubits, ps, a, -theta))
    c.extend(w_circuit(spec.n_qubits, pr, ps))
    return c


def hop_y_evolution(spec: LatticeSpec, e: Edge, theta: float) -> Circuit:
    """exp(+i theta (-XY+YX)_phys Y(2)_r X(2)_{r+y}) on a y-edge."""
    if e.direction != "y":
        raise ValueError("y-edge required")
    r, s = edge_sites(spec, e)
    pr, ps = phys_index(spec, r), phys_index(spec, s)
    ar, as_ = aux_index(spec, r), aux_index(spec, s)
    n = spec.n_qubits
    c = Circuit(n)
    c.add(Gate("sdg", (pr,)))
    c.extend(w_circuit(n, pr, ps))
    c.add(Gate("rx", (ar,), params=(-math.pi / 2,)))
    c.add(Gate("ry", (as_,), params=(math.pi / 2,)))
    c.add(Gate("cnot", (as_, ar)))
    c.extend(zz_rotation(n, ps, ar, -theta))
    c.extend(zz_rotation(n, pr, ar, +theta))
    c.add(Gate("cnot", (as_, ar)))
    c.add(Gate("rx", (ar,), params=(math.pi / 2,)))
    c.add(Gate("ry", (as_,), params=(-math.pi / 2,)))
    c.extend(w_circuit(n, pr, ps))
    c.add(Gate("s", (pr,)))
    return c


def interaction_evolution(spec: LatticeSpec, e: Edge, lam: float) -> Circuit:
    """exp(-i lam (1-Z)(1-Z)/4) on the edge's physical pair, exactly."""
    r, s = edge_sites(spec, e)
    c = Circuit(spec.n_qubits)
    c.add(Gate("cphase", (phys_index(spec, r), phys_index(spec, s)), params=(-lam,)))
    return c


def _edge_groups(spec: LatticeSpec) -> Dict[str, List[Edge]]:
    """Edges split into parallel-applicable slices, row-major within each."""
    xs = [e for e in edges(spec) if e.direction == "x"]
    ys = [e for e in edges(spec) if e.direction == "y"]
    return {
        "x_even": [e for e in xs if e.origin.rx % 2 == 0],
        "x_odd": [e for e in xs if e.origin.rx % 2 == 1],
        "y_even": [e for e in ys if e.origin.ry % 2 == 0],
        "y_odd": [e for e in ys if e.origin.ry % 2 == 1],
    }


def trotter_blocks(spec: LatticeSpec, t: float, V: float, dt: float) -> List[Tuple[str, Edge, Circuit]]:
    """First-order Trotter step as labeled per-edge blocks, in applied order."""
    g = _edge_groups(spec)
    out: List[Tuple[str, Edge, Circuit]] = []
    for key in ("x_even", "x_odd", "y_even", "y_odd"):
        for e in g[key]:
            out.append(("interaction", e, interaction_evolution(spec, e, V * dt)))
    for key in ("x_even", "x_odd"):
        for e in g[key]:
            out.append(("hop_x", e, hop_x_evolution(spec, e, spec.rho * t * dt / 2)))
    for key in ("y_even", "y_odd"):
        for e in g[key]:
            out.append(("hop_y", e, hop_y_evolution(spec, e, t * dt / 2)))
    return out


def trotter_step(spec: LatticeSpec, t: float, V: float, dt: float) -> Circuit:
    c = Circuit(spec.n_qubits)
    for _, _, block in trotter_blocks(spec, t, V, dt):
        c.extend(block)
    return c


# ------------------------------------------------- variational gates

def a_gate_unitary(theta: float, phi: float) -> np.ndarray:
    """Two-qubit particle-number-conserving rotation."""
    ct, st = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, ct, cmath.exp(1j * phi) * st, 0],
            [0, cmath.exp(-1j * phi) * st, -ct, 0],
            [0, 0, 0, 1],
        ],
        dtype=np.complex128,
    )


def vx_unitary(theta: float, phi: float) -> np.ndarray:
    """8x8 on (phys r, phys r+x, aux r+x); aux Z dresses the swap phases."""
    ct, st = math.cos(theta), math.sin(theta)
    U = np.eye(8, dtype=np.complex128)
    for a in range(2):
        lo, hi = 2 + a, 4 + a  # |01 a>, |10 a>
        U[lo, lo] = ct
        U[hi, hi] = -ct
        U[lo, hi] = cmath.exp(1j * phi) * st * (-1) ** a
        U[hi, lo] = cmath.exp(-1j * phi) * st * (-1) ** a
    return U


def vy_unitary(theta: float, phi: float) -> np.ndarray:
    """16x16 on (phys r, phys r+y, aux r, aux r+y) with Y_ar X_ary dressing."""
    ct, st = math.cos(theta), math.sin(theta)
    U = np.eye(16, dtype=np.complex128)
    for aa in range(4):
        a_r = aa >> 1
        f = aa ^ 3  # both aux bits flipped
        U[4 + aa, 4 + aa] = ct
        U[8 + aa, 8 + aa] = -ct
        U[8 + f, 4 + aa] = (-1) ** a_r * cmath.exp(1j * phi) * st
        U[4 + f, 8 + aa] = -((-1) ** a_r) * cmath.exp(-1j * phi) * st
    return U


VX_TWO_QUBIT_COST = 5  # CZ + A(3) + CZ
VY_TWO_QUBIT_COST = 7  # CY,CX + A(3) + CX,CY


def vx_gate(spec: LatticeSpec, e: Edge, theta: float, phi: float, slots: Tuple[int, ...] = ()) -> Gate:
    if e.direction != "x":
        raise ValueError("x-edge required")
    r, s = edge_sites(spec, e)
    tgts = (phys_index(spec, r), phys_index(spec, s), aux_index(spec, s))
    return Gate("matrix", tgts, params=(theta, phi), matrix=vx_unitary(theta, phi),
                two_qubit_cost=VX_TWO_QUBIT_COST, slots=slots)


def vy_gate(spec: LatticeSpec, e: Edge, theta: float, phi: float, slots: Tuple[int, ...] = ()) -> Gate:
    if e.direction != "y":
        raise ValueError("y-edge required")
    r, s = edge_sites(spec, e)
    tgts = (phys_index(spec, r), phys_index(spec, s),
            aux_index(spec, r), aux_index(spec, s))
    return Gate("matrix", tgts, params=(theta, phi), matrix=vy_unitary(theta, phi),
                two_qubit_cost=VY_TWO_QUBIT_COST, slots=slots)


def vx_native(spec: LatticeSpec, e: Edge, theta: float, phi: float) -> Circuit:
    """Gate-count decomposition of vx: CZ, A on the physical pair, CZ."""
    r, s = edge_sites(spec, e)
    pr, ps, a = phys_index(spec, r), phys_index(spec, s), aux_index(spec, s)
    c = Circuit(spec.n_qubits)
    c.add(Gate("cz", (pr, a)))
    c.add(Gate("matrix", (pr, ps), params=(theta, phi),
               matrix=a_gate_unitary(theta, phi), two_qubit_cost=3))
    c.add(Gate("cz", (pr, a)))
    return c


def vy_native(spec: LatticeSpec, e: Edge, theta: float, phi: float) -> Circuit:
    """Gate-count decomposition of vy: controlled-Pauli dressing around A."""
    r, s = edge_sites(spec, e)
    pr, ps = phys_index(spec, r), phys_index(spec, s)
    ar, as_ = aux_index(spec, r), aux_index(spec, s)
    c = Circuit(spec.n_qubits)
    c.add(Gate("cy", (pr, ar)))
    c.add(Gate("cnot", (pr, as_)))
    c.add(Gate("matrix", (pr, ps), params=(theta, math.pi / 2 - phi),
               matrix=a_gate_unitary(theta, math.pi / 2 - phi), two_qubit_cost=3))
    c.add(Gate("cnot", (pr, as_)))
    c.add(Gate("cy", (pr, ar)))
    return c


def agate_layout(spec: LatticeSpec, layers: int) -> List[Tuple[str, Edge, Tuple[int, int]]]:
    """Per layer: vy on every y-edge, then vx on every x-edge, row-major."""
    ys = [e for e in edges(spec) if e.direction == "y"]
    xs = [e for e in edges(spec) if e.direction == "x"]
    out = []
    slot = 0
    for _ in range(layers):
        for e in ys:
            out.append(("vy", e, (slot, slot + 1)))
            slot += 2
        for e in xs:
            out.append(("vx", e, (slot, slot + 1)))
            slot += 2
    return out


def agate_param_count(spec: LatticeSpec, layers: int) -> int:
    return layers * 2 * len(edges(spec))


def ansatz_agate(spec: LatticeSpec, layers: int, params: Sequence[float]) -> Circuit:
    layout = agate_layout(spec, layers)
    expect = agate_param_count(spec, layers)
    if len(params) != expect:
        raise ValueError(f"expected {expect} parameters, got {len(params)}")
    c = Circuit(spec.n_qubits)
    for kind, e, (i, j) in layout:
        builder = vy_gate if kind == "vy" else vx_gate
        c.add(builder(spec, e, params[i], params[j], slots=(i, j)))
    return c


def hv_layout(spec: LatticeSpec, layers: int, granularity: str) -> List[Tuple[str, Edge, int]]:
    """Trotter-structured slices with free angles; slot index per block."""
    g = _edge_groups(spec)
    n_edges = len(edges(spec))
    out = []
    for layer in range(layers):
        if granularity == "per_group":
            s_int, s_x, s_y = 3 * layer, 3 * layer + 1, 3 * layer + 2
            slot = lambda kind, k: {"interaction": s_int, "hop_x": s_x, "hop_y": s_y}[kind]
        elif granularity == "per_edge":
            base = 2 * n_edges * layer
            counter = [base]

            def slot(kind, k, counter=counter):
                v = counter[0]
                counter[0] += 1
                return v
        else:
            raise ValueError("granularity must be per_group or per_edge")
        k = 0
        for key in ("x_even", "x_odd", "y_even", "y_odd"):
            for e in g[key]:
                out.append(("interaction", e, slot("interaction", k)))
                k += 1
        for key in ("x_even", "x_odd"):
            for e in g[key]:
                out.append(("hop_x", e, slot("hop_x", k)))
                k += 1
        for key in ("y_even", "y_odd"):
            for e in g[key]:
                out.append(("hop_y", e, slot("hop_y", k)))
                k += 1
    return out


def hv_param_count(spec: LatticeSpec, layers: int, granularity: str) -> int:
    if granularity == "per_group":
        return 3 * layers
    if granularity == "per_edge":
        return 2 * len(edges(spec)) * layers
    raise ValueError("granularity must be per_group or per_edge")


def ansatz_hv(spec: LatticeSpec, layers: int, params: Sequence[float], granularity: str = "per_group") -> Circuit:
    expect = hv_param_count(spec, layers, granularity)
    if len(params) != expect:
        raise ValueError(f"expected {expect} parameters, got {len(params)}")
    c = Circuit(spec.n_qubits)
    for kind, e, slot in hv_layout(spec, layers, granularity):
        a = params[slot]
        if kind == "interaction":
            block = interaction_evolution(spec, e, a)
        elif kind == "hop_x":
            block = hop_x_evolution(spec, e, spec.rho * a)
        else:
            block = hop_y_evolution(spec, e, a)
        for gate in block.gates:
            # only the angle-carrying gates depend on the slot value
            variational = gate.kind in ("rz", "cphase")
            c.add(Gate(gate.kind, gate.targets, params=gate.params,
                       matrix=gate.matrix, two_qubit_cost=gate.two_qubit_cost,
                       slots=(slot,) if variational else ()))
    return c


# ------------------------------------------------- scheduling and export

@dataclass
class DepthReport:
    two_qubit_depth: int
    counts_by_arity: Dict[int, int]
    n_parameterized: int
    total_gates: int


def schedule(c: Circuit, use_declared_costs: bool = False) -> DepthReport:
    """ASAP depth with single-qubit gates free and k>=2-qubit gates cost 1."""
    front = [0] * c.n_qubits
    counts: Dict[int, int] = {}
    for g in c.gates:
        counts[g.arity] = counts.get(g.arity, 0) + 1
        if g.arity < 2:
            continue
        cost = 1
        if use_declared_costs and g.two_qubit_cost is not None:
            cost = g.two_qubit_cost
        start = max(front[q] for q in g.targets)
        for q in g.targets:
            front[q] = start + cost
    depth = max(front) if front else 0
    return DepthReport(
        two_qubit_depth=depth,
        counts_by_arity=counts,
        n_parameterized=c.n_parameterized,
        total_gates=len(c.gates),
    )


def export_text(c: Circuit) -> str:
    lines = [f"qubits {c.n_qubits}"]
    for g in c.gates:
        toks = [g.kind] + [f"q{q}" for q in g.targets]
        toks += [repr(p) for p in g.params]
        if g.kind == "matrix":
            toks += [repr(complex(v)) for v in g.matrix.reshape(-1)]
            if g.two_qubit_cost is not None:
                toks.append(f"cost={g.two_qubit_cost}")
        lines.append(" ".join(toks))
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> Circuit:
    lines = [ln for ln in (ln.strip() for ln in text.splitlines()) if ln]
    if not lines or not lines[0].startswith("qubits "):
        raise ValueError("missing qubits header")
    c = Circuit(int(lines[0].split()[1]))
    for ln in lines[1:]:
        toks = ln.split()
        kind = toks[0]
        rest = toks[1:]
        targets = []
        while rest and rest[0].startswith("q") and rest[0][1:].isdigit():
            targets.append(int(rest.pop(0)[1:]))
        cost = None
        if rest and rest[-1].startswith("cost="):
            cost = int(rest.pop()[5:])
        if kind == "matrix":
            d = 1 << len(targets)
            vals = [complex(tok) for tok in rest]
            if len(vals) != d * d:
                # matrix params precede the entries
                params = [float(v.real) for v in vals[: len(vals) - d * d]]
                vals = vals[len(vals) - d * d:]
            else:
                params = []
            mat = np.array(vals, dtype=np.complex128).reshape(d, d)
            c.add(Gate("matrix", tuple(targets), params=tuple(params), matrix=mat,
                       two_qubit_cost=cost))
        else:
            params = tuple(float(tok) for tok in rest)
            c.add(Gate(kind, tuple(targets), params=params))
    return c
