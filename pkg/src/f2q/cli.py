"""Command-line front end: configuration, experiments, machine-readable output.

Exit codes: 0 success, 1 scientific failure (a checked physical property does
not hold), 2 usage or configuration error. Numeric output in CSV/JSON uses
17 significant digits so files round-trip through double precision.
"""

import os

# Cap BLAS pools before numpy is pulled in by the library imports below.
_threads = os.environ.get("F2Q_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import configparser
import json
import sys
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import circuits as circ
from . import oracle, vqe
from .lattice import Edge, LatticeSpec, Site, edges, phys_index, sites
from .pauli import PauliString, Z, constraint_set, tv_hamiltonian
from .statevec import cached_basis, expval_string, ground_in_sector, restrict_sum


class ConfigError(Exception):
    pass


class ScientificFailure(Exception):
    pass


# ----------------------------------------------------------------- settings

CONFIG_SCHEMA = {
    "lattice": {"lx", "ly", "rho"},
    "model": {"t", "v", "potentials"},
    "trotter": {"dt", "tmax", "n_f", "k"},
    "vqe": {"ansatz", "layers", "granularity", "n_f", "seed", "max_steps",
            "learning_rate", "lr_decay", "restarts", "window", "tolerance",
            "init_scale"},
    "output": {"path"},
}


def load_config_file(path: str) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    out: Dict[str, Dict[str, str]] = {}
    for section in parser.sections():
        if section not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in CONFIG_SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
        out[section] = dict(parser[section])
    return out


class Settings:
    """Command-line flags layered over an optional INI file."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg = load_config_file(args.config) if getattr(args, "config", None) else {}

    def get(self, flag: str, section: str, key: str, cast, default=None, required=False):
        value = getattr(self.args, flag, None)
        if value is not None:
            return value
        raw = self.cfg.get(section, {}).get(key)
        if raw is not None:
            try:
                return cast(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
        if required:
            raise ConfigError(f"missing required setting {flag.replace('_', '-')}")
        return default

    def output_path(self) -> Optional[str]:
        return self.get("output", "output", "path", str)


def parse_potentials(text: str) -> Dict[Site, float]:
    """Syntax: "rx,ry=value;rx,ry=value"."""
    pots: Dict[Site, float] = {}
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        try:
            coords, value = item.split("=")
            rx, ry = (int(p) for p in coords.split(","))
            pots[Site(rx, ry)] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad potentials entry {item!r}") from exc
    return pots


def parse_pairs(text: str) -> List[Edge]:
    """Syntax: "rx,ry,x;rx,ry,y"."""
    out: List[Edge] = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        parts = item.split(",")
        if len(parts) != 3 or parts[2] not in ("x", "y"):
            raise ConfigError(f"bad pair edge {item!r}")
        try:
            out.append(Edge(Site(int(parts[0]), int(parts[1])), parts[2]))
        except ValueError as exc:
            raise ConfigError(f"bad pair edge {item!r}") from exc
    return out


def build_lattice(s: Settings) -> LatticeSpec:
    lx = s.get("lx", "lattice", "lx", int, required=True)
    ly = s.get("ly", "lattice", "ly", int, required=True)
    rho = s.get("rho", "lattice", "rho", int, default=0)
    try:
        return LatticeSpec(lx, ly, rho)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_text(path: Optional[str], text: str) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def fmt(x: float) -> str:
    return f"{x:.17g}"


# ------------------------------------------------------------- constraints

def constraint_labels(spec: LatticeSpec) -> List[str]:
    labels = [f"gauss {r.rx},{r.ry}" for r in sites(spec)]
    labels += [f"loop_column {rx}" for rx in range(spec.Lx)]
    labels += [f"loop_row {ry}" for ry in range(spec.Ly)]
    return labels


def cmd_check_constraints(args: argparse.Namespace) -> int:
    s = Settings(args)
    spec = build_lattice(s)
    circuit = circ.vacuum_circuit(spec)
    for e in parse_pairs(args.pairs or ""):
        try:
            block = circ.pair_creation(spec, e)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        circuit.extend(block)
    cs = constraint_set(spec)
    values = circ.stabilizer_expectations(circuit, cs)
    lines = []
    all_pass = True
    for label, (stab, target), value in zip(constraint_labels(spec), cs, values):
        ok = abs(value - target) < 1e-10
        all_pass &= ok
        lines.append(f"{label} target {target:+d} value {fmt(value.real)} "
                     f"{'PASS' if ok else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    _write_text(s.output_path(), text)
    return 0 if all_pass else 1


# ------------------------------------------------------------------ quench

def _occupation_table(basis, cols: np.ndarray, n_sites: int) -> np.ndarray:
    phys_mask = (1 << n_sites) - 1
    occ = basis.labels[basis.col_ptr[:-1]] & phys_mask
    table = np.zeros((cols.size, n_sites))
    for i, c in enumerate(cols):
        for q in range(n_sites):
            table[i, q] = (int(occ[c]) >> q) & 1
    return table


def quench_trajectories(spec: LatticeSpec, t: float, V: float, n_f: int,
                        pre_potentials: Dict[Site, float], dt: float, tmax: float):
    """Trotter circuit vs exact encoded vs exact fermionic occupations.

    Returns (times, occ_trotter, occ_encoded, occ_fermionic), each occupation
    array shaped (n_times, n_sites).
    """
    cs = constraint_set(spec)
    basis = cached_basis(spec, cs)
    cols = np.flatnonzero(basis.phys_occ == n_f)
    n_steps = int(round(tmax / dt))
    if abs(n_steps * dt - tmax) > 1e-9 or n_steps < 1:
        raise ConfigError("tmax must be a positive multiple of dt")
    times = dt * np.arange(n_steps + 1)

    h_pre = tv_hamiltonian(spec, t, 0.0, pre_potentials)
    pre_sec = restrict_sum(basis, h_pre, cols)
    pre_evals = np.linalg.eigvalsh(pre_sec)
    if pre_evals.size > 1 and pre_evals[1] - pre_evals[0] < 1e-8:
        raise ScientificFailure("pre-quench ground state is degenerate; "
                                "references are ill-defined")
    _, psi0 = ground_in_sector(h_pre, spec, cs, n_f)
    sec0 = basis.project(psi0)[cols]

    # exact encoded evolution by spectral decomposition in the sector
    h_post = restrict_sum(basis, tv_hamiltonian(spec, t, V), cols)
    evals, evecs = np.linalg.eigh(h_post)
    occ_table = _occupation_table(basis, cols, spec.n_sites)
    coeff = evecs.conj().T @ sec0
    occ_encoded = np.empty((times.size, spec.n_sites))
    for k, tau in enumerate(times):
        psi = evecs @ (np.exp(-1j * evals * tau) * coeff)
        occ_encoded[k] = (np.abs(psi) ** 2) @ occ_table

    # independent fermionic reference in the matched boundary sector
    sector = oracle.match_bc_sector(spec, t, V, {n_f: evals})
    _, ferm0 = oracle.ed_ground(spec, t, 0.0, pre_potentials, sector, n_f)
    ferm = oracle.ed_propagate(spec, t, V, ferm0, sector, n_f, times)
    occ_fermionic = ferm.occupations

    # Trotterized circuit evolution on the full register
    step = circ.trotter_step(spec, t, V, dt)
    z_strings = [PauliString(spec.n_qubits, {phys_index(spec, r): Z}) for r in sites(spec)]
    state = psi0
    occ_trotter = np.empty((times.size, spec.n_sites))

    def measure(k):
        for q, zs in enumerate(z_strings):
            occ_trotter[k, q] = 0.5 * (1.0 - expval_string(state, zs).real)

    measure(0)
    for k in range(1, times.size):
        circ.apply_circuit(state, step)
        measure(k)
    return times, occ_trotter, occ_encoded, occ_fermionic


def cmd_quench(args: argparse.Namespace) -> int:
    s = Settings(args)
    spec = build_lattice(s)
    t = s.get("t", "model", "t", float, default=1.0)
    V = s.get("v", "model", "v", float, required=True)
    n_f = s.get("n_f", "trotter", "n_f", int, default=2)
    dt = s.get("dt", "trotter", "dt", float, required=True)
    tmax = s.get("tmax", "trotter", "tmax", float, required=True)
    k_pin = s.get("k", "trotter", "k", float, default=1.0)
    if dt <= 0 or tmax <= 0:
        raise ConfigError("dt and tmax must be positive")
    pots_text = s.get("potentials", "model", "potentials", str)
    if pots_text is not None:
        pre_pots = parse_potentials(pots_text)
    else:
        pre_pots = {Site(0, 0): -k_pin, Site(0, 1): -k_pin}

    times, occ_tr, occ_enc, occ_fm = quench_trajectories(
        spec, t, V, n_f, pre_pots, dt, tmax)

    rows = ["time,rx,ry,occ_trotter,occ_exact_encoded,occ_exact_fermionic"]
    for k, tau in enumerate(times):
        for q, r in enumerate(sites(spec)):
            rows.append(f"{fmt(tau)},{r.rx},{r.ry},{fmt(occ_tr[k, q])},"
                        f"{fmt(occ_enc[k, q])},{fmt(occ_fm[k, q])}")
    _write_text(s.output_path(), "\n".join(rows) + "\n")

    ref_dev = float(np.max(np.abs(occ_enc - occ_fm)))
    if ref_dev > 1e-8:
        print(f"exact references disagree: {ref_dev:.3e}", file=sys.stderr)
        return 1
    return 0


# --------------------------------------------------------------------- vqe

def cmd_vqe(args: argparse.Namespace) -> int:
    s = Settings(args)
    spec = build_lattice(s)
    try:
        config = vqe.VqeConfig(
            spec=spec,
            t=s.get("t", "model", "t", float, default=1.0),
            V=s.get("v", "model", "v", float, required=True),
            n_f=s.get("n_f", "vqe", "n_f", int, default=2),
            ansatz=s.get("ansatz", "vqe", "ansatz", str, default="agate"),
            layers=s.get("layers", "vqe", "layers", int, default=2),
            granularity=s.get("granularity", "vqe", "granularity", str, default="per_edge"),
            init_scale=s.get("init_scale", "vqe", "init_scale", float, default=0.1),
        )
        opt = vqe.OptimizerConfig(
            learning_rate=s.get("learning_rate", "vqe", "learning_rate", float, default=1e-2),
            lr_decay=s.get("lr_decay", "vqe", "lr_decay", float, default=2e-3),
            max_steps=s.get("max_steps", "vqe", "max_steps", int, default=5000),
            seed=s.get("seed", "vqe", "seed", int, default=7),
            restarts=s.get("restarts", "vqe", "restarts", int, default=1),
            window=s.get("window", "vqe", "window", int, default=150),
            tolerance=s.get("tolerance", "vqe", "tolerance", float, default=1e-11),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    start = time.perf_counter()
    trace = vqe.run(config, opt)
    wall = time.perf_counter() - start
    doc = {
        "config": {
            "lx": spec.Lx, "ly": spec.Ly, "rho": spec.rho,
            "t": config.t, "v": config.V, "n_f": config.n_f,
            "ansatz": config.ansatz, "layers": config.layers,
            "granularity": config.granularity,
            "pair_edges": [[e.origin.rx, e.origin.ry, e.direction]
                           for e in config.pair_edges],
            "n_params": config.n_params,
        },
        "optimizer": {
            "learning_rate": opt.learning_rate, "lr_decay": opt.lr_decay,
            "beta1": opt.beta1, "beta2": opt.beta2, "epsilon": opt.epsilon,
            "max_steps": opt.max_steps, "seed": opt.seed,
            "restarts": opt.restarts, "window": opt.window,
            "tolerance": opt.tolerance,
        },
        "seed": opt.seed,
        "trace": [float(e) for e in trace.energies],
        "final_energy": trace.final_energy,
        "exact_energy": trace.exact_energy,
        "relative_error": trace.relative_error,
        "relative_error_raw": trace.relative_error_raw,
        "matched_sector": {"sx": trace.matched_sector[0], "sy": trace.matched_sector[1]},
        "n_steps": trace.n_steps,
        "converged": trace.converged,
        "constraint_deviation": trace.constraint_deviation,
        "dual_route_deviation": trace.dual_route_deviation,
        "wall_time_seconds": wall,
    }
    _write_text(s.output_path(), json.dumps(doc, indent=2) + "\n")
    return 0


# ------------------------------------------------------------ depth report

def cmd_depth_report(args: argparse.Namespace) -> int:
    s = Settings(args)
    try:
        sizes = [int(p) for p in args.sizes.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sizes list {args.sizes!r}") from exc
    if not sizes:
        raise ConfigError("at least one lattice size is required")
    t = s.get("t", "model", "t", float, default=1.0)
    V = s.get("v", "model", "v", float, default=2.0)
    dt = s.get("dt", "trotter", "dt", float, default=0.05)

    rows = ["L,trotter_depth_2q,trotter_gates_1q,trotter_gates_2q,vacuum_gates_2q"]
    ls, counts = [], []
    for L in sizes:
        try:
            spec = LatticeSpec(L, L)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        step = circ.trotter_step(spec, t, V, dt)
        rep = circ.schedule(step)
        vac2q = sum(1 for g in circ.vacuum_circuit(spec) if g.arity >= 2)
        n1 = rep.counts_by_arity.get(1, 0)
        n2 = rep.counts_by_arity.get(2, 0)
        rows.append(f"{L},{rep.two_qubit_depth},{n1},{n2},{vac2q}")
        ls.append(L)
        counts.append(n2)
    l2 = np.array(ls, dtype=float) ** 2
    c = float(np.dot(counts, l2) / np.dot(l2, l2))
    resid = float(np.max(np.abs(np.array(counts) - c * l2) / (c * l2))) * 100.0
    rows.append(f"# fit_c={fmt(c)} max_residual_pct={fmt(resid)}")
    _write_text(s.output_path(), "\n".join(rows) + "\n")
    return 0


# ----------------------------------------------------------- circuit export

def cmd_export_circuit(args: argparse.Namespace) -> int:
    s = Settings(args)
    spec = build_lattice(s)
    kind = args.kind
    if kind == "vacuum":
        circuit = circ.vacuum_circuit(spec)
    elif kind == "trotter":
        t = s.get("t", "model", "t", float, default=1.0)
        V = s.get("v", "model", "v", float, default=2.0)
        dt = s.get("dt", "trotter", "dt", float, required=True)
        circuit = circ.trotter_step(spec, t, V, dt)
    elif kind == "ansatz":
        ansatz = s.get("ansatz", "vqe", "ansatz", str, default="agate")
        layers = s.get("layers", "vqe", "layers", int, default=2)
        granularity = s.get("granularity", "vqe", "granularity", str, default="per_edge")
        seed = s.get("seed", "vqe", "seed", int)
        if ansatz == "agate":
            n_params = circ.agate_param_count(spec, layers)
        elif ansatz == "hv":
            n_params = circ.hv_param_count(spec, layers, granularity)
        else:
            raise ConfigError(f"unknown ansatz {ansatz!r}")
        if seed is None:
            params = np.zeros(n_params)
        else:
            params = np.random.default_rng(seed).uniform(-0.1, 0.1, n_params)
        if ansatz == "agate":
            circuit = circ.ansatz_agate(spec, layers, params)
        else:
            circuit = circ.ansatz_hv(spec, layers, params, granularity)
    else:
        raise ConfigError(f"unknown circuit kind {kind!r}")
    _write_text(s.output_path(), circ.export_text(circuit))
    return 0


# ----------------------------------------------------------- spectrum match

def cmd_spectrum_match(args: argparse.Namespace) -> int:
    s = Settings(args)
    spec = build_lattice(s)
    t = s.get("t", "model", "t", float, default=1.0)
    V = s.get("v", "model", "v", float, required=True)
    basis = cached_basis(spec, constraint_set(spec))
    if args.n_f:
        sectors = sorted(set(args.n_f))
    else:
        if basis.dim > 4096:
            raise ConfigError("full-spectrum match is too large here; pass --n-f")
        sectors = sorted(basis.occ_counts)
    H = tv_hamiltonian(spec, t, V)
    encoded = {}
    for n_f in sectors:
        cols = np.flatnonzero(basis.phys_occ == n_f)
        if cols.size == 0:
            # an absent sector can never match the fermionic one
            encoded[n_f] = np.array([])
            continue
        encoded[n_f] = np.linalg.eigvalsh(restrict_sum(basis, H, cols))
    try:
        sector = oracle.match_bc_sector(spec, t, V, encoded)
    except ValueError:
        print("no fermionic boundary sector matches within 1e-08")
        return 1
    dev = 0.0
    for n_f, vals in encoded.items():
        ref = oracle.ed_spectrum(spec, t, V, None, sector, n_f).eigenvalues
        dev = max(dev, float(np.max(np.abs(ref - vals))))
    print(f"matched sector sx={sector.sx:+d} sy={sector.sy:+d} "
          f"max_deviation={dev:.3e} sectors={','.join(str(n) for n in sectors)}")
    return 0 if dev < 1e-8 else 1


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="f2q",
        description="Local fermion-to-qubit encoding experiments on the 2D t-V model.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, lattice=True):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--output", help="output file (default stdout)")
        if lattice:
            sp.add_argument("--lx", type=int)
            sp.add_argument("--ly", type=int)
            sp.add_argument("--rho", type=int, choices=(1, -1))

    sp = sub.add_parser("check-constraints",
                        help="verify stabilizer targets after state preparation")
    common(sp)
    sp.add_argument("--pairs", help='pair-creation edges "rx,ry,x;rx,ry,y"')
    sp.set_defaults(func=cmd_check_constraints)

    sp = sub.add_parser("quench", help="Trotter quench vs two exact references (CSV)")
    common(sp)
    sp.add_argument("--t", type=float)
    sp.add_argument("--v", type=float, help="interaction strength after the quench")
    sp.add_argument("--n-f", type=int, dest="n_f")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--tmax", type=float)
    sp.add_argument("--k", type=float, help="pre-quench pinning potential strength")
    sp.add_argument("--potentials", help='pre-quench potentials "rx,ry=value;..."')
    sp.set_defaults(func=cmd_quench)

    sp = sub.add_parser("vqe", help="variational ground-state search (JSON)")
    common(sp)
    sp.add_argument("--t", type=float)
    sp.add_argument("--v", type=float)
    sp.add_argument("--n-f", type=int, dest="n_f")
    sp.add_argument("--ansatz", choices=("agate", "hv"))
    sp.add_argument("--layers", type=int)
    sp.add_argument("--granularity", choices=("per_group", "per_edge"))
    sp.add_argument("--seed", type=int)
    sp.add_argument("--max-steps", type=int, dest="max_steps")
    sp.add_argument("--learning-rate", type=float, dest="learning_rate")
    sp.add_argument("--lr-decay", type=float, dest="lr_decay")
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--window", type=int)
    sp.add_argument("--tolerance", type=float)
    sp.add_argument("--init-scale", type=float, dest="init_scale")
    sp.set_defaults(func=cmd_vqe)

    sp = sub.add_parser("depth-report", help="Trotter depth and gate-count table (CSV)")
    common(sp, lattice=False)
    sp.add_argument("--sizes", default="4,6,8,10", help="comma-separated square sizes")
    sp.add_argument("--t", type=float)
    sp.add_argument("--v", type=float)
    sp.add_argument("--dt", type=float)
    sp.set_defaults(func=cmd_depth_report)

    sp = sub.add_parser("export-circuit", help="write a circuit in the text format")
    common(sp)
    sp.add_argument("--kind", required=True, choices=("vacuum", "trotter", "ansatz"))
    sp.add_argument("--t", type=float)
    sp.add_argument("--v", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--ansatz", choices=("agate", "hv"))
    sp.add_argument("--layers", type=int)
    sp.add_argument("--granularity", choices=("per_group", "per_edge"))
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_export_circuit)

    sp = sub.add_parser("spectrum-match",
                        help="match encoded spectra to a fermionic boundary sector")
    common(sp)
    sp.add_argument("--t", type=float)
    sp.add_argument("--v", type=float)
    sp.add_argument("--n-f", type=int, action="append", dest="n_f",
                    help="occupation sector (repeatable; default: all)")
    sp.set_defaults(func=cmd_spectrum_match)

    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ScientificFailure as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
