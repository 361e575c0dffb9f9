"""Fock-state input master equations with photon-counting branches.

Each single-photon input line carries a two-level hierarchy index
``(m, n)`` on the generalized density operators.  To resolve where each
photon ends up, the state is further split into branches labelled by which
output channel has already clicked.  Jumps into a different branch are moved
out of the ordinary master equation and routed to the destination branch.
Branches whose target and control are both resolved only need the trace of
their physical block, so they are kept as scalar accumulators.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .config import Problem

# Time-dependent coefficient tags of the generator pieces.
F_ONE, F_XT, F_XT_C, F_XT_ABS, F_XC, F_XC_C, F_XC_ABS = range(7)
N_TAGS = 7

# Target statuses.  Dephasing before the click makes the photon incoherent.
T_LIVE, T_DEPH, T_TRANS, T_REFL, T_DEPH_TRANS, T_DEPH_REFL, T_LOST = range(7)
TARGET_STATUSES = ("live", "dephased", "T", "R", "dephased_T", "dephased_R", "lost")
TARGET_FINAL = {T_TRANS, T_REFL, T_DEPH_TRANS, T_DEPH_REFL, T_LOST}

C_LIVE, C_DEPH, C_REFL, C_DEPH_REFL, C_LOST = range(5)
CONTROL_STATUSES = ("live", "dephased", "B", "dephased_B", "lost")
CONTROL_FINAL = {C_REFL, C_DEPH_REFL, C_LOST}

# Routing: (channel -> destination) per status; missing entries keep the status.
TARGET_ROUTES = {
    T_LIVE: {"r": T_TRANS, "l": T_REFL, "relax1": T_LOST, "deph1": T_DEPH},
    T_DEPH: {"r": T_DEPH_TRANS, "l": T_DEPH_REFL, "relax1": T_LOST},
}
CONTROL_ROUTES = {
    C_LIVE: {"b": C_REFL, "relax2": C_LOST, "deph2": C_DEPH},
    C_DEPH: {"b": C_DEPH_REFL, "relax2": C_LOST},
}

# Coherent and flux readouts: target status -> row of the 3x2 joint table.
TARGET_ROW_COHERENT = {T_TRANS: 0, T_REFL: 1}
TARGET_ROW_FLUX = {T_TRANS: 0, T_REFL: 1, T_DEPH_TRANS: 0, T_DEPH_REFL: 1}
CONTROL_COL_COHERENT = {C_REFL: 0}
CONTROL_COL_FLUX = {C_REFL: 0, C_DEPH_REFL: 0}


def _qubit_ops():
    sm = np.array([[0.0, 1.0], [0.0, 0.0]])  # |g><e| in the basis (g, e)
    pe = np.array([[0.0, 0.0], [0.0, 1.0]])
    eye = np.eye(2)
    return sm, pe, eye


@dataclass
class Channel:
    name: str
    op: np.ndarray
    drive: int | None  # index into the list of driven lines, or None
    side: str  # "t" or "c": which status it updates


@dataclass
class Generator:
    """Sparse pieces of the linear system ``dy/dt = sum_f f(t) M_f y``."""

    matrices: list  # one CSR matrix per tag
    y0: np.ndarray
    readout: dict  # (target status, control status) -> list of state indices
    n_state: int
    drives: tuple
    coherence_rows: dict  # channel name -> (state indices, coefficients) for amplitudes
    leakage: float = 0.0  # weight of control-driven terms that would move target status

    def combined(self):
        """Merge pieces into one CSR with a tag per entry, for the kernels."""
        rows, cols, vals, tags = [], [], [], []
        for tag, mat in enumerate(self.matrices):
            coo = mat.tocoo()
            rows.append(coo.row)
            cols.append(coo.col)
            vals.append(coo.data)
            tags.append(np.full(coo.nnz, tag, dtype=np.int32))
        row = np.concatenate(rows)
        col = np.concatenate(cols)
        val = np.concatenate(vals).astype(np.complex128)
        tag = np.concatenate(tags)
        order = np.lexsort((col, row))
        row, col, val, tag = row[order], col[order], val[order], tag[order]
        indptr = np.zeros(self.n_state + 1, dtype=np.int64)
        np.add.at(indptr, row + 1, 1)
        indptr = np.cumsum(indptr)
        return indptr, col.astype(np.int64), val, tag.astype(np.int32)


def _superops(op):
    """Row-major vectorization: A rho -> kron(A, I), rho B -> kron(I, B^T)."""
    eye = np.eye(op.shape[0])
    dag = op.conj().T
    return {
        "left": lambda a: np.kron(a, eye),
        "right": lambda b: np.kron(eye, b.T),
        "dag": dag,
    }


def build_generator(prob: Problem) -> Generator:
    p = prob.params
    sm, pe, eye = _qubit_ops()
    # Basis index 2 * e1 + e2; qubit 1 is the left tensor factor.
    sm1, sm2 = np.kron(sm, eye), np.kron(eye, sm)
    pe1, pe2 = np.kron(pe, eye), np.kron(eye, pe)
    ham = np.diag(prob.energies[[0, 2, 1, 3]])  # reorder to index 2*e1 + e2
    kappa1 = 1.0 / p.tau1
    channels = [
        Channel("r", np.sqrt(kappa1) * sm1, 0, "t"),
        Channel("l", np.sqrt(kappa1) * sm1, None, "t"),
    ]
    if p.gamma_r > 0.0:
        channels.append(Channel("relax1", np.sqrt(p.gamma_r) * sm1, None, "t"))
    if p.gamma_phi > 0.0:
        channels.append(Channel("deph1", np.sqrt(2.0 * p.gamma_phi) * pe1, None, "t"))
    drives = ("t",)
    if prob.pair:
        drives = ("t", "c")
        channels.append(Channel("b", np.sqrt(2.0 / p.tau2) * sm2, 1, "c"))
        if p.gamma_r > 0.0:
            channels.append(Channel("relax2", np.sqrt(p.gamma_r) * sm2, None, "c"))
        if p.gamma_phi > 0.0:
            channels.append(Channel("deph2", np.sqrt(2.0 * p.gamma_phi) * pe2, None, "c"))

    n_drive = len(drives)
    control_statuses = range(len(CONTROL_STATUSES)) if prob.pair else [C_LIVE]
    branches = list(itertools.product(range(len(TARGET_STATUSES)), control_statuses))

    def is_final(branch):
        st, sc = branch
        return st in TARGET_FINAL and (sc in CONTROL_FINAL or not prob.pair)

    def route(branch, ch):
        st, sc = branch
        if ch.side == "t":
            st = TARGET_ROUTES.get(st, {}).get(ch.name, st)
        else:
            sc = CONTROL_ROUTES.get(sc, {}).get(ch.name, sc)
        return st, sc

    blocks = list(itertools.product(*([(0, 0), (0, 1), (1, 0), (1, 1)] * 1 for _ in range(n_drive))))
    block_id = {b: i for i, b in enumerate(blocks)}
    full = tuple((1, 1) for _ in range(n_drive))
    live_branches = [b for b in branches if not is_final(b)]
    final_branches = [b for b in branches if is_final(b)]
    n_blk = len(blocks)
    br_id = {b: i for i, b in enumerate(live_branches)}
    n_live = len(live_branches) * n_blk * 16
    acc_id = {b: n_live + i for i, b in enumerate(final_branches)}
    n_state = n_live + len(final_branches)

    def base(branch, blk):
        return (br_id[branch] * n_blk + block_id[blk]) * 16

    trace_rows = [a * 4 + a for a in range(4)]
    pieces = [dict() for _ in range(N_TAGS)]  # (row, col) -> value

    leak = [0.0]

    def add(tag, dst_branch, dst_blk, src_branch, src_blk, sup, sign=1.0):
        if src_branch in acc_id:
            return
        if tag >= F_XC and dst_branch[0] != src_branch[0]:
            leak[0] += float(np.abs(sup).sum())
        col0 = base(src_branch, src_blk)
        store = pieces[tag]
        if dst_branch in acc_id:
            if dst_blk != full:
                return
            row = acc_id[dst_branch]
            vec = sup[trace_rows].sum(axis=0)
            for j in np.nonzero(np.abs(vec) > 0)[0]:
                key = (row, col0 + j)
                store[key] = store.get(key, 0.0) + sign * vec[j]
            return
        row0 = base(dst_branch, dst_blk)
        nz_r, nz_c = np.nonzero(np.abs(sup) > 0)
        for i, j in zip(nz_r, nz_c):
            key = (row0 + i, col0 + j)
            store[key] = store.get(key, 0.0) + sign * sup[i, j]

    e4 = np.eye(4)
    kron = np.kron
    lindblad = -1j * (kron(ham, e4) - kron(e4, ham.T))
    for ch in channels:
        L = ch.op
        LdL = L.conj().T @ L
        lindblad = lindblad + kron(L, L.conj()) - 0.5 * kron(LdL, e4) - 0.5 * kron(e4, LdL.T)
    drive_tags = [(F_XT, F_XT_C, F_XT_ABS), (F_XC, F_XC_C, F_XC_ABS)]
    drive_op = {ch.drive: ch.op for ch in channels if ch.drive is not None}

    def lowered(blk, d, which):
        lst = list(blk)
        m, n = lst[d]
        lst[d] = (m - 1, n) if which == "m" else (m, n - 1) if which == "n" else (m - 1, n - 1)
        return tuple(lst)

    for branch in live_branches:
        for blk in blocks:
            add(F_ONE, branch, blk, branch, blk, lindblad)
            for d in range(n_drive):
                L = drive_op[d]
                m, n = blk[d]
                tag_x, tag_xc, _ = drive_tags[d]
                if m == 1:
                    add(tag_x, branch, blk, branch, lowered(blk, d, "m"),
                        kron(e4, L.conj()) - kron(L.conj().T, e4))
                if n == 1:
                    add(tag_xc, branch, blk, branch, lowered(blk, d, "n"),
                        kron(L, e4) - kron(e4, L.T))
            for ch in channels:
                dest = route(branch, ch)
                if dest == branch:
                    continue
                L = ch.op
                terms = [(F_ONE, blk, kron(L, L.conj()))]
                if ch.drive is not None:
                    d = ch.drive
                    m, n = blk[d]
                    tag_x, tag_xc, tag_abs = drive_tags[d]
                    if m == 1:
                        terms.append((tag_x, lowered(blk, d, "m"), kron(e4, L.conj())))
                    if n == 1:
                        terms.append((tag_xc, lowered(blk, d, "n"), kron(L, e4)))
                    if m == 1 and n == 1:
                        terms.append((tag_abs, lowered(blk, d, "mn"), np.eye(16)))
                for tag, src_blk, sup in terms:
                    add(tag, branch, blk, branch, src_blk, sup, sign=-1.0)
                    add(tag, dest, blk, branch, src_blk, sup, sign=+1.0)

    # Initial state: qubits in |g g> (or |g e>), diagonal hierarchy blocks only.
    init = 1 if prob.qubit2_excited else 0
    rho0 = np.zeros(16, dtype=complex)
    rho0[init * 4 + init] = 1.0
    y0 = np.zeros(n_state, dtype=complex)
    start = (T_LIVE, C_LIVE)
    for blk in blocks:
        if all(m == n for m, n in blk):
            y0[base(start, blk):base(start, blk) + 16] = rho0

    mats = []
    for store in pieces:
        if store:
            keys = np.array(list(store.keys()), dtype=np.int64)
            vals = np.array(list(store.values()), dtype=complex)
            mat = sp.csr_matrix((vals, (keys[:, 0], keys[:, 1])), shape=(n_state, n_state))
        else:
            mat = sp.csr_matrix((n_state, n_state), dtype=complex)
        mat.eliminate_zeros()
        mats.append(mat)

    readout = {}
    for branch in branches:
        if branch in acc_id:
            readout[branch] = [acc_id[branch]]
        else:
            readout[branch] = [base(branch, full) + r for r in trace_rows]

    # Coherent output amplitude of the target: Tr[L_r rho] on the (1,0) block.
    amp_blk = list(full)
    amp_blk[0] = (1, 0)
    amp_base = base(start, tuple(amp_blk))
    Lr = channels[0].op
    coeff = np.array(Lr.T).reshape(-1)  # Tr[L rho] = sum_ab L[b, a] rho[a, b]
    weights = {"r": (np.arange(amp_base, amp_base + 16), coeff),
               "l": (np.arange(amp_base, amp_base + 16), coeff)}

    gen = Generator(matrices=mats, y0=y0, readout=readout, n_state=n_state,
                    drives=drives, coherence_rows=weights, leakage=leak[0])
    return prune(gen)


def prune(gen: Generator) -> Generator:
    """Drop state components that cannot be reached from the initial state."""
    graph = sum((abs(m) for m in gen.matrices[1:]), abs(gen.matrices[0])).tocsc()
    seen = np.zeros(gen.n_state, dtype=bool)
    queue = deque(np.nonzero(gen.y0)[0].tolist())
    seen[list(queue)] = True
    indptr, indices = graph.indptr, graph.indices
    while queue:
        j = queue.popleft()
        for i in indices[indptr[j]:indptr[j + 1]]:
            if not seen[i]:
                seen[i] = True
                queue.append(i)
    keep = np.nonzero(seen)[0]
    new_index = -np.ones(gen.n_state, dtype=np.int64)
    new_index[keep] = np.arange(keep.size)
    mats = [m[keep][:, keep].tocsr() for m in gen.matrices]
    readout = {k: [int(new_index[i]) for i in v if new_index[i] >= 0]
               for k, v in gen.readout.items()}
    coh = {}
    for name, (idx, coeff) in gen.coherence_rows.items():
        mask = new_index[idx] >= 0
        coh[name] = (new_index[idx][mask], coeff[mask])
    return Generator(matrices=mats, y0=gen.y0[keep], readout=readout, n_state=keep.size,
                     drives=gen.drives, coherence_rows=coh, leakage=gen.leakage)


def branch_probabilities(gen: Generator, y: np.ndarray) -> dict:
    return {k: float(np.real(y[v].sum())) if v else 0.0 for k, v in gen.readout.items()}


def joint_tables(prob: dict, pair: bool):
    """Fold branch probabilities into coherent and flux 3x2 tables."""
    coh = np.zeros((3, 2))
    flux = np.zeros((3, 2))
    for (st, sc), value in prob.items():
        if pair:
            jc, jf = CONTROL_COL_COHERENT.get(sc, 1), CONTROL_COL_FLUX.get(sc, 1)
        else:
            jc = jf = 0
        coh[TARGET_ROW_COHERENT.get(st, 2), jc] += value
        flux[TARGET_ROW_FLUX.get(st, 2), jf] += value
    return coh, flux
