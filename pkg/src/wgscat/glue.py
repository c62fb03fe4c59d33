"""Gluing impedance-to-impedance maps across interfaces and forming scattering matrices.

Interface bookkeeping
---------------------
On an interface the owner component (side ``a``) fixes the frame: its
outward normal ``n`` and transverse coordinate ``y``.  With
``h_pm = du/dn +- i eta u`` expanded in the owner's modes,

* the owner receives ``h_+`` and emits ``h_-``;
* the other side has normal ``-n`` and coordinate ``-y``, so it receives
  ``-D h_-`` and emits ``-D h_+``,

where ``D = diag(b_m(-y) / b_m(y))`` is the parity matrix of the interface.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .geometry.graph import CircuitGraph
from .i2i import I2IMap
from .modal import PortSpec, betas, count_propagating, parity


class GlueError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class InterfaceCoupling:
    """Port ``port1`` of the first map (the frame owner) meets port ``port2`` of the second."""

    port1: int
    port2: int
    modes: int
    parity: np.ndarray | None = None

    def parity_diagonal(self, spec: PortSpec) -> np.ndarray:
        if self.parity is not None:
            d = np.asarray(self.parity, dtype=float)
            if d.shape != (self.modes,):
                raise ValueError("parity diagonal has the wrong length")
            return d
        return parity(spec, self.modes)


def merge_pair(I1: I2IMap, I2: I2IMap, coupling: InterfaceCoupling) -> I2IMap:
    """Eliminate the shared interface of two maps by a ``2M x 2M`` Schur solve.

    Ports of the result: the remaining ports of ``I1`` then those of ``I2``.
    """
    p1, p2, M = coupling.port1, coupling.port2, coupling.modes
    if I1.counts[p1] != M or I2.counts[p2] != M:
        raise ValueError("both maps must carry the interface mode count")
    if abs(I1.ports[p1].width - I2.ports[p2].width) > 1e-12 * I1.ports[p1].width:
        raise ValueError("interface widths differ")
    D = np.diag(coupling.parity_diagonal(I1.ports[p1]))
    r1 = [p for p in range(I1.n_ports) if p != p1]
    r2 = [p for p in range(I2.n_ports) if p != p2]
    e1 = np.concatenate([np.arange(I1.offsets[p], I1.offsets[p + 1]) for p in r1]).astype(int) if r1 else np.zeros(0, int)
    e2 = np.concatenate([np.arange(I2.offsets[p], I2.offsets[p + 1]) for p in r2]).astype(int) if r2 else np.zeros(0, int)
    s1 = np.arange(I1.offsets[p1], I1.offsets[p1 + 1])
    s2 = np.arange(I2.offsets[p2], I2.offsets[p2 + 1])
    A = I1.matrix
    B = I2.matrix
    P1, Q1, R1, T1 = A[np.ix_(e1, e1)], A[np.ix_(e1, s1)], A[np.ix_(s1, e1)], A[np.ix_(s1, s1)]
    P2, Q2, R2, T2 = B[np.ix_(e2, e2)], B[np.ix_(e2, s2)], B[np.ix_(s2, e2)], B[np.ix_(s2, s2)]
    eye = np.eye(M)
    # unknowns [h_+; h_-]:  h_- - T1 h_+ = R1 f1,   D h_+ - T2 D h_- = -R2 f2
    K = np.block([[-T1, eye], [D, -T2 @ D]])
    rhs = np.block([[R1, np.zeros((M, len(e2)))], [np.zeros((M, len(e1))), -R2]])
    try:
        with warnings.catch_warnings():
            # an exactly singular block is reported below as a GlueError
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(K, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover - defensive
        raise GlueError(f"interface block could not be factorized: {exc}") from exc
    if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * np.max(np.abs(K)):
        raise GlueError(f"singular interface block (cond ~ {np.linalg.cond(K):.2e})")
    H = scipy.linalg.lu_solve(lu, rhs)
    hp, hm = H[:M], H[M:]
    top = np.hstack([P1, np.zeros((len(e1), len(e2)))]) + Q1 @ hp
    bot = np.hstack([np.zeros((len(e2), len(e1))), P2]) - Q2 @ D @ hm
    mat = np.vstack([top, bot])
    return I2IMap(
        [I1.ports[p] for p in r1] + [I2.ports[p] for p in r2],
        [I1.counts[p] for p in r1] + [I2.counts[p] for p in r2],
        mat,
        I1.eta,
        "merged",
        [I1.names[p] for p in r1] + [I2.names[p] for p in r2],
    )


@dataclass
class GlueSystem:
    """Sparse block system coupling component maps through interface unknowns.

    With interface unknowns ``h`` (per interface ``[h_+; h_-]``) and external
    incoming data ``f``, the interface rows read ``C_h h + C_f f = 0`` and the
    external rows give ``g = E_f f + E_h h``.  Its Schur complement
    ``E_f - E_h C_h^{-1} C_f`` is the map of the whole device.
    """

    graph: CircuitGraph
    C_h: scipy.sparse.csc_matrix
    C_f: np.ndarray
    E_f: np.ndarray
    E_h: scipy.sparse.csr_matrix
    h_offsets: np.ndarray
    f_offsets: np.ndarray
    ext_ports: list
    ext_counts: list
    eta: complex
    _lu: object = field(default=None, repr=False)
    timings: dict = field(default_factory=dict)

    @property
    def n_interface_unknowns(self) -> int:
        return self.C_h.shape[0]

    @property
    def shape(self):
        n = self.C_h.shape[0] + self.E_f.shape[0]
        return (n, n)

    def factor(self):
        if self._lu is None and self.C_h.shape[0]:
            t = time.perf_counter()
            try:
                self._lu = scipy.sparse.linalg.splu(self.C_h.tocsc())
            except RuntimeError as exc:
                raise GlueError(f"singular interface block: {exc}") from exc
            self.timings["factor"] = time.perf_counter() - t
        return self._lu

    def interface_data(self, f) -> np.ndarray:
        """Interface unknowns for external incoming data ``f`` (vector or matrix)."""
        if self.C_h.shape[0] == 0:
            return np.zeros((0,) + np.shape(f)[1:], dtype=complex)
        lu = self.factor()
        rhs = -(self.C_f @ np.asarray(f, dtype=complex))
        return lu.solve(np.asarray(rhs, dtype=complex))

    def interface_split(self, h, e: int):
        """``(h_+, h_-)`` of interface ``e`` from the stacked interface vector."""
        o = self.h_offsets[e]
        M = (self.h_offsets[e + 1] - o) // 2
        return h[o : o + M], h[o + M : o + 2 * M]

    def matrix(self) -> scipy.sparse.csr_matrix:
        """The full block matrix ``[[C_h, C_f], [E_h, E_f - I]]`` (for inspection)."""
        n_f = self.E_f.shape[0]
        return scipy.sparse.bmat(
            [
                [self.C_h, scipy.sparse.csr_matrix(self.C_f)],
                [self.E_h, scipy.sparse.csr_matrix(self.E_f - np.eye(n_f))],
            ]
        ).tocsr()


def assemble_graph_system(graph: CircuitGraph, maps) -> GlueSystem:
    """Build the sparse interface system for a circuit graph.

    ``maps[j]`` is the map of component ``j`` with ports in the component's
    port order.  Interface ``e`` contributes ``2 M_e`` unknowns and the
    ``M_e`` rows of each of its two sides (owner first).
    """
    if len(maps) != graph.n_components:
        raise ValueError("one impedance-to-impedance map per component is required")
    for j, m in enumerate(maps):
        if m is None:
            raise ValueError(f"missing map for component {j}")
    eta = maps[0].eta if maps else -0.2
    h_sizes = [2 * e.modes for e in graph.interfaces]
    h_off = np.concatenate([[0], np.cumsum(h_sizes)]).astype(int)
    ext_counts = []
    for x in graph.externals:
        ext_counts.append(maps[x.comp].counts[x.port])
    f_off = np.concatenate([[0], np.cumsum(ext_counts)]).astype(int)
    nh, nf = int(h_off[-1]), int(f_off[-1])

    # row offsets of each interface side inside C
    row_of = {}
    for e, itf in enumerate(graph.interfaces):
        for side, (c, p) in enumerate(((itf.a, itf.port_a), (itf.b, itf.port_b))):
            if maps[c].counts[p] != itf.modes:
                raise ValueError(
                    f"interface {e}: component {c} carries {maps[c].counts[p]} modes, interface needs {itf.modes}"
                )
            row_of[(c, p)] = h_off[e] + side * itf.modes

    Ci, Cj, Cv = [], [], []
    Ei, Ej, Ev = [], [], []
    C_f = np.zeros((nh, nf), dtype=complex)
    E_f = np.zeros((nf, nf), dtype=complex)
    par = [parity(itf.spec, itf.modes) for itf in graph.interfaces]
    roles = {}
    for c in range(graph.n_components):
        for p in range(maps[c].n_ports):
            roles[(c, p)] = graph.port_role(c, p)

    def add_sparse(I, J, V, r0, c0, block):
        rr, cc = np.nonzero(block)
        I.extend((rr + r0).tolist())
        J.extend((cc + c0).tolist())
        V.extend(block[rr, cc].tolist())

    for c in range(graph.n_components):
        Imap = maps[c]
        for p in range(Imap.n_ports):
            role, idx = roles[(c, p)]
            # output side of this row block
            if role == "external":
                rows_dense = True
                r0 = f_off[idx]
            else:
                rows_dense = False
                r0 = row_of[(c, p)]
                M = graph.interfaces[idx].modes
                e0 = h_off[idx]
                if role == "owner":  # emits h_-
                    add_sparse(Ci, Cj, Cv, r0, e0 + M, np.eye(M))
                else:  # emits -D h_+
                    add_sparse(Ci, Cj, Cv, r0, e0, -np.diag(par[idx]))
            for q in range(Imap.n_ports):
                blk = Imap.block(p, q)
                qrole, qidx = roles[(c, q)]
                if qrole == "external":
                    if rows_dense:
                        E_f[r0 : r0 + blk.shape[0], f_off[qidx] : f_off[qidx] + blk.shape[1]] += blk
                    else:
                        C_f[r0 : r0 + blk.shape[0], f_off[qidx] : f_off[qidx] + blk.shape[1]] -= blk
                    continue
                Mq = graph.interfaces[qidx].modes
                eq = h_off[qidx]
                if qrole == "owner":  # receives h_+
                    col0, colblk = eq, blk
                else:  # receives -D h_-
                    col0, colblk = eq + Mq, -blk * par[qidx][None, :]
                if rows_dense:
                    add_sparse(Ei, Ej, Ev, r0, col0, colblk)
                else:
                    add_sparse(Ci, Cj, Cv, r0, col0, -colblk)
    C_h = scipy.sparse.csc_matrix((Cv, (Ci, Cj)), shape=(nh, nh), dtype=complex)
    E_h = scipy.sparse.csr_matrix((Ev, (Ei, Ej)), shape=(nf, nh), dtype=complex)
    ext_ports = [x.spec for x in graph.externals]
    return GlueSystem(graph, C_h, C_f, E_f, E_h, h_off, f_off, ext_ports, ext_counts, complex(eta))


def schur_reduce(sys: GlueSystem, names=None) -> I2IMap:
    """Map of the whole device over its external ports (sparse interface elimination)."""
    t = time.perf_counter()
    if sys.C_h.shape[0]:
        X = sys.interface_data(np.eye(sys.E_f.shape[0]))  # = -C_h^{-1} C_f
        mat = sys.E_f + sys.E_h @ X
    else:
        mat = sys.E_f.copy()
    sys.timings["schur"] = time.perf_counter() - t
    names = names or [f"ext{j}" for j in range(len(sys.ext_ports))]
    return I2IMap(sys.ext_ports, sys.ext_counts, mat, sys.eta, "merged", names)


# ---------------------------------------------------------------------------
# scattering matrix


@dataclass
class ScatteringResult:
    """Device scattering matrix over propagating modes.

    ``S`` maps incoming propagating coefficients ``c_-`` to outgoing ones;
    ``F`` maps ``c_-`` to the incoming impedance data on every retained
    external mode; ``d_plus``/``d_minus`` are ``i (beta +- eta)``.
    """

    S: np.ndarray
    F: np.ndarray
    d_plus: np.ndarray
    d_minus: np.ndarray
    beta: np.ndarray
    port_modes: list  # (port, m) per row of S
    retained: list  # retained external mode counts
    eta: complex
    names: list = field(default_factory=list)

    def flux_residual(self) -> float:
        """``||S* B S - B|| / ||B||`` with ``B = diag(beta)``."""
        B = np.diag(self.beta.real)
        return float(np.linalg.norm(self.S.conj().T @ B @ self.S - B, 2) / np.linalg.norm(B, 2))

    def reciprocity_deviation(self) -> float:
        """``||B S - (B S)^T|| / ||B||``; a diagnostic, zero for reciprocal devices."""
        BS = self.beta.real[:, None] * self.S
        return float(np.linalg.norm(BS - BS.T, 2) / max(np.max(np.abs(self.beta)), np.finfo(float).tiny))

    def unitarity_deviation(self) -> float:
        """Largest distance of a singular value of ``B^{1/2} S B^{-1/2}`` from 1."""
        sb = np.sqrt(self.beta.real)
        sv = np.linalg.svd(sb[:, None] * self.S / sb[None, :], compute_uv=False)
        return float(np.max(np.abs(sv - 1.0))) if sv.size else 0.0

    def to_dict(self) -> dict:
        def cplx(a):
            return [[z.real, z.imag] for z in np.asarray(a).ravel()]

        return {
            "format": "wgscat-smatrix",
            "version": 1,
            "eta": [self.eta.real, self.eta.imag],
            "names": list(self.names),
            "port_modes": [list(map(int, pm)) for pm in self.port_modes],
            "retained": list(map(int, self.retained)),
            "beta": self.beta.real.tolist(),
            "S_shape": list(self.S.shape),
            "S": cplx(self.S),
            "F_shape": list(self.F.shape),
            "F": cplx(self.F),
            "flux_residual": self.flux_residual(),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "ScatteringResult":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        d = json.loads(text)

        def arr(key, shape):
            e = np.asarray(d[key], dtype=float)
            return (e[:, 0] + 1j * e[:, 1]).reshape(shape) if e.size else np.zeros(shape, dtype=complex)

        eta = complex(*d["eta"])
        beta = np.asarray(d["beta"], dtype=float)
        return cls(
            arr("S", d["S_shape"]),
            arr("F", d["F_shape"]),
            1j * (beta + eta),
            1j * (beta - eta),
            beta,
            [tuple(pm) for pm in d["port_modes"]],
            d["retained"],
            eta,
            d.get("names", []),
        )


def _closure(Itrunc: I2IMap, closure: str):
    """Split external modes into propagating and evanescent and close the latter.

    ``closure="semi_infinite"`` attaches an infinitely long straight channel
    to each port, in which an evanescent mode can only decay outward
    (``c_- = 0``), i.e. ``g_e = (beta - eta)/(beta + eta) f_e``.
    ``closure="truncate"`` simply drops the evanescent rows and columns.
    Returns ``(I_eff, prop_idx, evan_idx, R)`` where ``f_e = R f_p``.
    """
    prop, evan, port_modes, beta_p, beta_e = [], [], [], [], []
    eta = Itrunc.eta
    for p, spec in enumerate(Itrunc.ports):
        mp = count_propagating(spec)
        if Itrunc.counts[p] < mp:
            raise ValueError(f"port {p} retains fewer modes than it propagates")
        b = betas(spec, Itrunc.counts[p])
        for m in range(Itrunc.counts[p]):
            idx = Itrunc.offsets[p] + m
            if m < mp:
                prop.append(idx)
                port_modes.append((p, m + 1))
                beta_p.append(b[m])
            else:
                evan.append(idx)
                beta_e.append(b[m])
    prop = np.array(prop, dtype=int)
    evan = np.array(evan, dtype=int)
    A = Itrunc.matrix
    App = A[np.ix_(prop, prop)]
    if closure == "truncate" or evan.size == 0:
        return App, prop, evan, np.zeros((evan.size, prop.size), dtype=complex), port_modes, np.array(beta_p)
    if closure != "semi_infinite":
        raise ValueError(f"unknown closure {closure!r}")
    be = np.array(beta_e)
    Re = np.diag((be - eta) / (be + eta))
    Aep = A[np.ix_(evan, prop)]
    Aee = A[np.ix_(evan, evan)]
    Ape = A[np.ix_(prop, evan)]
    R = np.linalg.solve(Re - Aee, Aep)
    return App + Ape @ R, prop, evan, R, port_modes, np.array(beta_p)


def scattering_matrix(Itrunc: I2IMap, eta=None, closure: str = "semi_infinite") -> ScatteringResult:
    """Scattering matrix of a device from its map over external ports.

    Solves ``[D_+ -I; D_- -I_p] [S; F] = [D_-; D_+]`` over propagating modes,
    with ``I_p`` the map after closing the retained evanescent modes.
    """
    eta = Itrunc.eta if eta is None else complex(eta)
    if abs(eta - Itrunc.eta) > 1e-15:
        raise ValueError("eta differs from the one the map was computed with")
    Ip, prop, evan, R, port_modes, beta_p = _closure(Itrunc, closure)
    n = prop.size
    dp = 1j * (beta_p + eta)
    dm = 1j * (beta_p - eta)
    K = np.block([[np.diag(dp), -np.eye(n)], [np.diag(dm), -Ip]])
    rhs = np.vstack([np.diag(dm), np.diag(dp)])
    cond = np.linalg.cond(K) if n else 1.0
    if not np.isfinite(cond) or cond > 1e14:
        raise GlueError(f"scattering system is singular (cond {cond:.2e}); check upstream maps")
    X = np.linalg.solve(K, rhs) if n else np.zeros((0, 0), dtype=complex)
    S, Fp = X[:n], X[n:]
    # incoming impedance data on all retained external modes
    F = np.zeros((sum(Itrunc.counts), n), dtype=complex)
    F[prop] = Fp
    if evan.size:
        F[evan] = R @ Fp
    return ScatteringResult(S, F, dp, dm, beta_p.real, port_modes, list(Itrunc.counts), eta, list(Itrunc.names))


def solve_incident(sys: GlueSystem | None, Itrunc: I2IMap, eta, c_minus, result: ScatteringResult | None = None):
    """Outgoing coefficients, external impedance data and interface data for incoming ``c_-``.

    ``c_minus`` is a vector over the propagating external modes (or a
    :class:`~wgscat.modal.ModeCoefficients`).
    """
    res = result if result is not None else scattering_matrix(Itrunc, eta)
    c = np.asarray(c_minus.vector() if hasattr(c_minus, "vector") else c_minus, dtype=complex)
    if c.shape[0] != res.S.shape[1]:
        raise ValueError(f"c_minus has {c.shape[0]} entries, the device has {res.S.shape[1]} propagating modes")
    c_plus = res.S @ c
    f = res.F @ c
    h = sys.interface_data(f) if sys is not None else np.zeros(0, dtype=complex)
    g = Itrunc.matrix @ f
    return {"c_plus": c_plus, "f": f, "g": g, "h": h, "result": res}
