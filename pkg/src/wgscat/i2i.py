"""Truncated impedance-to-impedance maps.

An :class:`I2IMap` takes the modal coefficients of the incoming impedance
data ``f = du/dn + i eta u`` on every port of a component to those of the
outgoing data ``g = du/dn - i eta u``.  Port ``p`` contributes ``counts[p]``
modes; rows and columns are grouped port by port, modes ascending.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry.component import ComponentGeometry
from .geometry.panels import Discretization, PanelOptions, panelize
from .modal import PortSpec, betas, parity
from .solver import DEFAULT_ETA, BieSystem, assemble, eval_impedance_trace, port_rhs, solve

PROVENANCES = ("bie", "analytic", "monolithic", "merged")


@dataclass
class I2IMap:
    ports: list
    counts: list
    matrix: np.ndarray
    eta: complex
    provenance: str = "bie"
    names: list | None = None
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.counts = [int(c) for c in self.counts]
        self.matrix = np.asarray(self.matrix, dtype=complex)
        self.eta = complex(self.eta)
        if self.names is None:
            self.names = [f"p{j}" for j in range(len(self.ports))]
        self.names = list(self.names)
        if len(self.ports) != len(self.counts) or len(self.names) != len(self.ports):
            raise ValueError("ports, counts and names must have equal length")
        n = sum(self.counts)
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match mode counts {self.counts}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("impedance-to-impedance map has non-finite entries")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        self.offsets = np.concatenate([[0], np.cumsum(self.counts)]).astype(int)

    @property
    def n_ports(self) -> int:
        return len(self.ports)

    def slice(self, p: int) -> slice:
        return slice(self.offsets[p], self.offsets[p + 1])

    def block(self, q: int, p: int) -> np.ndarray:
        """Block mapping incoming data on port ``p`` to outgoing data on port ``q``."""
        return self.matrix[self.slice(q), self.slice(p)]

    def apply(self, f) -> np.ndarray:
        return self.matrix @ np.asarray(f, dtype=complex)

    def reordered(self, order) -> "I2IMap":
        """The same map with ports listed in ``order``."""
        order = list(order)
        idx = np.concatenate([np.arange(self.offsets[p], self.offsets[p + 1]) for p in order]).astype(int)
        return I2IMap(
            [self.ports[p] for p in order],
            [self.counts[p] for p in order],
            self.matrix[np.ix_(idx, idx)],
            self.eta,
            self.provenance,
            [self.names[p] for p in order],
        )

    def truncated(self, counts) -> "I2IMap":
        """Keep only the first ``counts[p]`` modes of every port."""
        counts = [int(c) for c in counts]
        if any(c > m for c, m in zip(counts, self.counts)):
            raise ValueError("cannot truncate to more modes than the map holds")
        idx = np.concatenate([np.arange(self.offsets[p], self.offsets[p] + c) for p, c in enumerate(counts)])
        idx = idx.astype(int)
        return I2IMap(self.ports, counts, self.matrix[np.ix_(idx, idx)], self.eta, self.provenance, self.names)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "wgscat-i2i",
            "version": 1,
            "eta": [self.eta.real, self.eta.imag],
            "provenance": self.provenance,
            "ports": [
                {
                    "name": name,
                    "modes": count,
                    "width": spec.width,
                    "bc": spec.bc,
                    "k": spec.k,
                    "origin": list(spec.origin),
                    "tangent": list(spec.tangent),
                    "axis": list(spec.axis),
                }
                for name, count, spec in zip(self.names, self.counts, self.ports)
            ],
            "shape": list(self.matrix.shape),
            "entries": [[z.real, z.imag] for z in self.matrix.ravel()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "I2IMap":
        if data.get("format") != "wgscat-i2i":
            raise ValueError("not an impedance-to-impedance map document")
        ports = [
            PortSpec(p["width"], p["bc"], p["k"], tuple(p["origin"]), tuple(p["tangent"]), tuple(p["axis"]))
            for p in data["ports"]
        ]
        ent = np.asarray(data["entries"], dtype=float)
        mat = (ent[:, 0] + 1j * ent[:, 1]).reshape(data["shape"])
        return cls(
            ports,
            [p["modes"] for p in data["ports"]],
            mat,
            complex(*data["eta"]),
            data["provenance"],
            [p["name"] for p in data["ports"]],
        )

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "I2IMap":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def compute_i2i(comp: ComponentGeometry, disc: Discretization | None = None, eta=DEFAULT_ETA, counts=None,
                system: BieSystem | None = None, provenance: str = "bie") -> I2IMap:
    """Impedance-to-impedance map of one component from its boundary integral solves.

    Column ``(p, m)`` is the outgoing trace on every port when the incoming
    data is ``b_m`` on port ``p`` and zero elsewhere; all columns share one
    factorization.
    """
    if system is None:
        if disc is None:
            disc = panelize(comp, PanelOptions(mode_counts=counts))
        system = assemble(disc, eta)
    disc = system.disc
    counts = list(disc.mode_counts if counts is None else counts)
    if len(counts) != len(comp.ports):
        raise ValueError("one mode count per port is required")
    cols = []
    for p, m_p in enumerate(counts):
        for m in range(m_p):
            e = np.zeros(m_p, dtype=complex)
            e[m] = 1.0
            cols.append(port_rhs(system, p, e))
    if not cols:
        return I2IMap([], [], np.zeros((0, 0)), system.eta, provenance, [])
    rhs = np.stack(cols, axis=1)
    dens = solve(system, rhs)
    blocks = [eval_impedance_trace(system, dens, q, -1, counts[q]) for q in range(len(comp.ports))]
    return I2IMap(list(comp.ports), counts, np.concatenate(blocks, axis=0), system.eta, provenance,
                  comp.port_names())


def channel_blocks(spec: PortSpec, length: float, eta, count: int):
    """Per-mode 2x2 maps of a straight channel, returned as the four diagonals ``(T_AA, T_AB, T_BA, T_BB)``.

    Port A is the cross-section described by ``spec`` and port B lies a
    distance ``length`` down the channel (along ``-spec.axis``).  Each mode
    is written ``a e^{i beta x} + b e^{i beta (L - x)}`` with ``x`` measured
    from A, which keeps every exponential bounded for evanescent modes.
    """
    if not length > 0:
        raise ValueError("channel length must be positive")
    eta = complex(eta)
    b = betas(spec, count)
    D = parity(spec, count)
    E = np.exp(1j * b * length)
    ib = 1j * b
    ie = 1j * eta
    # incoming data at A and B as a function of (a, b)
    F = np.empty((count, 2, 2), dtype=complex)
    F[:, 0, 0] = D * (-ib + ie)
    F[:, 0, 1] = D * (ib + ie) * E
    F[:, 1, 0] = (ib + ie) * E
    F[:, 1, 1] = -ib + ie
    G = np.empty_like(F)
    G[:, 0, 0] = D * (-ib - ie)
    G[:, 0, 1] = D * (ib - ie) * E
    G[:, 1, 0] = (ib - ie) * E
    G[:, 1, 1] = -ib - ie
    T = G @ np.linalg.inv(F)
    return T[:, 0, 0], T[:, 0, 1], T[:, 1, 0], T[:, 1, 1]


def far_port(spec: PortSpec, length: float) -> PortSpec:
    """Frame of the cross-section a distance ``length`` down the channel from ``spec``."""
    o = np.asarray(spec.origin) - length * np.asarray(spec.axis)
    return PortSpec(spec.width, spec.bc, spec.k, tuple(o), tuple(-np.asarray(spec.tangent)),
                    tuple(-np.asarray(spec.axis)))


def channel_i2i_analytic(spec: PortSpec, length: float, eta=DEFAULT_ETA, count: int = 1, names=("A", "B")) -> I2IMap:
    """Exact truncated map of a straight channel of the given length (ports A then B)."""
    taa, tab, tba, tbb = channel_blocks(spec, length, eta, count)
    mat = np.block([[np.diag(taa), np.diag(tab)], [np.diag(tba), np.diag(tbb)]])
    return I2IMap([spec, far_port(spec, length)], [count, count], mat, eta, "analytic", list(names))


def monolithic_i2i(comp: ComponentGeometry, opts: PanelOptions | None = None, eta=DEFAULT_ETA,
                   counts=None) -> I2IMap:
    """Map of a whole sub-assembly discretized as one component (merge oracle)."""
    if opts is None:
        opts = PanelOptions(mode_counts=counts)
    elif counts is not None:
        opts = dataclasses.replace(opts, mode_counts=tuple(counts))
    disc = panelize(comp, opts)
    return compute_i2i(comp, disc, eta, provenance="monolithic")
