"""Quasi-static incremental analysis with a full Newton-Raphson solver.

Global scalar nodes are numbered vertices first, then the interior nodes of
every mesh edge (shared by its two cells), then the interior moments of each
cell. Vector dof ``2 * node + c`` holds component ``c``. Constrained dofs are
eliminated: their values are written into the displacement vector at the start
of each step and they never enter the linear system.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from polyvem.materials import Material, MaterialError, MaterialState
from polyvem.mesh import PolygonalMesh
from polyvem.quadrature import gauss_lobatto_01
from polyvem.vem import (
    ElementOperators,
    alpha_scaling,
    body_load_vector,
    build_dof_layout,
    build_projection,
    internal_force_kernel,
    traction_load_vector,
)

log = logging.getLogger(__name__)

CHANNELS = ("load", "displacement", "temperature")


class ConfigError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, step=None, residuals=()):
        super().__init__(message)
        self.step = step
        self.residuals = list(residuals)


# -- load program ---------------------------------------------------------------


@dataclass(frozen=True)
class LoadProgram:
    """Piecewise-linear scaling of loads, imposed displacements and temperature.

    ``times`` are branch endpoints, ``increments[b]`` the number of equal steps
    on branch ``b``. ``channels`` give the value of each channel at every
    endpoint. A missing ``load`` or ``displacement`` channel ramps linearly
    from 0 to 1 over the whole program; a missing ``temperature`` is 0.
    """

    times: tuple[float, ...]
    increments: tuple[int, ...]
    channels: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ConfigError("load program times must be strictly increasing with at least 2 entries")
        if len(self.increments) != len(t) - 1 or any(int(n) < 1 for n in self.increments):
            raise ConfigError("need one positive increment count per branch")
        for name, vals in self.channels.items():
            if name not in CHANNELS:
                raise ConfigError(f"unknown load channel {name!r}; expected one of {CHANNELS}")
            if len(vals) != len(t):
                raise ConfigError(f"channel {name!r} needs {len(t)} values, got {len(vals)}")

    @classmethod
    def proportional(cls, n_steps: int, t_end: float = 1.0) -> "LoadProgram":
        """Single branch: every channel scales as (n / N)."""
        return cls((0.0, float(t_end)), (int(n_steps),))

    @property
    def n_steps(self) -> int:
        return int(sum(self.increments))

    def step_times(self) -> np.ndarray:
        out = []
        for b, n in enumerate(self.increments):
            t0, t1 = self.times[b], self.times[b + 1]
            out.extend(t0 + (t1 - t0) * j / n for j in range(1, n + 1))
        return np.array(out)

    def value(self, channel: str, t: float) -> float:
        if channel in self.channels:
            return float(np.interp(t, self.times, self.channels[channel]))
        if channel == "temperature":
            return 0.0
        return (t - self.times[0]) / (self.times[-1] - self.times[0])


# -- boundary conditions ----------------------------------------------------------


@dataclass(frozen=True)
class DirichletBC:
    """Component ``component`` (0 = x, 1 = y) on ``tag`` equals value * channel(t).

    ``field(points) -> (n,)`` replaces the constant ``value`` with nodal values.
    """

    tag: str
    component: int
    value: float = 0.0
    channel: str = "displacement"
    field: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class TractionBC:
    """Traction on ``tag``: constant ``vector`` or ``pressure`` (q = -p n), scaled by channel(t)."""

    tag: str
    vector: tuple[float, float] | None = None
    pressure: float | None = None
    channel: str = "load"

    def __post_init__(self):
        if (self.vector is None) == (self.pressure is None):
            raise ConfigError(f"traction on {self.tag!r} needs exactly one of vector or pressure")


@dataclass(frozen=True)
class Probe:
    name: str
    point: tuple[float, float]


@dataclass(frozen=True)
class NewtonSettings:
    tol_rel: float = 1e-8
    tol_abs: float = 1e-10
    max_iter: int = 25
    line_search: bool = False
    ls_eta: float = 0.8
    ls_max: int = 12

    def __post_init__(self):
        if not (self.tol_rel > 0 and self.tol_abs > 0 and self.max_iter >= 1):
            raise ConfigError("Newton tolerances must be positive and max_iter >= 1")
        if not (0.0 < self.ls_eta < 1.0 and self.ls_max >= 1):
            raise ConfigError("ls_eta must lie in (0, 1) and ls_max >= 1")


@dataclass(frozen=True)
class AnalysisConfig:
    k: int
    program: LoadProgram
    dirichlet: tuple[DirichletBC, ...] = ()
    tractions: tuple[TractionBC, ...] = ()
    body_force: tuple[float, float] | None = None
    probes: tuple[Probe, ...] = ()
    newton: NewtonSettings = NewtonSettings()


@dataclass
class StepRecord:
    step: int
    time: float
    load_factor: float
    probes: dict[str, tuple[float, float]]
    reactions: dict[str, tuple[float, float]]
    iterations: int
    residuals: list[float]


# -- global system -------------------------------------------------------------------


@dataclass
class _Group:
    """Elements sharing one operator shape, processed in a single batch."""

    cells: np.ndarray      # (ne,)
    dofs: np.ndarray       # (ne, nd) global dofs
    B: np.ndarray          # (ne, nq, 3, nd)
    w: np.ndarray          # (ne, nq)
    S: np.ndarray          # (ne, nd, nd)
    points: np.ndarray     # (ne, nq) indices into the point bank
    Bc: np.ndarray         # (ne, 3, nd) strain map at the centroid
    centroids: np.ndarray  # (ne,) centroid point indices
    keep: np.ndarray       # flat mask of free-free entries of (ne, nd, nd)
    slot: np.ndarray       # CSR slot of every kept entry
    keep_c: np.ndarray     # same for the free-constrained coupling block
    slot_c: np.ndarray


class GlobalSystem:
    """Discrete problem on one mesh, one material and one order ``k``.

    Holds the dof map, element operators, the committed state bank and the
    fixed sparsity pattern of the reduced tangent.
    """

    def __init__(self, mesh: PolygonalMesh, material: Material, k: int):
        self.mesh = mesh
        self.material = material
        self.k = k
        self._number_nodes()
        self._build_elements()
        self.n_points = self.n_quad_points + mesh.n_cells
        self.state = material.initial_state(self.n_points)
        self.eps_n = np.zeros((self.n_points, 3))
        self.u = np.zeros(self.n_dof)
        self.time = 0.0
        alpha0 = alpha_scaling(material.elastic_tangent(), 1)
        self.alpha = np.array([alpha0 / len(c) for c in mesh.cells])
        self.constrained = np.zeros(self.n_dof, dtype=bool)
        # running max of the force norms; sets the absolute Newton tolerance
        self.force_scale = 1e-300

    # numbering ---------------------------------------------------------------

    def _number_nodes(self):
        mesh, k = self.mesh, self.k
        nv = mesh.n_vertices
        self.edge_index = {e: i for i, e in enumerate(sorted(mesh.edges()))}
        n_edge_nodes = (k - 1) * len(self.edge_index)
        n_mom = k * (k - 1) // 2
        self.n_nodes = nv + n_edge_nodes
        self.n_scalar = self.n_nodes + n_mom * mesh.n_cells
        self.n_dof = 2 * self.n_scalar

        coords = np.zeros((self.n_nodes, 2))
        coords[:nv] = mesh.vertices
        t = gauss_lobatto_01(k + 1)[1:-1]
        for (a, b), e in self.edge_index.items():
            base = nv + e * (k - 1)
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            coords[base:base + k - 1] = pa + np.outer(t, pb - pa)
        self.node_coords = coords

    def edge_nodes(self, a: int, b: int) -> list[int]:
        """Scalar node indices along the edge a -> b, endpoints included."""
        k = self.k
        key = (min(a, b), max(a, b))
        base = self.mesh.n_vertices + self.edge_index[key] * (k - 1)
        inner = list(range(base, base + k - 1))
        if a > b:
            inner.reverse()
        return [a] + inner + [b]

    def cell_scalar_dofs(self, cell: int) -> np.ndarray:
        loop = self.mesh.cells[cell]
        m = len(loop)
        out = []
        for i in range(m):
            out.extend(self.edge_nodes(loop[i], loop[(i + 1) % m])[:-1])
        n_mom = self.k * (self.k - 1) // 2
        start = self.n_nodes + cell * n_mom
        out.extend(range(start, start + n_mom))
        return np.array(out, dtype=np.int64)

    def cell_dofs(self, cell: int) -> np.ndarray:
        s = self.cell_scalar_dofs(cell)
        return np.column_stack([2 * s, 2 * s + 1]).reshape(-1)

    # elements -----------------------------------------------------------------

    def _build_elements(self):
        mesh = self.mesh
        self.operators: list[ElementOperators] = []
        by_shape: dict[tuple, list[int]] = {}
        for c in range(mesh.n_cells):
            g = mesh.element_geometry(c)
            ops = build_projection(g, build_dof_layout(g, self.k), cell=c)
            self.operators.append(ops)
            by_shape.setdefault((ops.n_dof, len(ops.quad)), []).append(c)
        self.groups: list[_Group] = []
        offset = 0
        self.point_cell = np.empty(0, dtype=np.int64)
        owners = []
        for (nd, nq), cells in sorted(by_shape.items()):
            cells = np.array(cells)
            ne = len(cells)
            pts = offset + np.arange(ne * nq).reshape(ne, nq)
            offset += ne * nq
            owners.append(np.repeat(cells, nq))
            self.groups.append(_Group(
                cells=cells,
                dofs=np.stack([self.cell_dofs(c) for c in cells]),
                B=np.stack([self.operators[c].B for c in cells]),
                w=np.stack([self.operators[c].quad.weights for c in cells]),
                S=np.stack([self.operators[c].S for c in cells]),
                points=pts,
                Bc=np.stack([self.operators[c].B_centroid for c in cells]),
                centroids=np.empty(0, dtype=np.int64),
                keep=np.empty(0, dtype=bool),
                slot=np.empty(0, dtype=np.int64),
                keep_c=np.empty(0, dtype=bool),
                slot_c=np.empty(0, dtype=np.int64),
            ))
        self.n_quad_points = offset
        self.centroid_points = offset + np.arange(mesh.n_cells)
        self.point_cell = np.concatenate(owners + [np.arange(mesh.n_cells)])
        for g in self.groups:
            g.centroids = self.centroid_points[g.cells]

    # constraints and sparsity ---------------------------------------------------

    def set_constrained(self, mask: np.ndarray):
        self.constrained = np.asarray(mask, dtype=bool).copy()
        self.free = np.flatnonzero(~self.constrained)
        self.fixed = np.flatnonzero(self.constrained)
        eq = np.full(self.n_dof, -1, dtype=np.int64)
        eq[self.free] = np.arange(len(self.free))
        ceq = np.full(self.n_dof, -1, dtype=np.int64)
        ceq[self.fixed] = np.arange(len(self.fixed))
        self.eq = eq
        self.nnz, self.csr_indices, self.csr_indptr = self._pattern(eq, eq, "keep", "slot")
        self.nnz_c, self.csr_c_indices, self.csr_c_indptr = self._pattern(eq, ceq, "keep_c", "slot_c")

    def _pattern(self, row_eq, col_eq, keep_attr, slot_attr):
        """CSR structure of the block with rows ``row_eq >= 0`` and columns ``col_eq >= 0``."""
        nr, nc = int(row_eq.max()) + 1, max(int(col_eq.max()) + 1, 1)
        keys = []
        for g in self.groups:
            r = row_eq[g.dofs]
            c = col_eq[g.dofs]
            nd = r.shape[1]
            rr = np.broadcast_to(r[:, :, None], (len(r), nd, nd)).reshape(-1)
            cc = np.broadcast_to(c[:, None, :], (len(c), nd, nd)).reshape(-1)
            keep = (rr >= 0) & (cc >= 0)
            setattr(g, keep_attr, keep)
            keys.append(rr[keep] * nc + cc[keep])
        allkeys = np.concatenate(keys) if keys else np.empty(0, dtype=np.int64)
        uniq, inv = np.unique(allkeys, return_inverse=True)
        pos = 0
        for g, kk in zip(self.groups, keys):
            setattr(g, slot_attr, inv[pos:pos + len(kk)])
            pos += len(kk)
        rows = uniq // nc
        indices = (uniq % nc).astype(np.int64)
        indptr = np.searchsorted(rows, np.arange(max(nr, 0) + 1)).astype(np.int64)
        return len(uniq), indices, indptr

    # assembly ---------------------------------------------------------------------

    def point_strains(self, u: np.ndarray) -> np.ndarray:
        eps = np.empty((self.n_points, 3))
        for g in self.groups:
            ue = u[g.dofs]
            eps[g.points.reshape(-1)] = np.einsum("eqin,en->eqi", g.B, ue).reshape(-1, 3)
            eps[g.centroids] = np.einsum("ein,en->ei", g.Bc, ue)
        return eps

    def assemble(self, u: np.ndarray, dt: float, temperature: float, coupling: bool = False):
        """Internal force (full length), reduced tangent (CSR) and trial update.

        With ``coupling`` the free-constrained tangent block is appended to the
        returned tuple. Raises :class:`MaterialError` with the offending cells
        appended to the message.
        """
        eps = self.point_strains(u)
        try:
            res = self.material.update(self.state, self.eps_n, eps, dt, temperature)
        except MaterialError as exc:
            cells = sorted(set(self.point_cell[exc.points].tolist()))
            raise MaterialError(f"{exc} (cells {cells[:10]})", exc.points) from None
        f = np.zeros(self.n_dof)
        data = np.zeros(self.nnz)
        data_c = np.zeros(self.nnz_c) if coupling else None
        for g in self.groups:
            pts = g.points
            fe, Ke = internal_force_kernel(
                g.B, g.w, res.sigma[pts], res.tangent[pts], g.S, self.alpha[g.cells], u[g.dofs])
            np.add.at(f, g.dofs.reshape(-1), fe.reshape(-1))
            flat = Ke.reshape(-1)
            data += np.bincount(g.slot, weights=flat[g.keep], minlength=self.nnz)
            if coupling:
                data_c += np.bincount(g.slot_c, weights=flat[g.keep_c], minlength=self.nnz_c)
        nf = len(self.free)
        K = sp.csr_matrix((data, self.csr_indices, self.csr_indptr), shape=(nf, nf))
        if not coupling:
            return f, K, res
        K_fc = sp.csr_matrix((data_c, self.csr_c_indices, self.csr_c_indptr), shape=(nf, len(self.fixed)))
        return f, K, res, K_fc

    def commit(self, u: np.ndarray, res, time: float):
        self.u = u.copy()
        self.eps_n = self.point_strains(u)
        self.state = res.state
        self.state.committed_time = time
        self.time = time
        KT = res.tangent[self.centroid_points]
        m = np.array([len(c) for c in self.mesh.cells])
        self.alpha = np.array([alpha_scaling(KT[c], m[c]) for c in range(self.mesh.n_cells)])

    # boundary data -------------------------------------------------------------------

    def tag_nodes(self, tag: str) -> np.ndarray:
        if tag not in self.mesh.boundary_tags:
            raise ConfigError(f"unknown boundary tag {tag!r}; mesh has {sorted(self.mesh.boundary_tags)}")
        nodes = set()
        for a, b in self.mesh.boundary_tags[tag]:
            nodes.update(self.edge_nodes(a, b))
        return np.array(sorted(nodes), dtype=np.int64)

    def traction_vector(self, bc: TractionBC) -> np.ndarray:
        """Load of ``bc`` at unit channel value."""
        if bc.tag not in self.mesh.boundary_tags:
            raise ConfigError(f"unknown boundary tag {bc.tag!r}; mesh has {sorted(self.mesh.boundary_tags)}")
        f = np.zeros(self.n_dof)
        V = self.mesh.vertices
        for a, b in self.mesh.boundary_tags[bc.tag]:
            d = V[b] - V[a]
            if bc.vector is not None:
                q = np.asarray(bc.vector, dtype=float)
            else:
                n = np.array([d[1], -d[0]]) / np.hypot(*d)
                q = -bc.pressure * n
            fe = traction_load_vector(V[a], V[b], lambda p, t, q=q: q, self.k)
            nodes = np.array(self.edge_nodes(a, b))
            idx = np.column_stack([2 * nodes, 2 * nodes + 1]).reshape(-1)
            np.add.at(f, idx, fe)
        return f

    def body_vector(self, b) -> np.ndarray:
        f = np.zeros(self.n_dof)
        bv = np.asarray(b, dtype=float)
        for c, ops in enumerate(self.operators):
            np.add.at(f, self.cell_dofs(c), body_load_vector(ops, lambda p, t: bv))
        return f

    def nearest_node(self, point) -> int:
        d = np.linalg.norm(self.node_coords - np.asarray(point, dtype=float), axis=1)
        return int(np.argmin(d))

    def vertex_displacements(self, u: np.ndarray | None = None) -> np.ndarray:
        u = self.u if u is None else u
        nv = self.mesh.n_vertices
        return u[:2 * nv].reshape(nv, 2)


# -- analysis driver ---------------------------------------------------------------


@dataclass
class AnalysisResult:
    records: list[StepRecord]
    system: GlobalSystem

    @property
    def u(self) -> np.ndarray:
        return self.system.u

    @property
    def state(self) -> MaterialState:
        return self.system.state


def _dirichlet_table(system: GlobalSystem, bcs: Sequence[DirichletBC]):
    """(dofs, values, channels) with conflicting constraints rejected."""
    seen: dict[int, tuple[float, str, str]] = {}
    for bc in bcs:
        if bc.component not in (0, 1):
            raise ConfigError(f"Dirichlet component must be 0 or 1, got {bc.component}")
        if bc.channel not in CHANNELS:
            raise ConfigError(f"unknown channel {bc.channel!r}")
        nodes = system.tag_nodes(bc.tag)
        if bc.field is not None:
            values = np.asarray(bc.field(system.node_coords[nodes]), dtype=float).reshape(len(nodes))
        else:
            values = np.full(len(nodes), float(bc.value))
        for node, val in zip(nodes, values):
            dof = int(2 * node + bc.component)
            entry = (float(val), bc.channel, bc.tag)
            if dof in seen and seen[dof][:2] != entry[:2]:
                raise ConfigError(
                    f"conflicting constraints on dof {dof} (node {node}) from tags "
                    f"{seen[dof][2]!r} and {bc.tag!r}")
            seen.setdefault(dof, entry)
    dofs = np.array(sorted(seen), dtype=np.int64)
    vals = np.array([seen[d][0] for d in dofs])
    chans = [seen[d][1] for d in dofs]
    return dofs, vals, chans


def _line_search(system, u, du, r0, f_ext, dt, temp, newton):
    """Step ``u - s du`` with ``s`` chosen on the directional derivative.

    ``g(s) = -du . r(u - s du)`` is the slope of the incremental potential
    along the Newton direction. The full step is kept unless ``g(1)`` exceeds
    ``ls_eta |g(0)|``; otherwise the root of ``g`` in (0, 1) is bracketed with
    the Illinois variant of regula falsi.
    """
    free = system.free

    def evaluate(s):
        trial = u.copy()
        trial[free] -= s * du
        try:
            f_int, K, res = system.assemble(trial, dt, temp)
        except MaterialError:
            return np.inf, None
        return float(-du @ (f_int - f_ext)[free]), (trial, f_int, K, res)

    g0 = float(-du @ r0)
    g1, out = evaluate(1.0)
    if out is not None and (g0 >= 0.0 or g1 <= newton.ls_eta * abs(g0)):
        return out
    sa, ga = 0.0, g0
    sb, gb = 1.0, g1
    best = out
    side = 0
    for _ in range(newton.ls_max):
        if not np.isfinite(gb):
            s = 0.5 * (sa + sb)
        else:
            s = sb - gb * (sb - sa) / (gb - ga)
        g, cand = evaluate(s)
        if cand is not None:
            best = cand
            if abs(g) <= newton.ls_eta * abs(g0):
                return cand
        if g > 0.0:
            sb, gb = s, g
            if side == 1:
                ga *= 0.5
            side = 1
        else:
            sa, ga = s, g
            if side == -1 and np.isfinite(gb):
                gb *= 0.5
            side = -1
    if best is None:
        raise MaterialError("material update failed along the whole line search")
    return best


def run_analysis(mesh: PolygonalMesh, config: AnalysisConfig, material: Material,
                 on_step: Callable[[StepRecord], None] | None = None,
                 system: GlobalSystem | None = None) -> AnalysisResult:
    """March through the load program; every step must converge or the run aborts.

    Passing a ``system`` resumes from its committed state and time.
    """
    if system is None:
        system = GlobalSystem(mesh, material, config.k)
    prog = config.program
    for bc in config.tractions:
        if bc.channel not in CHANNELS:
            raise ConfigError(f"unknown channel {bc.channel!r}")
    d_dofs, d_vals, d_chans = _dirichlet_table(system, config.dirichlet)
    tractions = [(system.traction_vector(bc), bc.channel) for bc in config.tractions]
    body = system.body_vector(config.body_force) if config.body_force is not None else None
    mask = np.zeros(system.n_dof, dtype=bool)
    mask[d_dofs] = True
    system.set_constrained(mask)
    free = system.free
    probes = [(p.name, system.nearest_node(p.point)) for p in config.probes]
    bc_tags = sorted({bc.tag for bc in config.dirichlet})
    react_nodes = {t: system.tag_nodes(t) for t in bc_tags}
    newton = config.newton

    records: list[StepRecord] = []
    times = prog.step_times()
    start = int(np.searchsorted(times, system.time, side="right"))
    t_prev = system.time
    for n in range(start, len(times)):
        t = float(times[n])
        dt = t - t_prev
        temp = prog.value("temperature", t)
        f_ext = np.zeros(system.n_dof)
        for vec, ch in tractions:
            f_ext += prog.value(ch, t) * vec
        if body is not None:
            f_ext += prog.value("load", t) * body

        u = system.u.copy()
        residuals = []
        iters = 0
        tol = None
        du_c = None
        if len(d_dofs):
            target = d_vals * np.array([prog.value(ch, t) for ch in d_chans])
            du_c = target - u[d_dofs]
        if du_c is not None and np.any(du_c != 0.0):
            # linearized Dirichlet predictor from the committed state, so the
            # prescribed increment is spread over the free dofs by the tangent
            f_int, K, res, K_fc = system.assemble(u, dt, temp, coupling=True)
            rhs = (f_int - f_ext)[free] + K_fc @ du_c
            rn = float(np.linalg.norm(rhs))
            residuals.append(rn)
            system.force_scale = max(system.force_scale, float(np.linalg.norm(f_ext)),
                                     float(np.linalg.norm(f_int)), float(np.linalg.norm(K_fc @ du_c)))
            tol = max(newton.tol_rel * rn, newton.tol_abs * system.force_scale)
            u[d_dofs] = target
            if len(free):
                u[free] -= spla.spsolve(K.tocsc(), rhs)
            iters = 1
        f_int, K, res = system.assemble(u, dt, temp)
        while True:
            r = f_int - f_ext
            rn = float(np.linalg.norm(r[free]))
            residuals.append(rn)
            if tol is None:
                system.force_scale = max(system.force_scale, float(np.linalg.norm(f_ext)),
                                         float(np.linalg.norm(f_int)))
                tol = max(newton.tol_rel * rn, newton.tol_abs * system.force_scale)
            if rn <= tol:
                break
            if iters >= newton.max_iter:
                raise ConvergenceError(
                    f"Newton did not converge at step {n + 1} (t={t:g}) after {iters} iterations; "
                    f"residual history {residuals}", n + 1, residuals)
            if not np.all(np.isfinite(r)):
                raise ConvergenceError(f"non-finite residual at step {n + 1}", n + 1, residuals)
            du = spla.spsolve(K.tocsc(), r[free])
            if newton.line_search:
                u, f_int, K, res = _line_search(system, u, du, r[free], f_ext, dt, temp, newton)
            else:
                u[free] -= du
                f_int, K, res = system.assemble(u, dt, temp)
            iters += 1

        system.commit(u, res, t)
        t_prev = t
        reactions = {}
        for tag, nodes in react_nodes.items():
            reactions[tag] = (float(r[2 * nodes].sum()), float(r[2 * nodes + 1].sum()))
        lf = prog.value("load", t) if ("load" in prog.channels or not prog.channels) else prog.value("displacement", t)
        rec = StepRecord(
            step=n + 1, time=t, load_factor=lf,
            probes={name: (float(u[2 * node]), float(u[2 * node + 1])) for name, node in probes},
            reactions=reactions, iterations=iters, residuals=residuals)
        log.debug("step %d t=%g iterations=%d residuals=%s", n + 1, t, iters, residuals)
        records.append(rec)
        if on_step is not None:
            on_step(rec)
    return AnalysisResult(records, system)
