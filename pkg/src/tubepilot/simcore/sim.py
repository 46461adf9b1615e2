"""Quasi-static 2-D tube insertion simulator.

The tube is a chain of N nodes with axial and bending elasticity. The last
node is rigidly attached to the end-effector; after every pose increment the
free nodes are relaxed to an energy minimum (elastic + contact penalty +
grip-orientation spring). Sensor channels aggregate the contact penalties
inside each wall window. All arithmetic is plain float64 numpy, so identical
inputs give bit-identical trajectories.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .config import PhantomGeometry, TubeModel, SimConfig
from . import render as _render


@dataclass(frozen=True)
class ControlIncrement:
    dx: float = 0.0
    dz: float = 0.0
    dtheta: float = 0.0

    def clamped(self, cfg: SimConfig) -> "ControlIncrement":
        m, mt = cfg.max_step_xy, cfg.max_step_theta
        return ControlIncrement(
            dx=float(np.clip(self.dx, -m, m)),
            dz=float(np.clip(self.dz, -m, m)),
            dtheta=float(np.clip(self.dtheta, -mt, mt)),
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dz, self.dtheta], dtype=np.float64)


@dataclass(frozen=True)
class ForceSample:
    fx: float
    fy: float
    fz: float
    f1: float
    f2: float
    fx_ee: float
    fy_ee: float
    fz_ee: float
    t: float

    def channels(self) -> np.ndarray:
        """The five sensor channels in canonical order."""
        return np.array([self.fx, self.fy, self.fz, self.f1, self.f2])


@dataclass(frozen=True)
class Contact:
    node: int
    side: str        # "lower" | "upper"
    segment: int     # wall segment index
    depth: float     # penetration, m, > 0


@dataclass
class SimState:
    positions: np.ndarray          # (N, 2) node positions, node 0 = tip
    ee_pose: np.ndarray            # (x, z, theta)
    grip_index: int
    elapsed: float
    contacts: List[Contact] = field(default_factory=list)
    unstable: bool = False
    clamped: bool = False
    residual: float = 0.0          # max |dE/dx| over free nodes after relax
    relax_iters: int = 0
    seed: Optional[int] = None

    def copy(self) -> "SimState":
        return replace(self, positions=self.positions.copy(),
                       ee_pose=self.ee_pose.copy(), contacts=list(self.contacts))

    @property
    def tip(self) -> np.ndarray:
        return self.positions[0]


@dataclass(frozen=True)
class Outcome:
    status: str                    # "in_progress" | "success" | "failure"
    reason: Optional[str] = None   # "timeout" | "force" | "impulse" | "instability"

    @property
    def terminal(self) -> bool:
        return self.status != "in_progress"

IN_PROGRESS = Outcome("in_progress")
SUCCESS = Outcome("success")


class Simulator:
    def __init__(self, geometry: PhantomGeometry, tube: TubeModel,
                 cfg: Optional[SimConfig] = None):
        geometry.validate_clearance(tube.radius)
        self.geom = geometry
        self.tube = tube
        self.cfg = cfg or SimConfig()
        n = tube.n_nodes
        self._ka = tube.axial_stiffness / tube.rest_length
        self._kb = tube.bending_stiffness / tube.rest_length ** 3
        # bending is a fixed quadratic form; precompute its scalar Hessian
        A = np.zeros((n - 2, n))
        for j in range(n - 2):
            A[j, j] += 1.0
            A[j, j + 1] += -2.0
            A[j, j + 2] += 1.0
        self._bend_A = A
        self._bend_H = self._kb * (A.T @ A)   # (N, N), shared by x and z

    # ---------------------------------------------------------------- energy

    def _contact_terms(self, P: np.ndarray):
        """Active contacts for all nodes, as flat arrays.

        Returns (idx, depth, ddir, normal, side, seg): node indices,
        penetrations, d(depth)/d(node) rows, unit inward wall normals,
        side codes (0 lower, 1 upper) and wall segment indices. Contact
        force on a node is k_c * depth * normal.
        """
        g = self.geom
        r = self.tube.radius
        x, z = P[:, 0], P[:, 1]
        inside = (x >= 0.0) & (x <= g.x_end)
        empty = (np.empty(0, dtype=np.intp), np.empty(0), np.empty((0, 2)),
                 np.empty((0, 2)), np.empty(0, dtype=np.intp),
                 np.empty(0, dtype=np.intp))
        if not np.any(inside):
            return empty
        ii = np.nonzero(inside)[0]
        xi, zi = x[ii], z[ii]
        seg = g.segment_index(xi)
        zl, sl, pl = g.lower_at(xi), g.lower_at(xi, 1), g.lower_at(xi, 2)
        zu, su, pu = g.upper_at(xi), g.upper_at(xi, 1), g.upper_at(xi, 2)
        cl = 1.0 / np.sqrt(1.0 + sl * sl)
        cu = 1.0 / np.sqrt(1.0 + su * su)
        depth_l = r - (zi - zl) * cl          # perpendicular penetration
        depth_u = r - (zu - zi) * cu
        al = depth_l > 0.0
        au = depth_u > 0.0
        if not (np.any(al) or np.any(au)):
            return empty
        # d(depth)/dx carries a wall-curvature term so the gradient is exact
        ddx_l = sl * cl + (zi - zl) * sl * pl * cl ** 3
        ddx_u = -su * cu + (zu - zi) * su * pu * cu ** 3
        idx = np.concatenate([ii[al], ii[au]])
        depth = np.concatenate([depth_l[al], depth_u[au]])
        ddir = np.concatenate([
            np.stack([ddx_l[al], -cl[al]], axis=1),
            np.stack([ddx_u[au], cu[au]], axis=1),
        ])
        normal = np.concatenate([
            np.stack([-sl[al], np.ones(int(al.sum()))], axis=1) * cl[al, None],
            np.stack([su[au], -np.ones(int(au.sum()))], axis=1) * cu[au, None],
        ])
        side = np.concatenate([np.zeros(int(al.sum()), dtype=np.intp),
                               np.ones(int(au.sum()), dtype=np.intp)])
        segc = np.concatenate([seg[al], seg[au]])
        return idx, depth, ddir, normal, side, segc

    def _energy_only(self, P: np.ndarray, grip: np.ndarray, theta: float) -> float:
        l0 = self.tube.rest_length
        seg = np.diff(P, axis=0)
        ln = np.linalg.norm(seg, axis=1)
        e = 0.5 * self._ka * np.sum((ln - l0) ** 2)
        D = P[2:] - 2.0 * P[1:-1] + P[:-2]
        e += 0.5 * self._kb * np.sum(D * D)
        kc = self.tube.contact_stiffness
        _, depth, _, _, _, _ = self._contact_terms(P)
        e += 0.5 * kc * float(depth @ depth)
        q = grip + l0 * np.array([np.cos(theta), np.sin(theta)])
        d = P[-2] - q
        e += 0.5 * self.cfg.grip_spring * float(d @ d)
        return float(e)

    def _energy_grad(self, P: np.ndarray, grip: np.ndarray, theta: float):
        """Energy and gradient w.r.t. every node (grip column included)."""
        l0 = self.tube.rest_length
        n = len(P)
        grad = np.zeros_like(P)

        seg = np.diff(P, axis=0)
        ln = np.linalg.norm(seg, axis=1)
        ln_safe = np.maximum(ln, 1e-12)
        that = seg / ln_safe[:, None]
        fax = self._ka * (ln - l0)
        e = 0.5 * self._ka * np.sum((ln - l0) ** 2)
        fvec = fax[:, None] * that
        grad[1:] += fvec
        grad[:-1] -= fvec

        D = P[2:] - 2.0 * P[1:-1] + P[:-2]
        e += 0.5 * self._kb * np.sum(D * D)
        kD = self._kb * D
        grad[:-2] += kD
        grad[1:-1] -= 2.0 * kD
        grad[2:] += kD

        kc = self.tube.contact_stiffness
        contacts = self._contact_terms(P)
        idx, depth, ddir = contacts[0], contacts[1], contacts[2]
        if idx.size:
            e += 0.5 * kc * float(depth @ depth)
            np.add.at(grad, idx, kc * depth[:, None] * ddir)

        q = grip + l0 * np.array([np.cos(theta), np.sin(theta)])
        d = P[-2] - q
        e += 0.5 * self.cfg.grip_spring * float(d @ d)
        grad[-2] += self.cfg.grip_spring * d
        # the same spring pulls on the end-effector through q
        grad[-1] -= self.cfg.grip_spring * d

        return float(e), grad, contacts

    def _hessian_free(self, P: np.ndarray, contacts=None) -> np.ndarray:
        """Hessian over the free nodes (all but the grip). Axial terms keep
        their true (possibly indefinite) lateral part; the Levenberg damping
        in the relaxer absorbs it. Contact uses the Gauss-Newton form."""
        n = len(P)
        nf = n - 1
        H = np.zeros((2 * nf, 2 * nf))
        H[0::2, 0::2] = self._bend_H[:nf, :nf]
        H[1::2, 1::2] = self._bend_H[:nf, :nf]

        seg = np.diff(P, axis=0)
        ln = np.maximum(np.linalg.norm(seg, axis=1), 1e-12)
        that = seg / ln[:, None]
        l0 = self.tube.rest_length
        eye = np.eye(2)
        tt = that[:, :, None] * that[:, None, :]            # (n-1, 2, 2)
        K = self._ka * (tt + (1.0 - l0 / ln)[:, None, None] * (eye - tt))
        uu, vv = np.meshgrid(np.arange(2), np.arange(2), indexing="ij")
        a = 2 * np.arange(n - 1)[:, None, None]
        rows, cols = a + uu, a + vv
        np.add.at(H, (rows, cols), K)                        # node i diagonal
        inner = np.arange(n - 2)                             # i+1 is still free
        if inner.size:
            b = 2 * (inner + 1)[:, None, None]
            np.add.at(H, (b + uu, b + vv), K[inner])
            np.add.at(H, (a[inner] + uu, b + vv), -K[inner])
            np.add.at(H, (b + uu, a[inner] + vv), -K[inner])

        kc = self.tube.contact_stiffness
        if contacts is None:
            contacts = self._contact_terms(P)
        idx, ddir = contacts[0], contacts[2]
        free = idx < nf
        if np.any(free):
            dd = ddir[free]
            blocks = kc * dd[:, :, None] * dd[:, None, :]
            c = 2 * idx[free][:, None, None]
            np.add.at(H, (c + uu, c + vv), blocks)

        a0 = 2 * (nf - 1)
        H[a0:a0 + 2, a0:a0 + 2] += self.cfg.grip_spring * eye
        return H

    # ------------------------------------------------------------ relaxation

    def _relax(self, P0: np.ndarray, grip: np.ndarray, theta: float):
        """Descend the total energy over free nodes until the residual force
        falls below tolerance. Levenberg-damped Newton steps: the damping
        absorbs indefinite (buckling) curvature and contact activation, and
        near the minimum it vanishes, so the 1e-8 N residual is reachable
        inside the iteration cap."""
        cfg = self.cfg
        P = P0.copy()
        P[-1] = grip
        best_P, best_res = P.copy(), np.inf
        lam = 1.0
        iters = 0
        eviction = np.diag_indices(2 * (len(P) - 1))
        for iters in range(cfg.relax_max_iters + 1):
            e, grad, contacts = self._energy_grad(P, grip, theta)
            g = grad[:-1].ravel()
            res = float(np.max(np.abs(g))) if g.size else 0.0
            if not np.isfinite(res):
                return best_P, best_res, iters, True
            if res < best_res:
                best_res, best_P = res, P.copy()
            if res <= cfg.relax_tol or iters == cfg.relax_max_iters:
                break
            H = self._hessian_free(P, contacts)
            stepped = False
            for _ in range(16):
                Hd = H.copy()
                Hd[eviction] += lam
                try:
                    d = np.linalg.solve(Hd, -g)
                except np.linalg.LinAlgError:
                    lam *= 10.0
                    continue
                gd = float(g @ d)
                if not np.isfinite(gd) or gd >= 0.0:
                    lam *= 10.0
                    continue
                P_try = P.copy()
                P_try[:-1] += d.reshape(-1, 2)
                e_try = self._energy_only(P_try, grip, theta)
                pred = -(gd + 0.5 * float(d @ (H @ d)))
                if np.isfinite(e_try) and e_try < e:
                    rho = (e - e_try) / pred if pred > 0 else 1.0
                    lam = max(lam / 3.0, 1e-8) if rho > 0.5 else min(lam * 2.0, 1e12)
                    P = P_try
                    stepped = True
                    break
                lam = min(lam * 10.0, 1e12)
            if not stepped:
                break   # energy decrease below float noise; polish below
        # Newton polish judged on the residual itself: near the minimum the
        # energy decrease per step is under float rounding, but the gradient
        # still contracts quadratically.
        if best_res > cfg.relax_tol:
            P = best_P.copy()
            for _ in range(8):
                _, grad, contacts = self._energy_grad(P, grip, theta)
                g = grad[:-1].ravel()
                H = self._hessian_free(P, contacts)
                H[eviction] += 1e-8 * max(float(np.max(np.diag(H))), 1.0)
                try:
                    d = np.linalg.solve(H, -g)
                except np.linalg.LinAlgError:
                    break
                P_try = P.copy()
                P_try[:-1] += d.reshape(-1, 2)
                _, grad_t, _ = self._energy_grad(P_try, grip, theta)
                res_t = float(np.max(np.abs(grad_t[:-1])))
                if not np.isfinite(res_t) or res_t >= best_res:
                    break
                P, best_P, best_res = P_try, P_try.copy(), res_t
                iters += 1
                if best_res <= cfg.relax_tol:
                    break
        unstable = best_res > cfg.unstable_residual
        return best_P, best_res, iters, unstable

    # --------------------------------------------------------------- sensing

    def measure_forces(self, P: np.ndarray, P_prev: np.ndarray,
                       grip: np.ndarray, theta: float, t: float
                       ) -> Tuple[ForceSample, List[Contact]]:
        """Aggregate wall reactions into the five sensor channels.

        Normal reaction per contact is exactly k_c * depth along the wall
        normal. Friction (mu * f_n * tanh(slip/slip_ref) along the wall
        tangent) enters only the 3-axis nostril sensor; the 1-D sensors
        report unsigned normal force sums.
        """
        g = self.geom
        tube = self.tube
        kc = tube.contact_stiffness
        fx = fz = f1 = f2 = 0.0
        contacts = []
        idx, depth, _, normal, side, segc = self._contact_terms(P)
        side_name = ("lower", "upper")
        for k in range(idx.size):
            i = int(idx[k])
            contacts.append(Contact(i, side_name[side[k]], int(segc[k]),
                                    float(depth[k])))
            fn = kc * depth[k]
            x = P[i, 0]
            # reaction exerted on the wall by the tube
            react = -fn * normal[k]
            tang = np.array([normal[k, 1], -normal[k, 0]])
            if tang[0] < 0:
                tang = -tang                      # tangent points +x
            slip = float((P[i] - P_prev[i]) @ tang)
            ft = tube.friction_mu * fn * np.tanh(slip / tube.slip_ref)
            react = react + ft * tang
            if g.nostril.contains(x):
                fx += react[0]
                fz += react[1]
            elif g.nasal_cavity.contains(x):
                f1 += fn
            elif g.throat.contains(x):
                f2 += fn
        _, grad, _ = self._energy_grad(P, grip, theta)
        fx_ee, fz_ee = grad[-1]   # force the holder applies to keep the pose
        return ForceSample(fx=float(fx), fy=0.0, fz=float(fz),
                           f1=float(f1), f2=float(f2),
                           fx_ee=float(fx_ee), fy_ee=0.0, fz_ee=float(fz_ee),
                           t=float(t)), contacts

    # ------------------------------------------------------------------ api

    def reset(self, seed: int) -> SimState:
        rng = np.random.default_rng(seed)
        z0 = rng.uniform(-0.005, 0.005)
        phi = rng.uniform(-0.10, 0.10)
        setback = rng.uniform(0.010, 0.018)
        n = self.tube.n_nodes
        l0 = self.tube.rest_length
        tip = np.array([-setback, z0])
        that = np.array([np.cos(phi), np.sin(phi)])
        P = tip[None, :] - np.arange(n)[:, None] * l0 * that[None, :]
        ee = np.array([P[-1, 0], P[-1, 1], phi])
        return SimState(positions=P, ee_pose=ee, grip_index=n - 1,
                        elapsed=0.0, contacts=[], seed=int(seed))

    def step(self, state: SimState, u: ControlIncrement,
             dt: Optional[float] = None) -> Tuple[SimState, ForceSample]:
        cfg = self.cfg
        dt = cfg.dt if dt is None else dt
        if dt <= 0:
            raise ValueError("dt must be positive")
        if not isinstance(u, ControlIncrement):
            u = ControlIncrement(*np.asarray(u, dtype=np.float64))
        u = u.clamped(cfg)
        pose = state.ee_pose + u.as_array()
        lo = np.array([cfg.workspace_x[0], cfg.workspace_z[0], cfg.workspace_theta[0]])
        hi = np.array([cfg.workspace_x[1], cfg.workspace_z[1], cfg.workspace_theta[1]])
        clipped = np.clip(pose, lo, hi)
        clamped = bool(np.any(clipped != pose))
        pose = clipped
        grip = pose[:2]
        theta = float(pose[2])

        P_prev = state.positions
        P, res, iters, unstable = self._relax(P_prev, grip, theta)
        if unstable:
            # Quasi-static continuation: a full-tick pose move can jump a
            # buckling fold the solver cannot descend. Walking the same move
            # in substeps keeps each solve in the previous basin; time
            # semantics are unchanged because the physics has no inertia.
            for n in (2, 4, 8):
                Ps, res_s, iters_s, bad = P_prev, np.inf, 0, False
                for j in range(1, n + 1):
                    mid = state.ee_pose + (pose - state.ee_pose) * (j / n)
                    Ps, res_s, it_j, bad = self._relax(Ps, mid[:2],
                                                       float(mid[2]))
                    iters_s += it_j
                    if bad:
                        break
                iters += iters_s
                if not bad:
                    P, res, unstable = Ps, res_s, False
                    break
                if res_s < res:
                    P, res = Ps, res_s
        t_new = state.elapsed + dt
        sample, contacts = self.measure_forces(P, P_prev, grip, theta, t_new)
        new_state = SimState(positions=P, ee_pose=pose,
                             grip_index=state.grip_index, elapsed=t_new,
                             contacts=contacts, unstable=unstable,
                             clamped=clamped, residual=res, relax_iters=iters,
                             seed=state.seed)
        return new_state, sample

    def tip_in_target(self, state: SimState) -> bool:
        x, z = state.positions[0]
        g = self.geom
        if not (g.target.x_min <= x <= g.target.x_max):
            return False
        return abs(z - g.center_at(x)) <= g.half_width_at(x)

    def check_outcome(self, state: SimState, metrics) -> Outcome:
        """metrics must expose .peaks and .log_impulses (5-channel arrays)."""
        cfg = self.cfg
        if state.unstable:
            return Outcome("failure", "instability")
        if state.elapsed >= cfg.time_limit:
            return Outcome("failure", "timeout")
        peaks = np.asarray(metrics.peaks, dtype=np.float64)
        if np.any(peaks >= cfg.force_limit):
            return Outcome("failure", "force")
        lni = np.asarray(metrics.log_impulses, dtype=np.float64)
        if np.any(lni >= cfg.log_impulse_limit):
            return Outcome("failure", "impulse")
        if self.tip_in_target(state):
            return SUCCESS
        return IN_PROGRESS

    # ------------------------------------------------------------- rendering

    def render_camera1(self, state: SimState) -> np.ndarray:
        frame_idx = int(round(state.elapsed / self.cfg.dt))
        return _render.render_camera1(state.positions, self.cfg.render,
                                      self.tube.radius, frame_idx)

    def render_side(self, state: SimState) -> np.ndarray:
        return _render.render_side(state.positions, self.geom,
                                   self.tube.radius)
