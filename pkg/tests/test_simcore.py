import numpy as np
import pytest

from tubepilot.simcore import (
    PhantomGeometry, TubeModel, SimConfig, load_sim_bundle,
    Simulator, ControlIncrement, ForceSample, Outcome,
)
from tubepilot.simcore.config import RenderConfig, Window
from tubepilot.simcore.render import (
    render_synthetic_tube, save_png, load_png,
)


@pytest.fixture(scope="module")
def bundle():
    return load_sim_bundle()


@pytest.fixture(scope="module")
def sim(bundle):
    geom, tube, cfg = bundle
    return Simulator(geom, tube, cfg)


def feed(sim, seed=0, n=120, dx=0.003, stop_x=0.235):
    st = sim.reset(seed)
    samples = []
    for _ in range(n):
        st, fs = sim.step(st, ControlIncrement(dx=dx))
        samples.append(fs)
        if st.positions[0, 0] > stop_x:
            break
    return st, samples


class FakeMetrics:
    def __init__(self, peaks, log_impulses):
        self.peaks = np.asarray(peaks, dtype=np.float64)
        self.log_impulses = np.asarray(log_impulses, dtype=np.float64)


OK_METRICS = FakeMetrics([1.81, 0.0, 0.5, 0.3, 1.81], [-2.0] * 5)


# ---------------------------------------------------------------- config


def test_geometry_rejects_narrow_channel(bundle):
    geom, tube, _ = bundle
    with pytest.raises(ValueError):
        geom.validate_clearance(tube_radius=0.02)


def test_geometry_rejects_bad_profiles():
    base = dict(
        nostril=Window(0.0, 0.01), nasal_cavity=Window(0.02, 0.03),
        throat=Window(0.04, 0.05), target=Window(0.06, 0.07),
    )
    with pytest.raises(ValueError):
        PhantomGeometry(xs=[0.0, 0.0], center=[0, 0], half_width=[0.01, 0.01], **base)
    with pytest.raises(ValueError):
        PhantomGeometry(xs=[0.0, 0.1], center=[0, 0], half_width=[0.01, -0.01], **base)
    with pytest.raises(ValueError):
        PhantomGeometry(xs=[0.0, 0.05], center=[0, 0], half_width=[0.01, 0.01],
                        nostril=Window(0.0, 0.01), nasal_cavity=Window(0.02, 0.03),
                        throat=Window(0.04, 0.06), target=Window(0.03, 0.04))


def test_tube_model_validation():
    with pytest.raises(ValueError):
        TubeModel(n_nodes=5)
    with pytest.raises(ValueError):
        TubeModel(bending_stiffness=0.0)


def test_channel_wider_than_tube_everywhere(bundle):
    geom, tube, _ = bundle
    xs = np.linspace(0, geom.x_end, 2000)
    assert np.all(geom.half_width_at(xs) > tube.radius)


def test_sensor_windows_disjoint(bundle):
    geom, _, _ = bundle
    wins = [geom.nostril, geom.nasal_cavity, geom.throat]
    for i in range(len(wins)):
        for j in range(i + 1, len(wins)):
            assert wins[i].x_max < wins[j].x_min or wins[j].x_max < wins[i].x_min


# ----------------------------------------------------------------- reset


def test_reset_deterministic(sim):
    a, b = sim.reset(1234), sim.reset(1234)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.ee_pose, b.ee_pose)


def test_reset_no_initial_contact(sim):
    st = sim.reset(0)
    assert st.positions[:, 0].max() < 0.0
    fs, contacts = sim.measure_forces(st.positions, st.positions,
                                      st.ee_pose[:2], float(st.ee_pose[2]), 0.0)
    assert contacts == []
    assert np.all(fs.channels() == 0.0)


def test_reset_is_equilibrium(sim):
    st = sim.reset(7)
    st2, fs = sim.step(st, ControlIncrement())
    assert np.array_equal(st2.positions, st.positions)
    assert np.all(fs.channels() == 0.0)


def test_reset_seed_sweep_covers_range(sim):
    tips = np.array([sim.reset(s).positions[0] for s in range(1000)])
    thetas = np.array([sim.reset(s).ee_pose[2] for s in range(1000)])
    z = tips[:, 1]
    assert z.min() < -0.004 and z.max() > 0.004
    assert thetas.min() < -0.08 and thetas.max() > 0.08
    hist, _ = np.histogram(z, bins=10, range=(-0.005, 0.005))
    assert np.all(hist > 0)


# ------------------------------------------------------------------ step


def test_zero_increment_no_contact_fixed_point(sim):
    st = sim.reset(3)
    st1, fs = sim.step(st, ControlIncrement())
    assert np.array_equal(st1.positions, st.positions)
    assert np.all(fs.channels() == 0.0)
    assert fs.fx_ee == pytest.approx(0.0, abs=1e-7)


def test_step_rejects_bad_dt(sim):
    with pytest.raises(ValueError):
        sim.step(sim.reset(0), ControlIncrement(), dt=0.0)


def test_step_determinism_bitwise(sim):
    def run():
        st = sim.reset(11)
        out = []
        for k in range(50):
            st, fs = sim.step(st, ControlIncrement(dx=0.003, dz=1e-4 * ((-1) ** k)))
            out.append((st.positions.copy(), fs))
        return out

    a, b = run(), run()
    for (pa, fa), (pb, fb) in zip(a, b):
        assert pa.tobytes() == pb.tobytes()
        assert fa == fb


def test_increment_clamped_to_per_step_limits(sim):
    st = sim.reset(0)
    st2, _ = sim.step(st, ControlIncrement(dx=0.05, dz=-0.05, dtheta=1.0))
    d = st2.ee_pose - st.ee_pose
    assert d[0] == pytest.approx(sim.cfg.max_step_xy)
    assert d[1] == pytest.approx(-sim.cfg.max_step_xy)
    assert d[2] == pytest.approx(sim.cfg.max_step_theta)


def test_workspace_clamp_flagged(sim):
    st = sim.reset(0)
    # march to the forward workspace limit
    for _ in range(200):
        st, _ = sim.step(st, ControlIncrement(dx=0.003))
        if st.clamped:
            break
    assert st.clamped
    assert st.ee_pose[0] <= sim.cfg.workspace_x[1] + 1e-15


def test_scripted_insertion_monotone_to_target(sim):
    st = sim.reset(0)
    tip_x = [st.positions[0, 0]]
    for _ in range(120):
        st, _ = sim.step(st, ControlIncrement(dx=0.003))
        tip_x.append(st.positions[0, 0])
        if sim.tip_in_target(st):
            break
    assert sim.tip_in_target(st)
    assert not st.unstable
    dx = np.diff(tip_x)
    assert np.all(dx > -1e-4)
    assert sim.check_outcome(st, OK_METRICS) == Outcome("success")


def test_relaxed_state_energy_consistent(sim):
    st = sim.reset(2)
    for _ in range(70):
        st, _ = sim.step(st, ControlIncrement(dx=0.003))
    assert st.residual <= sim.cfg.relax_tol
    _, grad, _ = sim._energy_grad(st.positions, st.ee_pose[:2], float(st.ee_pose[2]))
    assert np.max(np.abs(grad[:-1])) <= sim.cfg.relax_tol
    assert all(c.depth >= 0 for c in st.contacts)


def test_energy_gradient_matches_finite_differences(sim):
    st = sim.reset(0)
    for _ in range(60):
        st, _ = sim.step(st, ControlIncrement(dx=0.003))
    rng = np.random.default_rng(7)
    P = st.positions + rng.uniform(-2e-4, 2e-4, st.positions.shape)
    grip, th = st.ee_pose[:2], float(st.ee_pose[2])
    _, g, _ = sim._energy_grad(P, grip, th)
    h = 1e-7
    for _ in range(60):
        i = int(rng.integers(0, len(P) - 1))
        j = int(rng.integers(0, 2))
        Pp, Pm = P.copy(), P.copy()
        Pp[i, j] += h
        Pm[i, j] -= h
        gn = (sim._energy_only(Pp, grip, th) - sim._energy_only(Pm, grip, th)) / (2 * h)
        assert abs(g[i, j] - gn) <= 1e-6 * max(abs(g[i, j]), abs(gn), 1.0)


def test_passivity_zero_increments_settle(sim):
    st, _ = feed(sim, seed=0, n=60, stop_x=10.0)
    st1, f1 = sim.step(st, ControlIncrement())
    st2, f2 = sim.step(st1, ControlIncrement())
    st3, f3 = sim.step(st2, ControlIncrement())
    # fixed point after one settling step, bit for bit
    assert st2.positions.tobytes() == st1.positions.tobytes()
    assert f3 == ForceSample(f2.fx, f2.fy, f2.fz, f2.f1, f2.f2,
                             f2.fx_ee, f2.fy_ee, f2.fz_ee, f3.t)
    # settling sheds friction drag: normal-force channels and the nostril
    # resultant do not increase
    assert f2.f1 <= f1.f1 + 1e-12
    assert f2.f2 <= f1.f2 + 1e-12
    assert np.hypot(f2.fx, f2.fz) <= np.hypot(f1.fx, f1.fz) + 1e-12


# ---------------------------------------------------------------- forces


def penetrated_positions(sim, x, depth, side="lower"):
    """All nodes parked outside except the tip, which is pressed into a wall
    at station x by exactly `depth` (perpendicular)."""
    g = sim.geom
    r = sim.tube.radius
    P = sim.reset(0).positions.copy()
    s = g.lower_at(x, 1) if side == "lower" else g.upper_at(x, 1)
    c = 1.0 / np.sqrt(1.0 + s * s)
    if side == "lower":
        z = g.lower_at(x) + (r - depth) / c
    else:
        z = g.upper_at(x) - (r - depth) / c
    P[0] = [x, z]
    return P


def test_penalty_law_exact_in_throat(sim):
    depth = 8.137e-4
    P = penetrated_positions(sim, x=0.140, depth=depth)
    fs, contacts = sim.measure_forces(P, P, P[-1], 0.0, 1.0)
    assert fs.f2 == pytest.approx(sim.tube.contact_stiffness * depth, abs=1e-12)
    assert fs.f1 == 0.0 and fs.fx == 0.0 and fs.fz == 0.0
    assert len([c for c in contacts if c.node == 0]) == 1
    assert contacts[0].depth == pytest.approx(depth, abs=1e-12)


def test_force_locality_one_window_per_contact(sim):
    cases = [
        (0.008, "nostril"),
        (0.060, "f1"),
        (0.140, "f2"),
        (0.100, "none"),   # between windows
    ]
    for x, where in cases:
        P = penetrated_positions(sim, x=x, depth=5e-4)
        fs, _ = sim.measure_forces(P, P, P[-1], 0.0, 0.0)
        nostril = abs(fs.fx) + abs(fs.fz)
        got = {"nostril": nostril > 0, "f1": fs.f1 > 0, "f2": fs.f2 > 0}
        expected = {k: k == where for k in got}
        assert got == expected, (x, where, fs)


def test_fy_identically_zero(sim):
    st, samples = feed(sim, seed=0, n=90)
    assert all(fs.fy == 0.0 for fs in samples)
    assert all(fs.fy_ee == 0.0 for fs in samples)


def test_friction_adds_insertion_drag(sim):
    depth = 5e-4
    P = penetrated_positions(sim, x=0.060, depth=depth)
    P_prev = P.copy()
    P_prev[0, 0] -= 0.002    # node slid +x by 2 mm during the step
    fs_slide, _ = sim.measure_forces(P, P_prev, P[-1], 0.0, 0.0)
    fs_rest, _ = sim.measure_forces(P, P, P[-1], 0.0, 0.0)
    assert fs_slide.f1 == fs_rest.f1  # 1-D sensors read normal force only
    # the drag shows up on the end-effector reaction? no: on the wall sums
    # inside the nostril window only; at x=0.06 it is outside, so check via
    # a nostril-window fixture instead
    P2 = penetrated_positions(sim, x=0.008, depth=depth)
    P2_prev = P2.copy()
    P2_prev[0, 0] -= 0.002
    fs2_slide, _ = sim.measure_forces(P2, P2_prev, P2[-1], 0.0, 0.0)
    fs2_rest, _ = sim.measure_forces(P2, P2, P2[-1], 0.0, 0.0)
    assert fs2_slide.fx > fs2_rest.fx


# ---------------------------------------------------------------- outcome


def test_outcome_success_fixture(sim):
    st = sim.reset(0)
    P = st.positions.copy()
    g = sim.geom
    xt = 0.5 * (g.target.x_min + g.target.x_max)
    P[0] = [xt, g.center_at(xt)]
    st = st.copy()
    st.positions = P
    st.elapsed = 9.13
    metrics = FakeMetrics([1.81, 0.0, 0.5, 0.3, 1.81], [-2.0] * 5)
    assert sim.check_outcome(st, metrics) == Outcome("success")


def test_outcome_timeout(sim):
    st = sim.reset(0)
    st.elapsed = 20.0
    assert sim.check_outcome(st, OK_METRICS) == Outcome("failure", "timeout")


def test_outcome_force_peak(sim):
    st = sim.reset(0)
    st.elapsed = 5.0
    bad = FakeMetrics([5.2, 0.0, 0.5, 0.3, 1.81], [-2.0] * 5)
    assert sim.check_outcome(st, bad) == Outcome("failure", "force")


def test_outcome_impulse(sim):
    st = sim.reset(0)
    st.elapsed = 5.0
    bad = FakeMetrics([1.0] * 5, [-2.0, -2.0, -2.0, 1.0, -2.0])
    assert sim.check_outcome(st, bad) == Outcome("failure", "impulse")


def test_outcome_instability(sim):
    st = sim.reset(0)
    st.unstable = True
    assert sim.check_outcome(st, OK_METRICS) == Outcome("failure", "instability")


def test_outcome_in_progress(sim):
    st = sim.reset(0)
    st.elapsed = 1.0
    assert sim.check_outcome(st, OK_METRICS) == Outcome("in_progress")


def test_outcome_order_timeout_before_force(sim):
    st = sim.reset(0)
    st.elapsed = 25.0
    bad = FakeMetrics([9.0] * 5, [2.0] * 5)
    assert sim.check_outcome(st, bad) == Outcome("failure", "timeout")


# --------------------------------------------------------------- renders


def test_render_deterministic(sim):
    st = sim.reset(0)
    assert np.array_equal(sim.render_camera1(st), sim.render_camera1(st))


def test_render_shows_ex_vivo_tube(sim):
    st = sim.reset(0)
    img = sim.render_camera1(st)
    assert img.shape == (128, 128) and img.dtype == np.uint8
    assert (img > 180).sum() > 100


def test_render_fully_inserted_tube_occluded(bundle):
    geom, tube, cfg = bundle
    from dataclasses import replace
    cfg2 = SimConfig(render=RenderConfig(n_distractors=0))
    sim2 = Simulator(geom, tube, cfg2)
    st = sim2.reset(0)
    st.positions = st.positions + np.array([0.30, 0.0])  # everything inside
    img = sim2.render_camera1(st)
    assert (img > 180).sum() == 0


def test_render_straight_tube_fits_zero_curvature(bundle):
    geom, tube, _ = bundle
    cfg2 = SimConfig(render=RenderConfig(n_distractors=0, noise_sigma=0.0))
    sim2 = Simulator(geom, tube, cfg2)
    st = sim2.reset(42)
    img = sim2.render_camera1(st)
    ys, xs = np.nonzero(img > 180)
    a, b, c = np.polyfit(xs.astype(float), ys.astype(float), 2)
    assert abs(a) < 2e-3


def test_render_side_view(sim):
    st = sim.reset(0)
    img = sim.render_side(st)
    assert img.shape == (128, 128)
    assert (img > 200).sum() > 50      # tube
    assert ((img > 90) & (img < 200)).sum() > 100  # walls and windows


def test_synthetic_tube_render_and_truth():
    img, ctr = render_synthetic_tube(0.002, -0.3, 90.0, 5.0, 120.0,
                                     width_px=6, n_distractors=2, seed=9)
    assert img.shape == (128, 128)
    assert len(ctr) > 100
    # true centerline pixels are bright
    sel = ctr[:: max(1, len(ctr) // 50)]
    vals = img[np.clip(sel[:, 1].astype(int), 0, 127),
               np.clip(sel[:, 0].astype(int), 0, 127)]
    assert (vals > 150).mean() > 0.95


def test_png_roundtrip(tmp_path, sim):
    st = sim.reset(0)
    img = sim.render_camera1(st)
    p = tmp_path / "f.png"
    save_png(img, p)
    assert np.array_equal(load_png(p), img)
