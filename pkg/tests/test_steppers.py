from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rel
from porostab.assembly import SourceLoad, TractionLoad
from porostab.cases import DAY, Scenario, build_cantilever
from porostab.errors import ConfigError
from porostab.materials import RegionMaterial, StabilizationConfig, derive_moduli
from porostab.mesh import build_mesh
from porostab.steppers import (SchemeConfig, expand_schedule, run_simulation, step_fixed_stress,
                               step_fully_implicit, uzawa_reference_step)

FS = SchemeConfig("fixed_stress")
DRAINED = dict(kappa=1e-13, K_f=2e9, K_s=40e9)
COLUMN_BCS = {"x-": "roller", "x+": "roller", "y-": "roller", "y+": "roller",
              "z-": "fixed", "z+": "free"}


def column(n, mat, force=0.0, dz=1.0, sources=()):
    mesh = build_mesh(1, 1, n, 1.0, 1.0, dz)
    tr = (TractionLoad("z+", force),) if force else ()
    return Scenario("column", mesh, {0: mat}, COLUMN_BCS, tractions=tr, sources=sources)


def march(sc, cfg, dt, n, problem=None):
    return run_simulation(sc, cfg, [(dt, n)], problem).states


# --- basic behaviour

def test_zero_loads_stay_zero():
    sc = build_cantilever(nx=4, nz=4, force=0.0)
    for cfg in (SchemeConfig(), FS):
        for s in march(sc, cfg, DAY, 3):
            assert not np.any(s.u) and not np.any(s.p)


def test_zero_steps_returns_initial():
    traj = run_simulation(build_cantilever(nx=2, nz=2), SchemeConfig(), [])
    assert len(traj.states) == 1 and len(traj.diagnostics) == 1
    assert traj.diagnostics[0].step == 0


def test_state_invariants(drained_rock):
    sc = column(4, drained_rock, force=-1e6)
    s = march(sc, SchemeConfig(), 1000.0, 2)[-1]
    pb = sc.build_problem()
    B = pb.system.B
    np.testing.assert_allclose(s.eps_v, (B @ s.u) / (pb.system.props.b * pb.system.volumes),
                               rtol=1e-12)
    np.testing.assert_allclose(s.sigma_v, drained_rock.K_dr * s.eps_v - pb.system.props.b * s.p,
                               rtol=1e-12)


def test_undrained_cube_carries_load(rock):
    t = -3.0e5
    mesh = build_mesh(1, 1, 1, 1, 1, 1)
    bcs = {**COLUMN_BCS}
    sc = Scenario("cube", mesh, {0: rock}, bcs, tractions=(TractionLoad("z+", t),))
    pb = sc.build_problem()
    state = pb.initial_state()
    new = step_fully_implicit(state, DAY, pb, sc.loads(DAY))
    # dense oracle: free dofs are the four top-node z components
    s = pb.system
    free = np.setdiff1d(np.arange(24), pb.fixed)
    A = s.A.toarray()[np.ix_(free, free)]
    B = s.B.toarray()[:, free]
    K = np.block([[A, -B.T], [-B, np.zeros((1, 1))]])
    rhs = np.concatenate([sc.loads(DAY).Q_u[free], [0.0]])
    ref = np.linalg.solve(K, rhs)
    assert new.p[0] == pytest.approx(ref[-1], rel=1e-10)
    assert new.p[0] == pytest.approx(-t, rel=1e-10)
    assert abs(new.eps_v[0]) <= 1e-10 * abs(t) / rock.K_dr


def column_oracle(n, mat, dz, dt, steps, p0):
    """Backward-Euler monolithic 1D reference written from scratch (unit cross-section)."""
    mod = derive_moduli(mat)
    k_e = (mod.lam + 2 * mod.G) / dz
    nn = n + 1
    K = np.zeros((nn, nn))
    for e in range(n):
        K[e:e + 2, e:e + 2] += k_e * np.array([[1, -1], [-1, 1]])
    B = np.zeros((n, nn))
    for e in range(n):
        B[e, e], B[e, e + 1] = -mod.b, mod.b
    t = mat.kappa / (mat.mu_f * dz)
    T = np.zeros((n, n))
    for f in range(n - 1):
        T[f:f + 2, f:f + 2] += t * np.array([[1, -1], [-1, 1]])
    D = mod.invM * dz * np.eye(n)
    free = np.arange(1, nn)
    Kf, Bf = K[np.ix_(free, free)], B[:, free]
    M = np.block([[Kf, -Bf.T], [Bf, D + dt * T]])
    u, p = np.zeros(n), np.asarray(p0, float).copy()
    out = []
    for _ in range(steps):
        rhs = np.concatenate([np.zeros(n), Bf @ u + D @ p])
        x = np.linalg.solve(M, rhs)
        u, p = x[:n], x[n:]
        out.append(p.copy())
    return out


def test_drained_column_matches_1d_oracle():
    n, dz, dt = 6, 2.0, 3600.0
    mat = RegionMaterial(K_dr=5e9, nu=0.25, phi0=0.2, **DRAINED)
    sc = column(n, mat, dz=dz)
    p0 = 1e6 * np.linspace(1.0, 0.0, n) ** 2
    sc = replace(sc, p0=0.0)
    pb = sc.build_problem()
    state = pb.initial_state(p0=p0)
    ref = column_oracle(n, mat, dz, dt, 8, p0)
    dev = []
    for k in range(8):
        state = step_fully_implicit(state, dt, pb, sc.loads(state.time + dt))
        assert rel(state.p, ref[k]) <= 1e-8
        dev.append(np.linalg.norm(state.p - state.p.mean()))
    assert np.all(np.diff(dev) < 0)


# --- fixed stress

def undrained_patch(nx=4, nz=4):
    return build_cantilever(nx=nx, nz=nz)


def test_fs_first_step_keeps_pressure():
    sc = undrained_patch()
    pb = sc.build_problem()
    s0 = pb.initial_state(p0=2.0e5)
    s1 = step_fixed_stress(s0, None, DAY, pb, sc.loads(DAY))
    np.testing.assert_allclose(s1.p, 2.0e5, rtol=1e-12)


def test_fs_undrained_recurrence():
    sc = undrained_patch()
    pb = sc.build_problem()
    states = [pb.initial_state()]
    prev = None
    for n in range(1, 6):
        new = step_fixed_stress(states[-1], prev, DAY, pb, sc.loads(n * DAY))
        prev = states[-1]
        states.append(new)
    K = 5e9
    for n in range(1, 5):
        lhs = states[n + 1].p - states[n].p
        rhs = (states[n].p - states[n - 1].p) - K * (states[n].eps_v - states[n - 1].eps_v)
        assert np.abs(lhs - rhs).max() <= 1e-9 * np.abs(states[n + 1].p).max()


def test_fs_matches_uzawa():
    sc = undrained_patch()
    pb_fs, pb_uz = sc.build_problem(), sc.build_problem()
    fs = pb_fs.initial_state()
    uz = pb_uz.initial_state()
    prev = None
    for n in range(1, 21):
        loads = sc.loads(n * DAY)
        fs, prev = step_fixed_stress(fs, prev, DAY, pb_fs, loads), fs
        uz = uzawa_reference_step(uz, pb_uz, loads, DAY)
        assert rel(fs.p, uz.p) <= 1e-10


def test_uzawa_requires_strict_limit(drained_rock):
    sc = column(2, drained_rock)
    pb = sc.build_problem()
    with pytest.raises(ConfigError):
        uzawa_reference_step(pb.initial_state(), pb, sc.loads(0.0))
    sc2 = build_cantilever(nx=2, nz=2)
    pb2 = sc2.build_problem(StabilizationConfig(True, 1.0))
    with pytest.raises(ConfigError):
        uzawa_reference_step(pb2.initial_state(), pb2, sc2.loads(0.0))


def test_uzawa_divergence_free_keeps_pressure():
    sc = build_cantilever(nx=2, nz=2, force=0.0)
    pb = sc.build_problem()
    s = pb.initial_state(p0=1.0e4)
    s1 = uzawa_reference_step(s, pb, sc.loads(0.0))
    np.testing.assert_array_equal(s1.p, s.p)


def test_uzawa_increments_and_contraction():
    # load switched on at t=0+ and then held
    sc = build_cantilever(nx=4, nz=4, freeze_time=0.0)
    pb = sc.build_problem()
    s = pb.initial_state()
    eps0 = s.eps_v.copy()
    loads = sc.loads(1.0)
    divs = []
    for _ in range(15):
        new = uzawa_reference_step(s, pb, loads)
        expected = -5e9 * (s.eps_v - eps0)
        assert np.abs(new.p - s.p - expected).max() <= 1e-12 * np.abs(expected).max() + 1e-300
        s = new
        divs.append(np.linalg.norm(s.eps_v))
    assert np.all(np.diff(divs[1:]) < 0)
    assert divs[-1] < 0.2 * divs[1]


def test_fs_iterated_converges_to_fim():
    mat = RegionMaterial(K_dr=5e9, nu=0.25, phi0=0.2, **DRAINED)
    sc = column(5, mat, force=-1e6, dz=2.0)
    dt = 600.0
    fim = march(sc, SchemeConfig(), dt, 3)
    fs = march(sc, SchemeConfig("fixed_stress", fs_iterations=80), dt, 3)
    for a, b in zip(fim[1:], fs[1:]):
        assert rel(b.p, a.p) <= 1e-8


@settings(max_examples=8)
@given(st.integers(1, 3), st.booleans(), st.sampled_from([0.1 * DAY, DAY]))
def test_fs_forms_agree(iters, stab, dt):
    sc = build_cantilever(nx=4, nz=4, **DRAINED)
    cfg = SchemeConfig("fixed_stress", iters, "stress_rate", StabilizationConfig(stab, 1.0))
    a = march(sc, cfg, dt, 5)
    b = march(sc, replace(cfg, fs_form="porosity"), dt, 5)
    for x, y in zip(a[1:], b[1:]):
        assert rel(y.p, x.p) <= 1e-10
        assert rel(y.phi, x.phi) <= 1e-10


@pytest.mark.parametrize("cfg", [SchemeConfig(), FS, SchemeConfig("fixed_stress", 3)])
def test_mass_conservation(cfg):
    sc = build_cantilever(nx=6, nz=6, **DRAINED)
    traj = run_simulation(sc, cfg, [(0.5 * DAY, 6)])
    assert max(d.mass_residual for d in traj.diagnostics[1:]) <= 1e-10


def test_mass_conservation_with_source():
    mat = RegionMaterial(K_dr=5e9, nu=0.25, phi0=0.2, **DRAINED)
    sc = column(4, mat, sources=(SourceLoad((0,), 1e-3),))
    for cfg in (SchemeConfig(), FS):
        traj = run_simulation(sc, cfg, [(3600.0, 4)])
        assert max(d.mass_residual for d in traj.diagnostics[1:]) <= 1e-10
        # fluid injected = pore volume gained
        s = traj.states[-1]
        V = 1.0
        gain = np.sum(V * (s.dphi + derive_moduli(mat).invM * s.p
                           - derive_moduli(mat).invN * s.p))
        assert gain == pytest.approx(4 * 3600.0 * 1e-6, rel=1e-9)


def test_frozen_load_contraction():
    sc = build_cantilever(nx=6, nz=6, freeze_time=2.5 * DAY, freeze_force=100.0)
    traj = run_simulation(sc, FS, [(0.5 * DAY, 5), (DAY, 12)])
    st = traj.states
    d = [np.linalg.norm(st[n].eps_v - st[n - 1].eps_v) for n in range(7, len(st))]
    assert np.all(np.diff(d) < 0)
    assert d[-1] < 0.5 * d[0]


def test_fs_scheme_rate_drained():
    sc = build_cantilever(nx=6, nz=6, **DRAINED)
    t_end = DAY
    errs = []
    for k in range(4):
        dt = 0.2 * DAY / 2 ** k
        n = round(t_end / dt)
        a = march(sc, SchemeConfig(), dt, n)[-1]
        b = march(sc, FS, dt, n)[-1]
        errs.append(np.linalg.norm(b.p - a.p))
    order = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(order >= 0.9)


def test_scheme_config_validation():
    with pytest.raises(ConfigError):
        SchemeConfig("fixed_stress", fs_iterations=0)
    with pytest.raises(ConfigError):
        SchemeConfig("newton")
    with pytest.raises(ConfigError):
        SchemeConfig(fs_form="volume")


def test_schedule_expansion():
    assert expand_schedule([(1.0, 2), (0.5, 1)]) == [1.0, 1.0, 0.5]
    for bad in ([(0.0, 1)], [(1.0, -1)], [(1.0, 1.5)]):
        with pytest.raises(ConfigError):
            expand_schedule(bad)


def test_negative_dt_rejected():
    sc = build_cantilever(nx=2, nz=2)
    pb = sc.build_problem()
    s = pb.initial_state()
    with pytest.raises(ConfigError):
        step_fully_implicit(s, 0.0, pb, sc.loads(0.0))
    with pytest.raises(ConfigError):
        step_fixed_stress(s, None, -1.0, pb, sc.loads(0.0))
