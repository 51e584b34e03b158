"""Acceptance suite: one test and one PASS/FAIL line per criterion.

The full benchmark runs (desk tension in four modes, desk shear in two) take
roughly a quarter of an hour on one core. Run the module alone with::

    pytest tests/test_acceptance.py -v -s

or as a script, ``python tests/test_acceptance.py``, which prints only the
summary lines.
"""

from __future__ import annotations

import functools
import hashlib
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pfaccel import bench, cli, fem
from pfaccel.accel import AccelController, AndersonState, anderson_update
from pfaccel.fem import State
from pfaccel.material import (
    MaterialParams,
    elastic_stress,
    psi_pm,
    psi_total,
    split_strain,
    stress_pm,
)
from pfaccel.mesh import DofMap
from pfaccel.staggered import SolverConfig, run_simulation

from conftest import two_triangle_mesh
from reference import reference_actions, synthetic_sequences

RESULTS: dict = {}

pytestmark = pytest.mark.slow


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)


# --------------------------------------------------------------------------
# benchmark runs shared between criteria

def desk_run(name: str, mode: str, depth: int = 1, omega: float = 1.6, track_energy: bool = False):
    """Run a desk benchmark; returns the report, per-step state digests, history check and wall time."""
    return _desk_run(name, mode, depth, omega, track_energy)


@functools.lru_cache(maxsize=None)
def _desk_run(name, mode, depth, omega, track_energy):
    case = bench.get_case(name, "desk")
    cfg = SolverConfig(mode=mode, depth_m=depth, omega=omega, track_energy=track_energy)
    digests = []
    history_ok = [True]
    last = {}

    def callback(n, state, mesh):
        digests.append(hashlib.sha256(state.u.tobytes() + state.phi.tobytes() + state.history.tobytes()).hexdigest())
        prev = last.get("h")
        if prev is not None and not np.all(state.history >= prev):
            history_ok[0] = False
        last["h"] = state.history.copy()

    t0 = time.perf_counter()
    rep = run_simulation(case, cfg, callback=callback)
    return rep, digests, history_ok[0], time.perf_counter() - t0


def _iterates(rep):
    return [(r.load_step, r.iter, r.res_u_norm, r.increment_norm, r.newton_iters) for r in rep.records]


# --------------------------------------------------------------------------

def test_split_identities():
    t0 = time.perf_counter()
    p = MaterialParams(121.15, 80.77, 0.0075, 2.7e-3)
    rng = np.random.default_rng(1)
    eps = rng.uniform(-1, 1, (1000, 3))
    ep, em = split_strain(eps)
    e1 = np.abs(ep + em - eps).max()
    pp, pm = psi_pm(eps, p)
    e2 = np.abs(pp + pm - psi_total(eps, p)).max()
    sp_, sm = stress_pm(eps, p)
    e3 = np.abs(sp_ + sm - elastic_stress(eps, p)).max()
    # strains with nonnegative eigenvalues: rotate a nonnegative diagonal tensor
    lam = rng.uniform(0, 1, (1000, 2))
    th = rng.uniform(0, np.pi, 1000)
    c, s = np.cos(th), np.sin(th)
    pos = np.stack([lam[:, 0] * c**2 + lam[:, 1] * s**2, lam[:, 0] * s**2 + lam[:, 1] * c**2,
                    (lam[:, 0] - lam[:, 1]) * c * s], axis=1)
    e4 = psi_pm(pos, p)[1].max()
    dt = time.perf_counter() - t0
    ok = e1 <= 1e-12 and e2 <= 1e-12 and e3 <= 1e-12 and e4 <= 1e-12 and dt < 1.0
    report(1, ok, f"max abs. error: strain {e1:.1e}, energy {e2:.1e}, stress {e3:.1e}, "
                  f"psi_minus(tension) {e4:.1e}, {dt:.2f} s")
    assert ok


def _fd_errors(split: bool, rng):
    mesh = two_triangle_mesh()
    p = MaterialParams(121.15, 80.77, 0.0075, 2.7e-3, use_split=split)
    dm = DofMap(mesh.n_nodes)
    st = State.zeros(mesh)
    st.u = 1e-3 * rng.standard_normal(8)
    st.phi = rng.uniform(0, 0.9, 4)
    st.history = rng.uniform(0, 1e-3, (2, 3))
    K, r = fem.assemble_displacement(mesh, st, p, dm)
    grad = np.empty(8)
    jac = np.empty((8, 8))
    for k in range(8):
        a, b = st.copy(), st.copy()
        a.u[k] += 1e-7
        b.u[k] -= 1e-7
        grad[k] = (fem.total_energy(mesh, a, p, dm) - fem.total_energy(mesh, b, p, dm)) / 2e-7
        a, b = st.copy(), st.copy()
        a.u[k] += 1e-8
        b.u[k] -= 1e-8
        jac[:, k] = (fem.displacement_residual(mesh, a, p, dm) - fem.displacement_residual(mesh, b, p, dm)) / 2e-8
    return (np.linalg.norm(r - grad) / np.linalg.norm(grad),
            np.linalg.norm(K.toarray() - jac) / np.linalg.norm(jac))


def test_variational_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_r, worst_k = 0.0, 0.0
    for split in (True, False):
        for _ in range(5):
            er, ek = _fd_errors(split, rng)
            worst_r, worst_k = max(worst_r, er), max(worst_k, ek)
    dt = time.perf_counter() - t0
    ok = worst_r < 1e-5 and worst_k < 1e-4 and dt < 5.0
    report(2, ok, f"residual vs energy gradient {worst_r:.1e}, tangent vs FD Jacobian {worst_k:.1e}, {dt:.2f} s")
    assert ok


def test_anderson_linear_oracle():
    t0 = time.perf_counter()
    worst = 0
    plain_ok = True
    for seed in range(10):
        r = np.random.default_rng(seed)
        A = r.standard_normal((10, 10))
        A *= 0.5 / np.max(np.abs(np.linalg.eigvals(A)))
        b = r.standard_normal(10)
        xs = np.linalg.solve(np.eye(10) - A, b)
        st_ = AndersonState(10)
        x = np.zeros(10)
        for k in range(1, 50):
            gx = A @ x + b
            x = anderson_update(st_, gx, gx - x)
            if k == 1:
                plain_ok &= np.array_equal(x, gx)
            if np.linalg.norm(x - xs) <= 1e-10 * np.linalg.norm(xs):
                break
        worst = max(worst, k)
        st0 = AndersonState(0)
        x = y = np.zeros(10)
        for _ in range(5):
            gx = A @ x + b
            x = anderson_update(st0, gx, gx - x)
            y = A @ y + b
            plain_ok &= np.array_equal(x, y)
    dt = time.perf_counter() - t0
    ok = worst <= 11 and plain_ok and dt < 1.0
    report(3, ok, f"worst iterations to 1e-10: {worst}, depth 0 / first iterate equal plain map: {plain_ok}, "
                  f"{dt:.2f} s")
    assert ok


def test_degenerate_modes_match_plain():
    plain, d_plain, _, _ = desk_run("tensile", "plain", track_energy=True)
    relax, d_relax, _, _ = desk_run("tensile", "relax", omega=1.0)
    aa0, d_aa0, _, _ = desk_run("tensile", "anderson", depth=0)
    ref = _iterates(plain)
    ok_relax = _iterates(relax) == ref and d_relax == d_plain
    ok_aa0 = _iterates(aa0) == ref and d_aa0 == d_plain
    ok = ok_relax and ok_aa0
    report(4, ok, f"relax(omega=1) identical: {ok_relax}, anderson(m=0) identical: {ok_aa0}, "
                  f"{len(ref)} iterates over {len(d_plain)} steps")
    assert ok


def test_controller_replay():
    seqs = synthetic_sequences(100)
    mismatches = 0
    restarts = 0
    for seq in seqs:
        ctl = AccelController("combined", 1, 1.6, 5)
        ctl.begin_step()
        got = []
        for r in seq:
            before = ctl.restarts
            got.append((ctl.next_action().value, ctl.restarts > before))
            ctl.record_residual(r)
        mismatches += got != reference_actions(seq, 5)
        restarts += ctl.restarts
    ok = mismatches == 0 and restarts > 0
    report(5, ok, f"{len(seqs)} sequences, {mismatches} mismatches, {restarts} restarts replayed")
    assert ok


def _compare(name, limit):
    plain, _, _, t_plain = desk_run(name, "plain", track_energy=(name == "tensile"))
    comb, _, _, t_comb = desk_run(name, "combined")
    ratio = comb.total_iterations / plain.total_iterations
    worst = 0.0
    for a, b in zip(plain.steps, comb.steps):
        if a.converged and b.converged:
            for x, y in ((a.tau_x, b.tau_x), (a.tau_y, b.tau_y)):
                scale = max(abs(x), abs(y))
                if scale > 0:
                    worst = max(worst, abs(x - y) / scale)
    return plain, comb, ratio, worst, t_plain + t_comb


def test_desk_tension_comparison():
    plain, comb, ratio, worst, wall = _compare("tensile", 0.70)
    ok = comb.all_converged and ratio <= 0.70 and worst <= 0.01 and wall <= 600
    report(6, ok, f"combined {comb.total_iterations} vs plain {plain.total_iterations} iterations "
                  f"(ratio {ratio:.3f}), all converged: {comb.all_converged}, "
                  f"load curve max rel. diff {worst:.1e}, {wall:.0f} s")
    assert ok


def test_desk_shear_comparison():
    plain, comb, ratio, _, wall = _compare("shear", 0.60)
    ok = comb.all_converged and ratio <= 0.60 and wall <= 900
    report(7, ok, f"combined {comb.total_iterations} vs plain {plain.total_iterations} iterations "
                  f"(ratio {ratio:.3f}), all converged: {comb.all_converged}, {wall:.0f} s")
    assert ok


def test_irreversibility_and_energy():
    runs = [("tensile", "plain", 1, 1.6, True), ("tensile", "relax", 1, 1.0, False),
            ("tensile", "anderson", 0, 1.6, False), ("tensile", "combined", 1, 1.6, False),
            ("shear", "plain", 1, 1.6, False), ("shear", "combined", 1, 1.6, False)]
    history_ok = all(desk_run(*r)[2] for r in runs)
    plain = desk_run("tensile", "plain", track_energy=True)[0]
    worst = 0.0
    by_step: dict = {}
    for r in plain.records:
        by_step.setdefault(r.load_step, []).append(r.energy)
    rising = []
    for n, energies in by_step.items():
        rel = [(e1 - e0) / abs(e0) for e0, e1 in zip(energies, energies[1:])]
        if rel and max(rel) > 1e-10:
            rising.append(n)
        worst = max([worst] + rel)
    ok = history_ok and worst <= 1e-10
    where = f" in steps {rising[0]}-{rising[-1]} ({len(rising)} steps)" if rising else ""
    report(8, ok, f"history non-decreasing in {len(runs)} desk runs: {history_ok}; "
                  f"largest relative energy increase (plain tension): {worst:.1e}{where}")
    assert ok


def test_traction_oracle():
    mesh = bench.get_case("tensile").build_mesh()
    delta = 1e-3
    st = State.zeros(mesh)
    st.u[1::2] = delta * mesh.nodes[:, 1]
    worst = 0.0
    for lam, mu in (bench.LAME_NOTCH, bench.LAME_LSHAPE):
        for split in (False, True):
            p = MaterialParams(lam, mu, 0.0075, 2.7e-3, use_split=split)
            _, ty = fem.compute_traction(mesh, st, p, "Top")
            exact = (lam + 2 * mu) * delta
            worst = max(worst, abs(ty - exact) / exact)
    ok = worst <= 1e-10
    report(9, ok, f"max relative error of tau_y against (lambda + 2 mu) delta: {worst:.1e}")
    assert ok


def test_determinism(tmp_path):
    configs = [["--case", "tensile", "--steps", "6"],
               ["--case", "shear", "--steps", "3", "--mode", "relax"],
               ["--case", "lshape", "--steps", "3", "--sweep-depth", "0,2"]]
    identical = True
    for k, argv in enumerate(configs):
        outs = []
        for rep in range(2):
            out = tmp_path / f"c{k}_{rep}"
            assert cli.main(argv + ["--out", str(out)]) in (0, 2)
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        identical &= outs[0] == outs[1] and len(outs[0]) > 0
    report(10, identical, f"{len(configs)} configurations run twice, CSV reports byte-identical: {identical}")
    assert identical


if __name__ == "__main__":
    import tempfile

    tests = [test_split_identities, test_variational_consistency, test_anderson_linear_oracle,
             test_degenerate_modes_match_plain, test_controller_replay, test_desk_tension_comparison,
             test_desk_shear_comparison, test_irreversibility_and_energy, test_traction_oracle]
    for t in tests:
        try:
            t()
        except AssertionError:
            pass
    with tempfile.TemporaryDirectory() as d:
        try:
            test_determinism(Path(d))
        except AssertionError:
            pass
    print()
    for n in sorted(RESULTS):
        print(RESULTS[n])
