"""Acceptance criteria 1-16.

Every ``check_criterion_N`` returns ``(ok, detail)``. The pytest wrappers
record the outcome (printed by the terminal summary hook in conftest) and
assert it, so a criterion that is not met shows up as a failing test. Run
the file directly to print the lines without pytest.
"""

import filecmp
import functools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))
from conftest import ACCEPTANCE, FRACTURE_PRESETS, STATIC_PRESETS, get_case  # noqa: E402

from latticeqc import SCHEMES, DirichletBC, build_coarse_mesh, build_sampling, solve, split_errors
from latticeqc.fracture import FractureLoading, run_quasistatic_fracture
from latticeqc.harness import run_case, run_convergence_suite
from latticeqc.harness.config import parse_config
from latticeqc.mesh import full_resolution_mesh
from latticeqc.sampling import SSN
from latticeqc.solver import full_sampling, residual_forces, sampled_total_energy

ALL_PRESETS = STATIC_PRESETS + FRACTURE_PRESETS
SEED = 20240611


@functools.lru_cache(maxsize=None)
def sampling(name, scheme, variant="spread"):
    return build_sampling(get_case(name).mesh, scheme, variant)


@functools.lru_cache(maxsize=None)
def fr_solution(name):
    case = get_case(name)
    mesh = full_resolution_mesh(case.model)
    return solve(case.model, mesh, full_sampling(mesh), case.bcs)


@functools.lru_cache(maxsize=None)
def fs_solution(name):
    case = get_case(name)
    return solve(case.model, case.mesh, full_sampling(case.mesh), case.bcs)


@functools.lru_cache(maxsize=None)
def scheme_solution(name, scheme, variant="spread"):
    case = get_case(name)
    return solve(case.model, case.mesh, sampling(name, scheme, variant), case.bcs)


@functools.lru_cache(maxsize=None)
def report(name, scheme, variant="spread"):
    case = get_case(name)
    return split_errors(fr_solution(name).u_full, fs_solution(name).u_full,
                        scheme_solution(name, scheme, variant).u_full, case.model)


def _psn_elements(name, scheme):
    case = get_case(name)
    a = sampling(name, scheme)
    by_id = {el.id: el for el in case.mesh.elements}
    return case, a, [(by_id[k], p) for k, p in sorted(a.psn_sets.items())]


def check_criterion_1():
    rng = np.random.default_rng(SEED)
    worst_delta = worst_pu = 0.0
    n_sets = 0
    for name in STATIC_PRESETS:
        for scheme in ("iss", "nss"):
            _, _, items = _psn_elements(name, scheme)
            for el, psns in items:
                n_sets += 1
                worst_delta = max(worst_delta, np.abs(psns.psi(psns.positions) - np.eye(6)).max())
                pts = el.lower + rng.random((100, 2)) * el.size
                worst_pu = max(worst_pu, np.abs(psns.psi(pts).sum(axis=1) - 1.0).max())
    ok = n_sets > 0 and worst_delta <= 1e-10 and worst_pu <= 1e-10
    return ok, f"{n_sets} PSN sets; max Kronecker dev {worst_delta:.2e}, max partition-of-unity dev {worst_pu:.2e} (tol 1e-10)"


def check_criterion_2():
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    n = 0
    for name in STATIC_PRESETS:
        _, _, items = _psn_elements(name, "iss")
        for el, psns in items:
            c, s = el.centroid, el.size / 2.0
            for _ in range(5):
                coef = rng.normal(size=6)

                def q(p):
                    x, y = ((np.atleast_2d(p) - c) / s).T
                    return coef @ np.array([np.ones_like(x), x, y, x * y, x * x, y * y])

                pts = el.lower + rng.random((20, 2)) * el.size
                approx = psns.psi(pts) @ q(psns.positions)
                worst = max(worst, np.abs(approx - q(pts)).max())
                n += 1
    return n > 0 and worst <= 1e-9, f"{n} random quadratics; max |sum psi q(r) - q(p)| = {worst:.2e} (tol 1e-9)"


def check_criterion_3():
    worst = 0.0
    n = 0
    for name in ALL_PRESETS:
        for scheme in ("ess", "iss", "nas", "nss"):
            _, a, items = _psn_elements(name, scheme)
            for el, psns in items:
                free = np.sum(a.roles[el.member_nodes] != SSN)
                worst = max(worst, abs(a.weights[psns.node_ids].sum() - free))
                n += 1
    return n > 0 and worst <= 1e-9, f"{n} elements; max |sum w - non-SSN members| = {worst:.2e} (tol 1e-9)"


def check_criterion_4():
    rng = np.random.default_rng(SEED + 4)
    worst = 0.0
    for name in ALL_PRESETS:
        case = get_case(name)
        schemes = sorted({case.config.sampling.scheme, "iss"})
        for scheme in schemes:
            a = sampling(name, scheme)
            n_rn = len(case.mesh.rn_ids)
            for _ in range(10):
                u = rng.normal(scale=0.1, size=(n_rn, 2))
                d = rng.normal(size=(n_rn, 2))
                grad = -residual_forces(case.model, case.mesh, a, u)
                h = 1e-3
                fd = (sampled_total_energy(case.model, case.mesh, a, u + h * d)
                      - sampled_total_energy(case.model, case.mesh, a, u - h * d)) / (2 * h)
                exact = float(grad @ d.ravel())
                worst = max(worst, abs(fd - exact) / abs(exact))
    return worst <= 1e-6, f"10 random states per preset and scheme; max relative gradient error {worst:.2e} (tol 1e-6)"


def patch_test(name):
    """Relative deviation from FR per scheme under affine boundary data.

    Every node with incomplete coordination is prescribed in the FR model.
    The coarse models prescribe those of them the mesh can hold (RNs and
    ghost nodes on element edges); ragged-edge nodes inside an element follow
    from the bilinear interpolation, which is exact for affine fields.
    """
    case = get_case(name)
    m, mesh = case.model, case.mesh
    grad = np.array([[1e-3, 2e-3], [-5e-4, 1.5e-3]])
    u_aff = m.positions @ grad.T + np.array([0.3, -0.2])
    deg = np.bincount(m.struts[m.alive].ravel(), minlength=m.n_nodes)
    bnd = np.flatnonzero(deg < deg.max())

    def bcs(nodes):
        return [DirichletBC((int(n),), ax, float(u_aff[n, ax])) for n in nodes for ax in (0, 1)]

    fr_mesh = full_resolution_mesh(m)
    fr = solve(m, fr_mesh, full_sampling(fr_mesh), bcs(bnd)).u_full
    held = bnd[np.diff(mesh.interpolation.indptr)[bnd] <= 2]
    out = {"fr_vs_affine": np.linalg.norm(fr - u_aff) / np.linalg.norm(u_aff)}
    for scheme in SCHEMES:
        u = solve(m, mesh, sampling(name, scheme), bcs(held)).u_full
        out[scheme] = np.linalg.norm(u - fr) / np.linalg.norm(fr)
    return out


def check_criterion_5():
    worst = {s: 0.0 for s in SCHEMES}
    fr_dev = 0.0
    for name in STATIC_PRESETS:
        res = patch_test(name)
        fr_dev = max(fr_dev, res.pop("fr_vs_affine"))
        for s, v in res.items():
            worst[s] = max(worst[s], v)
    ok = all(v <= 1e-9 for v in worst.values())
    parts = ", ".join(f"{s} {v:.1e}" for s, v in worst.items())
    return ok, f"max relative deviation from FR: {parts} (tol 1e-9; FR vs affine {fr_dev:.1e})"


def check_criterion_6():
    case = get_case("square-stretch-iss")
    m = case.model
    mesh = build_coarse_mesh(m, element_size=case.config.mesh.element_size * m.material.strut_length)
    fs = solve(m, mesh, full_sampling(mesh), case.bcs)
    ess = solve(m, mesh, build_sampling(mesh, "ess"), case.bcs)
    rep = split_errors(fr_solution("square-stretch-iss").u_full, fs.u_full, ess.u_full, m)
    ok = rep.e_disp_sam <= 1e-8 and rep.e_U_sam <= 1e-8
    return ok, f"fully coarse square stretch, ESS: e_disp_sam {rep.e_disp_sam:.2e}, e_U_sam {rep.e_U_sam:.2e} (tol 1e-8)"


def check_criterion_7():
    worst = 0.0
    for name in ALL_PRESETS:
        rep = report(name, "fs")
        worst = max(worst, rep.e_disp_sam, rep.e_U_sam)
    return worst <= 1e-12, f"max FS sampling error over {len(ALL_PRESETS)} presets: {worst:.2e} (tol 1e-12)"


def check_criterion_8():
    bad = []
    n = 0
    for name in ALL_PRESETS:
        for scheme in SCHEMES:
            n += 1
            if not all(report(name, scheme).triangle_ok):
                bad.append(f"{name}/{scheme}")
    return not bad, f"{n} runs checked" + (f"; violations: {', '.join(bad)}" if bad else "; no violations")


def _tree_bytes(root):
    root = Path(root)
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def check_criterion_9(tmp_dir):
    tmp_dir = Path(tmp_dir)
    cfgs = []
    data = get_case("square-stretch-iss").config.model_dump()
    data["output"]["vtk"] = True
    cfgs.append(parse_config(data))
    data = get_case("three-point-bending-iss").config.model_dump()
    data["loading"]["steps"] = 25
    data["reference"]["mode"] = "none"
    data["output"]["vtk"] = True
    cfgs.append(parse_config(data))
    same = True
    n_files = 0
    for cfg in cfgs:
        a, b = tmp_dir / cfg.name / "a", tmp_dir / cfg.name / "b"
        run_case(cfg, out_dir=a)
        run_case(cfg, out_dir=b)
        ta, tb = _tree_bytes(a), _tree_bytes(b)
        n_files += len(ta)
        same &= bool(ta) and ta == tb
        cmp = filecmp.dircmp(a, b)
        same &= not cmp.diff_files
    return same, f"{n_files} exported files compared byte for byte across two runs"


def interface_confinement(name, scheme):
    """Per-node error outside a two-element band around the FR interface
    against the maximum inside the band, plus the distance of the worst node
    from the interface."""
    case = get_case(name)
    m, mesh = case.model, case.mesh
    err = np.linalg.norm(scheme_solution(name, scheme).u_full - fr_solution(name).u_full, axis=1)
    iface = np.flatnonzero(mesh.fr_boundary_mask)
    pos = m.positions
    dist = np.full(m.n_nodes, np.inf)
    for k in iface:
        dist = np.minimum(dist, np.linalg.norm(pos - pos[k], axis=1))
    band = 2 * float(max(np.max(el.size) for el in mesh.elements))
    inside = dist <= band
    outside_max = float(err[~inside].max()) if np.any(~inside) else 0.0
    worst_dist = float(dist[np.argmax(err)])
    return outside_max, float(err[inside].max()), int(np.sum(~inside)), worst_dist


def check_criterion_10():
    iss = report("square-stretch-iss", "iss")
    nss = report("square-stretch-iss", "nss")
    checks = {
        "ISS e_disp in [0.1,0.5]%": 0.001 <= iss.e_disp <= 0.005,
        "ISS e_U in [0.15,0.6]%": 0.0015 <= iss.e_U <= 0.006,
        "NSS e_disp in [0.6,2.5]%": 0.006 <= nss.e_disp <= 0.025,
        "NSS e_U in [0.9,3.5]%": 0.009 <= nss.e_U <= 0.035,
    }
    out_max, in_max, n_out, worst_dist = interface_confinement("square-stretch-iss", "nss")
    checks["NSS confinement"] = out_max <= in_max
    failed = [k for k, v in checks.items() if not v]
    detail = (f"ISS e_disp {100 * iss.e_disp:.3f}% e_U {100 * iss.e_U:.3f}%; NSS e_disp {100 * nss.e_disp:.3f}% "
              f"e_U {100 * nss.e_U:.3f}%; NSS outside-band max {out_max:.2e} <= band max {in_max:.2e} "
              f"({n_out} nodes outside; worst node {worst_dist:.1f} mm from interface)")
    if failed:
        detail += "; failed: " + ", ".join(failed)
    return not failed, detail


def _table_check(name, disp, disp_tol, energy, energy_tol):
    fs = report(name, "fs")
    reps = {s: report(name, s) for s in ("fs", "ess", "nas", "nss")}
    checks = {
        f"FS e_disp {disp}% +/- {disp_tol}pp": abs(100 * fs.e_disp - disp) <= disp_tol,
        f"FS e_U {energy}% +/- {energy_tol}pp": abs(100 * fs.e_U - energy) <= energy_tol,
    }
    for norm in ("e_disp_sam", "e_U_sam"):
        v = [getattr(reps[s], norm) for s in ("fs", "ess", "nas", "nss")]
        checks[f"{norm} ordering FS<=ESS<=NAS<=NSS"] = v[0] <= 1e-12 and v[0] <= v[1] <= v[2] <= v[3]
        for s, limit in (("ess", 0.005), ("nas", 0.015), ("nss", 0.02)):
            checks[f"{s.upper()} {norm} <= {100 * limit}%"] = getattr(reps[s], norm) <= limit
    failed = [k for k, v in checks.items() if not v]
    detail = (f"FS e_disp {100 * fs.e_disp:.3f}% e_U {100 * fs.e_U:.3f}%; sampling e_disp/e_U (%): "
              + ", ".join(f"{s.upper()} {100 * r.e_disp_sam:.3f}/{100 * r.e_U_sam:.3f}" for s, r in reps.items()))
    if failed:
        detail += "; failed: " + ", ".join(failed)
    return not failed, detail


def check_criterion_11():
    return _table_check("tri-tension-fs-24", 2.35, 0.5, 1.12, 0.4)


def check_criterion_12():
    return _table_check("tri-bending-fs-24", 1.74, 0.5, 0.89, 0.4)


@functools.lru_cache(maxsize=None)
def suite(name, sizes):
    cfg = get_case(name).config
    return run_convergence_suite(cfg, sizes=list(sizes), schemes=list(SCHEMES), export_files=False)


def _monotone(res):
    bad = []
    for scheme in SCHEMES:
        rows = sorted((r for r in res.rows if r["scheme"] == scheme), key=lambda r: -r["element_size"])
        for norm in ("e_disp", "e_U"):
            v = [r[norm] for r in rows]
            if not all(b < a for a, b in zip(v, v[1:])):
                bad.append(f"{scheme} {norm} {['%.4f' % (100 * x) for x in v]}")
    return bad


def check_criterion_13():
    ten = suite("tri-tension-fs-24", (24, 16, 12))
    ben = suite("tri-bending-fs-24", (24, 12, 8))
    failed = [f"tension not decreasing: {b}" for b in _monotone(ten)]
    failed += [f"bending not decreasing: {b}" for b in _monotone(ben)]
    orders = []
    for scheme in ("fs", "ess"):
        for norm, label in (("e_disp", "L2"), ("e_U", "H1")):
            p = ten.fits[scheme][norm].order
            orders.append(f"{scheme.upper()} {label} {p:.3f}")
            if not 1.1 <= p <= 1.7:
                failed.append(f"{scheme.upper()} {label} order {p:.3f} outside [1.1, 1.7]")
    detail = "tension orders: " + ", ".join(orders)
    if failed:
        detail += "; failed: " + "; ".join(failed)
    return not failed, detail


def check_criterion_14():
    name = "square-stretch-iss"
    a, b = sampling(name, "iss", "spread"), sampling(name, "iss", "perturbed")
    moved = sum(not np.array_equal(np.sort(a.psn_sets[k].node_ids), np.sort(b.psn_sets[k].node_ids))
                for k in a.psn_sets if k in b.psn_sets)
    ra, rb = report(name, "iss", "spread"), report(name, "iss", "perturbed")
    diff = max(abs(getattr(ra, k) - getattr(rb, k)) for k in
               ("e_disp", "e_disp_disc", "e_disp_sam", "e_U", "e_U_disc", "e_U_sam"))
    ok = moved > 0 and diff <= 1e-8
    return ok, f"{moved} of {len(a.psn_sets)} elements use a different PSN set; max |norm difference| {diff:.2e} (tol 1e-8)"


TARGET_COUNTS_3PB = {"fs": 2197, "ess": 745, "iss": 493, "nss": 471}


@functools.lru_cache(maxsize=None)
def three_point_bending():
    case = get_case("three-point-bending-iss")
    loading = FractureLoading(case.loaded.nodes, case.loaded.axis, case.loaded.value,
                              case.config.loading.steps)
    fr_mesh = full_resolution_mesh(case.model)
    out = {"fr": run_quasistatic_fracture(case.model, fr_mesh, full_sampling(fr_mesh), case.fixed, loading)}
    for scheme in TARGET_COUNTS_3PB:
        out[scheme] = run_quasistatic_fracture(case.model, case.mesh, sampling(case.name, scheme),
                                               case.fixed, loading)
    return out


def check_criterion_15():
    name = "three-point-bending-iss"
    counts = {s: sampling(name, s).n_sampling_nodes for s in TARGET_COUNTS_3PB}
    failed = []
    if not counts["nss"] < counts["iss"] < counts["ess"] < counts["fs"]:
        failed.append("count ordering")
    for s, ref in TARGET_COUNTS_3PB.items():
        if abs(counts[s] - ref) > 0.15 * ref:
            failed.append(f"{s.upper()} count {counts[s]} not within 15% of {ref}")
    runs = three_point_bending()
    fr = runs["fr"]
    parts = []
    for s in TARGET_COUNTS_3PB:
        h = runs[s]
        w = h.external_work / fr.external_work
        f = h.steps[-1].reaction / fr.steps[-1].reaction
        parts.append(f"{s.upper()} n={counts[s]} W/W_fr={w:.4f} F/F_fr={f:.4f}")
        if abs(w - 1) > 0.03:
            failed.append(f"{s.upper()} work off by {100 * abs(w - 1):.2f}%")
        if abs(f - 1) > 0.02:
            failed.append(f"{s.upper()} final reaction off by {100 * abs(f - 1):.2f}%")
    detail = "; ".join(parts)
    if failed:
        detail += "; failed: " + ", ".join(failed)
    return not failed, detail


def check_criterion_16():
    cfg = get_case("notched-tension-iss").config
    res = run_case(cfg, export_files=False)
    cmp = res.comparison()
    h = res.history
    first = h.first_failure
    at_tip = first is not None and bool(np.isin(res.model.struts[first], res.notch_tips).any())
    failed = []
    if not at_tip:
        failed.append("first failure away from the notch tip")
    if cmp["curve_max_deviation"] > 0.05:
        failed.append(f"curve deviation {100 * cmp['curve_max_deviation']:.1f}% of FR peak")
    if cmp["failed_overlap"] < 0.8:
        failed.append(f"failed-strut overlap {cmp['failed_overlap']:.2f}")
    ref = res.reference_history
    first_step = lambda hist: next((s.step for s in hist.steps if s.newly_failed), None)  # noqa: E731
    detail = (f"first failed strut {first} at notch tip: {at_tip}; max curve deviation "
              f"{100 * cmp['curve_max_deviation']:.2f}% of FR peak; overlap {cmp['failed_overlap']:.2f}; "
              f"first failure step ISS {first_step(h)} vs FR {first_step(ref)}")
    if failed:
        detail += "; failed: " + ", ".join(failed)
    return not failed, detail


def _record(n, result):
    ok, detail = result
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 7, 8, 10, 11, 12, 13, 14, 15, 16])
def test_criterion(n):
    _record(n, globals()[f"check_criterion_{n}"]())


def test_criterion_9(tmp_path):
    _record(9, check_criterion_9(tmp_path))


if __name__ == "__main__":
    import tempfile

    failures = 0
    for n in range(1, 17):
        args = (tempfile.mkdtemp(),) if n == 9 else ()
        ok, detail = globals()[f"check_criterion_{n}"](*args)
        failures += not ok
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    sys.exit(1 if failures else 0)
