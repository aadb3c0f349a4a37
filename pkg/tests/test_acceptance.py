"""End-to-end acceptance checks; each test prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines.
"""

import time

import numpy as np

from moserpairs.cohomology import basic_h2_dimension, de_rham_periods, find_basic_primitive
from moserpairs.gallery import builtin, builtin_scenarios, mutation_documents
from moserpairs.identities import identity_residuals, random_form
from moserpairs.models import shipped_models
from moserpairs.moser import (
    MoserProblem,
    integrate_isotopy,
    necessity_check,
    quasi_random_seeds,
    step_halving_study,
    verify_isotopy,
)
from moserpairs.rankclass import FrameSpan, validate_structure
from moserpairs.reeb import (
    check_commutation_rank_prop,
    check_leafwise_projection,
    reeb_cs_pair,
    reeb_cs_structure,
    reeb_distribution_cc,
    reeb_pair_contact,
)
from moserpairs.runner import Settings, report_json, run
from moserpairs.scenario import scenario_from_dict

T_SAMPLES = (0.0, 0.5, 1.0)
# lower bound on the relative primitive residual of the twisted-fiber target;
# the invariant-complex computation gives exactly 1 (the target is orthogonal
# to every exact basic form at every order)
TWISTED_RESIDUAL_FLOOR = 1.0 - 1e-9


def verdict(number, ok, detail):
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


def test_criterion_1_identity_suite():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = {}
    for name, model in shipped_models().items():
        forms = [random_form(model, int(rng.integers(0, model.dim + 1)), rng, with_t=True) for _ in range(50)]
        res = identity_residuals(model, forms, 9, rng)
        worst[name] = max(res.values())
    for sc in builtin_scenarios():
        extra = [random_form(sc.model, 1, rng) for _ in range(2)]
        res = identity_residuals(sc.model, list(sc.forms.values()) + extra, 9, rng)
        worst[sc.name] = max(res.values())
    elapsed = time.perf_counter() - start
    top = max(worst.values())
    verdict(1, top <= 1e-10 and elapsed < 30, f"identity residual {top:.2e} on 9^n grids, {elapsed:.1f} s")


def test_criterion_2_validation_and_mutations():
    bad = []
    scenarios = builtin_scenarios()
    for sc in scenarios:
        for t in T_SAMPLES:
            if not validate_structure(sc.structure(), grid_k=9, t_samples=(t,)).valid:
                bad.append(sc.name)
    misnamed = []
    for name, doc in mutation_documents().items():
        rep = validate_structure(scenario_from_dict(doc).structure(), grid_k=9)
        if rep.valid or doc["tasks"][0]["expect_failed"][0] not in rep.failed:
            misnamed.append(name)
    n_mut = len(mutation_documents())
    ok = not bad and not misnamed and n_mut == 16
    verdict(2, ok, f"{len(scenarios)} builtins valid (failures {bad}); {n_mut} mutations, misnamed {misnamed}")


def _reeb_residual(s, pts, t):
    if s.kind == "contact_symplectic_pair":
        return max(reeb_cs_pair(s.alpha, s.eta, pts, t).max_residual,
                   reeb_cs_structure(s.alpha, s.eta, pts, t).max_residual)
    if s.kind == "cs_structure":
        return reeb_cs_structure(s.alpha, s.eta, pts, t).max_residual
    worst = reeb_distribution_cc(s.alpha, s.beta, pts, t).max_residual
    if s.kind == "contact_pair":
        worst = max(worst, reeb_pair_contact(s.alpha, s.beta, pts, t).max_residual)
    return worst


def test_criterion_3_reeb_suite():
    rng = np.random.default_rng(3)
    worst = 0.0
    solved = []
    for sc in builtin_scenarios():
        s = sc.structure()
        if s.kind == "symplectic_pair" or sc.name == "t4-cc-perturbed":
            continue
        for t in T_SAMPLES:
            worst = max(worst, _reeb_residual(s, sc.model.random_points(rng, 40), t))
        solved.append(sc.name)
    product = builtin("t6-cc-structure").structure()
    com = check_commutation_rank_prop(product.alpha, product.beta, product.model.grid(4), 0.5)
    perturbed = builtin("t4-cc-perturbed").structure()
    non = check_commutation_rank_prop(perturbed.alpha, perturbed.beta, perturbed.model.grid(5))
    sides = com.agrees and com.commuting and non.agrees and not non.commuting
    projections = []
    for name in ("t4-contact-pair", "t6-cc-structure", "t4-cc-perturbed"):
        s = builtin(name).structure()
        rep = check_leafwise_projection(s.alpha, s.beta, s.h, s.k, s.model.random_points(rng, 40), 0.0, tol=1e-8)
        projections.append(rep.error if rep.holds else float("inf"))
    ok = worst <= 1e-9 and sides and max(projections) <= 1e-8 and len(projections) >= 3
    verdict(3, ok, f"Reeb residual {worst:.2e} over {solved}; commutation sides agree: {sides}; "
                   f"projection errors {max(projections):.2e} on {len(projections)} scenarios")


def _isotopy(name, settings=Settings()):
    sc = builtin(name)
    task = next(tk for tk in sc.tasks if tk["op"] == "moser")
    prims = {role: sc.forms[f] for role, f in task.get("primitives", {}).items()}
    problem = MoserProblem(sc.structure(), prims, settings.fourier_order)
    seeds = quasi_random_seeds(sc.model, settings.seeds)
    start = time.perf_counter()
    result = integrate_isotopy(problem, seeds, settings.t_steps, settings.tol)
    rep = verify_isotopy(result, problem)
    return problem, seeds, rep, time.perf_counter() - start


def test_criterion_4_moser_stability():
    lines, ok = [], True
    for name in ("t4-exact", "suspension-hamiltonian"):
        problem, seeds, rep, elapsed = _isotopy(name)
        study = step_halving_study(problem, seeds, coarse=10)
        good = rep.pullback_sup <= 1e-6 and study["ratio"] >= 12 and elapsed < 120
        ok = ok and good
        lines.append(f"{name}: pullback {rep.pullback_sup:.2e}, halving ratio {study['ratio']:.1f}, {elapsed:.0f} s")
    verdict(4, ok, "; ".join(lines))


def test_criterion_5_gray_stability():
    lines, ok = [], True
    for name in ("t4-contact-pair", "t5-cs-structure", "t6-cc-structure"):
        _, _, rep, _ = _isotopy(name)
        good = rep.proportionality_sup <= 1e-6 and rep.factor_mismatch <= 1e-6
        ok = ok and good
        lines.append(f"{name}: proportionality {rep.proportionality_sup:.2e}, factor gap {rep.factor_mismatch:.2e}")
    verdict(5, ok, "; ".join(lines))


def test_criterion_6_necessity():
    ghys = builtin("ghys-nil")
    omega = ghys.forms["omega"]
    periods = de_rham_periods(omega, [(2, 3), (2, 4), (3, 4)], T_SAMPLES)
    variation = float(np.max(periods.max(axis=0) - periods.min(axis=0)))
    N = 4
    res = find_basic_primitive(ghys.forms["omega_dot"], ghys.foliations["G"], order=N, convergence=True)
    floor = min(res.residual_by_order[N], res.residual_by_order[2 * N])
    twisted = builtin("ghys-nil").structure()
    nec_ghys = necessity_check(twisted, order=N)
    nec_t4 = necessity_check(builtin("t4-exact").structure(), order=N)
    ok = (variation <= 1e-9 and floor >= TWISTED_RESIDUAL_FLOOR
          and nec_ghys.verdict == "fail" and nec_t4.verdict == "pass")
    verdict(6, ok, f"period variation {variation:.1e}, residual {floor:.6f} at N={N},{2 * N}; "
                   f"ghys-nil {nec_ghys.verdict}, t4-exact {nec_t4.verdict}")


def test_criterion_7_basic_cohomology():
    t4 = builtin("t4-exact")
    flat = [basic_h2_dimension(t4.model, FrameSpan([3, 4]), N) for N in (1, 2, 4)]
    ghys = builtin("ghys-nil")
    growth = [(N, basic_h2_dimension(ghys.model, ghys.foliations["G"], N),
               basic_h2_dimension(ghys.model, ghys.foliations["G"], 2 * N)) for N in (2, 3)]
    ok = flat == [1, 1, 1] and all(b > a for _, a, b in growth)
    verdict(7, ok, f"T4 fiber basic H2 {flat}; twisted fiber (N, dim N, dim 2N) {growth}")


def test_criterion_8_drift_guard():
    sc = builtin("fol-drift")
    code, report = run(sc, "moser", Settings(seeds=4, t_steps=20))
    outcome = report["tasks"][-1]["outcome"]
    drift = report["tasks"][-1]["details"]["necessity"]["drift"]
    verdict(8, outcome == "inapplicable", f"fol-drift moser outcome {outcome!r} (drift {drift:.3g})")


def test_criterion_9_determinism():
    settings = Settings(grid=9, t_steps=100, seeds=10)
    differing = []
    for sc in builtin_scenarios():
        first = report_json(run(sc, "all", settings)[1])
        second = report_json(run(builtin(sc.name), "all", settings)[1])
        if first != second:
            differing.append(sc.name)
    verdict(9, not differing, f"reports differ for {differing}" if differing else "all builtin reports byte-identical")
