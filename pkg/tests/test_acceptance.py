import math
import time

import numpy as np
from acceptance_report import report
from click.testing import CliRunner
from conftest import random_contraction

from noonsim.background import FIG2_ANALYZER, background_decomposition, calibrate_operating_point
from noonsim.cli import main
from noonsim.construction import (
    REFERENCE_SUCCESS,
    NoonSpec,
    build_noon_target,
    check_sixfold_symmetry,
    polarization_product,
    run_paper_chain,
    to_circular,
)
from noonsim.detection import (
    AnalyzerConfig,
    DetectionPattern,
    measure_visibility_bound_distinguishable,
    pattern_distribution,
    pattern_probability,
    phase_sensitivity,
)
from noonsim.elements import ModeTransform, apply_mode_transform, lift_basis_state, phase_shift
from noonsim.fock import (
    expectation_A_N,
    fidelity_up_to_global_phase,
    fock_amplitude_oracle,
    noon_state,
    occupations,
)
from noonsim.fringes import FringeData, fit_fringe
from noonsim.sampling import sample_counts


def test_criterion_01_noon_construction():
    t0 = time.perf_counter()
    result = run_paper_chain(0.0)
    fid = fidelity_up_to_global_phase(result.state, build_noon_target(NoonSpec(3)))
    elapsed = time.perf_counter() - t0
    pp = fidelity_up_to_global_phase(
        result.intermediates["partial_polarizer"], polarization_product([math.radians(60), math.radians(-60)])
    )
    lo = result.intermediates["lo_injection"]
    mixed = check_sixfold_symmetry(lo)
    lr = to_circular(lo)
    two_term = {o for o, a in lr.amplitudes.items() if abs(a) > 1e-12} == {(3, 0), (0, 3)}
    ok = fid >= 1 - 1e-12 and pp >= 1 - 1e-12 and mixed < 1e-12 and two_term and elapsed < 1.0
    report(1, "NOON construction", ok,
           f"fidelity={fid:.15f} pm60={pp:.15f} mixed_LR={mixed:.1e} t={elapsed:.3f}s")


def test_criterion_02_super_resolution():
    phis = np.linspace(0, 2 * math.pi, 100)
    worst = 0.0
    for n in (1, 2, 3, 4):
        for phi in phis:
            state = apply_mode_transform(noon_state(n, 0.0), phase_shift(phi))
            worst = max(worst, abs(expectation_A_N(state, n) - math.cos(n * phi)))
    report(2, "<A_N> = cos(N phi)", worst < 1e-10, f"max error {worst:.2e} over N=1..4, 100 points")


def test_criterion_03_fringe_forms():
    analyzer = AnalyzerConfig(math.radians(45), 2, 1)
    worst21 = worst30 = worst_sum = 0.0
    for phi in np.linspace(0, 2 * math.pi, 100):
        s = run_paper_chain(phi).state
        worst21 = max(worst21, abs(pattern_probability(s, analyzer, DetectionPattern(2, 1)) - 3 * (1 - math.cos(3 * phi)) / 8))
        worst30 = max(worst30, abs(pattern_probability(s, analyzer, DetectionPattern(3, 0)) - (1 + math.cos(3 * phi)) / 8))
        worst_sum = max(worst_sum, abs(sum(pattern_distribution(s, analyzer).values()) - 1))
    ok = max(worst21, worst30) < 1e-10 and worst_sum < 1e-10
    report(3, "fringe forms", ok, f"|2,1> err {worst21:.1e}, |3,0> err {worst30:.1e}, sum err {worst_sum:.1e}")


def test_criterion_04_oracle_equivalence():
    rng = np.random.default_rng(20040513)
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    for i in range(50):
        dim = 2 + i % 3
        m = random_contraction(rng, dim, unitary=i % 2 == 0)
        ModeTransform(m)
        for n in range(1, 5):
            outs = occupations(dim, n)
            for occ_in in outs:
                lifted = lift_basis_state(m, occ_in)
                for occ_out in outs:
                    err = abs(lifted.get(occ_out, 0) - fock_amplitude_oracle(m, occ_in, occ_out))
                    worst = max(worst, err)
                    checked += 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 30
    report(4, "permanent oracle", ok, f"max error {worst:.1e} over {checked} amplitudes, t={elapsed:.1f}s")


def test_criterion_05_distinguishable_bound():
    bound = measure_visibility_bound_distinguishable()
    ok = abs(bound.visibility - 0.20) < 1e-3
    report(5, "distinguishable-photon bound", ok,
           f"max 3phi visibility {bound.visibility:.6f} (1phi {bound.residual_1phi:.1e}, 2phi {bound.residual_2phi:.1e})")


def test_criterion_06_heisenberg():
    rng = np.random.default_rng(6)
    worst = 0.0
    count = 0
    for n in (1, 2, 3, 4):
        candidates = rng.uniform(0, 2 * math.pi, 60)
        # keep away from the stationary points sin(N phi) = 0
        usable = [phi for phi in candidates if abs(math.sin(n * phi)) > 0.05][:20]
        for phi in usable:
            worst = max(worst, abs(phase_sensitivity(n, phi) - 1 / n))
            count += 1
    report(6, "Heisenberg sensitivity", worst < 1e-12 and count == 80, f"max |dphi - 1/N| {worst:.1e} at {count} points")


def test_criterion_07_reference_constant():
    chain = run_paper_chain(0.0).success_probability
    ok = abs(REFERENCE_SUCCESS - 0.7249) < 1e-4
    report(7, "reference success constant", ok, f"closed form {REFERENCE_SUCCESS:.6f}; chain-computed {chain:.6f}")


def test_criterion_08_background_ordering():
    model = calibrate_operating_point()
    d = background_decomposition(model.rates(FIG2_ANALYZER))
    a = {k: d.amplitude(k) for k in range(4)}
    ok = a[3] < a[1] < a[2] and a[3] < a[0]
    report(8, "background harmonic ordering", ok,
           "amp(0..3) = " + "/".join(f"{a[k]:.2f}" for k in range(4)))


def test_criterion_09_fit_correctness():
    t0 = time.perf_counter()
    phi = np.arange(60) * (2 * math.pi / 60)
    clean = fit_fringe(FringeData.from_mean(phi, 8 * (1 + 0.42 * np.cos(3 * phi))), 3)
    mean = 1e4 * (1 + 0.42 * np.cos(3 * phi))
    covered = 0
    for seed in range(100):
        counts = sample_counts(mean, seed)
        f = fit_fringe(FringeData(phi, mean, np.sqrt(counts), counts), 3)
        covered += abs(f.visibility - 0.42) <= 3 * f.visibility_err
    elapsed = time.perf_counter() - t0
    ok = abs(clean.visibility - 0.42) < 1e-10 and clean.residual < 1e-10 and covered >= 95 and elapsed < 10
    report(9, "fit correctness", ok,
           f"noiseless V={clean.visibility:.12f} resid={clean.residual:.1e}; {covered}/100 within 3 SE; t={elapsed:.1f}s")


def test_criterion_10_determinism(tmp_path):
    runner = CliRunner()
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        res = runner.invoke(main, ["reproduce", "fig2c", "--seed", "7", "--out", str(d)], catch_exceptions=False)
        assert res.exit_code == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    report(10, "reproduce determinism", ok, f"{len(outs[0])} files byte-identical")
