//! Cross-checks of the library against independently written oracles:
//! angular-momentum algebra for branching, closed-form two-level dynamics,
//! elementary quadrature for the optics integrals, and a literal Markov
//! chain for the saturated cycling limit.

mod support;

use ionsim_core::atom::{self, build_basis, HyperfineLevel, LevelSplittings, Manifold};
use ionsim_core::collection::{
    collection_fraction, dipole_pattern, CollectionGeometry, Weighting,
};
use ionsim_core::lindblad::{
    evolve, CollapseSet, DensityMatrix, DriveTerm, StepControl,
};
use ionsim_core::protocol::{generation_probability, rabi_transfer_probability};
use ionsim_core::spectrometer::{gaussian_overlap_infidelity, SpotPair};
use support::{branching_oracle, simpson, simpson_2d, CyclingChain};

#[test]
fn branching_table_matches_angular_momentum_oracle() {
    let basis = build_basis();
    for upper in basis.levels().iter().filter(|l| l.manifold == Manifold::Excited) {
        let oracle = branching_oracle(upper.f as i64, upper.m_f as i64);
        let table = atom::branching_table(*upper).unwrap();
        assert_eq!(table.len(), oracle.len(), "{upper}: channel count");
        for (f, m, b) in &oracle {
            let channel = table
                .iter()
                .find(|c| c.lower.f as i64 == *f && c.lower.m_f as i64 == *m)
                .unwrap_or_else(|| panic!("{upper}: missing channel to F={f}, mF={m}"));
            assert!(
                (channel.branching - b).abs() < 1e-12,
                "{upper} -> F={f},mF={m}: {} vs oracle {b}",
                channel.branching
            );
        }
    }
}

#[test]
fn oracle_3j_6j_sanity() {
    // a couple of textbook values, arguments doubled
    // {1/2 1/2 1; 1/2 1/2 1} = 1/6
    assert!((support::wigner_6j(1, 1, 2, 1, 1, 2).abs() - 1.0 / 6.0).abs() < 1e-12);
    // 3j(1 1 0; 0 0 0) = -1/sqrt(3)
    assert!((support::wigner_3j(2, 2, 0, 0, 0, 0) + 1.0 / 3f64.sqrt()).abs() < 1e-12);
    // 3j(1 1 2; 1 -1 0) = 1/sqrt(30)
    assert!((support::wigner_3j(2, 2, 4, 2, -2, 0) - 1.0 / 30f64.sqrt()).abs() < 1e-12);
}

#[test]
fn rabi_formula_matches_lindblad_across_random_parameters() {
    // microwave channel, no dissipation: the analytic transfer formula and
    // the integrator must agree to 1e-6
    let upper = HyperfineLevel::ground(1, -1);
    let lower = HyperfineLevel::ground(0, 0);
    let basis = build_basis();
    let upper_idx = basis.index_of(&upper).unwrap();
    // deterministic parameter sweep spanning under- and over-rotation
    let mut cases = Vec::new();
    for (i, &omega) in [4.0e4, 1.848e5, 6.1e5].iter().enumerate() {
        for (j, &detuning) in [0.0, 4.2e3, 9.0e3, -17.0e3].iter().enumerate() {
            let t = (0.3 + 0.45 * i as f64 + 0.2 * j as f64) * std::f64::consts::PI / omega;
            cases.push((omega, detuning, t));
        }
    }
    for (omega, detuning, t) in cases {
        let drive = DriveTerm::single(upper, lower, detuning, omega, 0.0, t).unwrap();
        let res = evolve(
            &DensityMatrix::pure(atom::S00),
            &[drive],
            &CollapseSet::none(),
            &LevelSplittings::default(),
            (0.0, t),
            &StepControl::default(),
            2,
        )
        .unwrap();
        let simulated = res.final_populations[upper_idx];
        let analytic = rabi_transfer_probability(omega, detuning, t);
        assert!(
            (simulated - analytic).abs() < 1e-6,
            "omega={omega:.3e} delta={detuning:.1e} t={t:.3e}: {simulated} vs {analytic}"
        );
    }
}

#[test]
fn integrator_converges_under_tolerance_halving() {
    let drive = ionsim_core::protocol::excitation_drive(3.7e7, 51e-9);
    let run = |rtol: f64| {
        evolve(
            &DensityMatrix::pure(atom::S1M1),
            &[drive.clone()],
            &CollapseSet::spontaneous(8.1e-9),
            &LevelSplittings::default(),
            (0.0, 51e-9 + 12.0 * 8.1e-9),
            &StepControl { rtol, atol: rtol * 1e-4, ..Default::default() },
            2,
        )
        .unwrap()
        .final_populations
    };
    let coarse = run(2e-10);
    let fine = run(1e-10);
    for (a, b) in coarse.iter().zip(&fine) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn saturating_pulse_splits_population_like_the_markov_chain() {
    // strong long pulse: everything funnels into the two absorbing states
    let chain = CyclingChain::run(200);
    assert!((chain.dark_nu1 - 0.5).abs() < 1e-12);
    assert!((chain.dark_nu0 - 0.5).abs() < 1e-12);

    let p = generation_probability(4e8, 0.8e-6, 8.1e-9).unwrap();
    assert!((p - chain.dark_nu1).abs() <= 0.005, "p = {p}");
}

#[test]
fn generation_probability_is_symmetric_between_branches() {
    // both absorbing states receive identical flux at every drive strength
    for omega in [1e7, 3.7e7, 1e8] {
        let drive = ionsim_core::protocol::excitation_drive(omega, 51e-9);
        let res = evolve(
            &DensityMatrix::pure(atom::S1M1),
            &[drive],
            &CollapseSet::spontaneous(8.1e-9),
            &LevelSplittings::default(),
            (0.0, 51e-9 + 12.0 * 8.1e-9),
            &StepControl::default(),
            2,
        )
        .unwrap();
        let gen = ionsim_core::lindblad::photon_generation_probabilities(&res);
        assert!((gen.p_nu1 - gen.p_nu0).abs() < 1e-9);
    }
}

#[test]
fn collection_fractions_match_simpson_oracle() {
    let g = CollectionGeometry::paper_default();
    let d = g.distance_m;
    let oracle = |pattern: &dyn Fn(f64) -> f64| {
        simpson_2d(
            |x, y| {
                let r2 = x * x + y * y + d * d;
                let r = r2.sqrt();
                pattern((d / r).acos()) * d / (r2 * r)
            },
            -0.5 * g.width_m,
            0.5 * g.width_m,
            -0.5 * g.height_m,
            0.5 * g.height_m,
            400,
        )
    };
    let cases: [(Weighting, Box<dyn Fn(f64) -> f64>); 3] = [
        (Weighting::Geometric, Box::new(|_| 1.0 / (4.0 * std::f64::consts::PI))),
        (Weighting::Dipole(-1), Box::new(|th: f64| dipole_pattern(-1, th))),
        (Weighting::Dipole(0), Box::new(|th: f64| dipole_pattern(0, th))),
    ];
    for (w, pattern) in cases {
        let lib = collection_fraction(&g, w).unwrap();
        let simpson_value = oracle(pattern.as_ref());
        assert!(
            (lib - simpson_value).abs() < 1e-6,
            "{w:?}: {lib} vs simpson {simpson_value}"
        );
    }
}

#[test]
fn dipole_patterns_normalize_by_independent_quadrature() {
    for q in [-1, 0, 1] {
        let integral = simpson(
            |th| dipole_pattern(q, th) * std::f64::consts::TAU * th.sin(),
            0.0,
            std::f64::consts::PI,
            2000,
        );
        assert!((integral - 1.0).abs() < 1e-9, "q={q}: {integral}");
    }
}

#[test]
fn overlap_infidelity_matches_2d_intensity_quadrature() {
    let spots = SpotPair::paper_default();
    // wrong-side power of one Gaussian spot: integrate its intensity over
    // the half-plane beyond the midline, normalized by total power
    let wrong_side = |w: f64| {
        let total = std::f64::consts::PI * w * w / 2.0;
        simpson_2d(
            |x, y| (-2.0 * (x * x + y * y) / (w * w)).exp(),
            spots.separation_m / 2.0,
            spots.separation_m / 2.0 + 8.0 * w,
            -8.0 * w,
            8.0 * w,
            600,
        ) / total
    };
    let oracle = 0.5 * (wrong_side(0.5 * spots.diameter_1_m) + wrong_side(0.5 * spots.diameter_2_m));
    let lib = gaussian_overlap_infidelity(&spots);
    assert!(
        (lib - oracle).abs() < 1e-8,
        "erfc route {lib} vs quadrature {oracle}"
    );
}
