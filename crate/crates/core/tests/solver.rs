mod common;

use atom_diode::fields::{GaussianProfile, PotentialMatrix};
use atom_diode::params::{Atom, CM_PER_S};
use atom_diode::presets;
use atom_diode::scheme::{upper_sqrt, Channel, ChannelSet, Incidence};
use atom_diode::solver::{
    potential_for, solve, solve_scattering, SolveError, SolverGrid, CONVERGENCE_TOLERANCE,
};
use common::{rel, scalar_probabilities, scalar_rt};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn channels(asymptote: &[Complex64], w: f64, theta: f64) -> (ChannelSet, Incidence) {
    let atom = Atom::neon20();
    let inc = Incidence::new(w, theta, 0);
    let kx = inc.kx(&atom);
    let moh = atom.mass_over_hbar();
    let channels = asymptote
        .iter()
        .map(|d| Channel {
            ky: 0.0,
            delta3d: 0.0,
            diag: *d,
            kx: if *d == c(0.0) { c(kx) } else { upper_sqrt(c(kx * kx) - d * moh) },
        })
        .collect();
    (
        ChannelSet {
            kx,
            mass_over_hbar: moh,
            channels,
        },
        inc,
    )
}

fn solve_default(m: &PotentialMatrix, cs: &ChannelSet, inc: &Incidence) -> atom_diode::ScatteringResult {
    let grid = SolverGrid::default_for(m, cs);
    let first = solve_scattering(m, cs, inc, &grid).unwrap();
    atom_diode::solver::verify_convergence(first, m, cs, inc).unwrap()
}

#[test]
fn free_propagation_is_total_transmission() {
    for n in 1..=4 {
        let m = PotentialMatrix::new(vec![c(0.0); n]);
        let (cs, inc) = channels(&vec![c(0.0); n], 0.1, 0.3);
        let r = solve_default(&m, &cs, &inc);
        assert!((r.prob_transmission[0] - 1.0).abs() < 1e-12);
        // only the propagator's phase error remains
        assert!((r.transmission[0] - c(1.0)).norm() < 1e-5, "{}", r.transmission[0]);
        assert!(r.prob_reflection.iter().all(|p| *p < 1e-12), "{:?}", r.prob_reflection);
        assert!(r.error_estimate.unwrap() < 1e-10);
    }
}

#[test]
fn gaussian_barrier_far_below_top_reflects() {
    let ne = Atom::neon20();
    let w = 4e7;
    let sigma = 15e-6;
    let m = PotentialMatrix::new(vec![c(0.0)]).with_term(0, 0, GaussianProfile::new(w, 0.0, sigma).unwrap());
    let (cs, inc) = channels(&[c(0.0)], 10.0 * CM_PER_S, 0.0);
    let r = solve_default(&m, &cs, &inc);
    assert!(r.prob_reflection[0] > 1.0 - 1e-4);
    let moh = ne.mass_over_hbar();
    let k = cs.kx;
    let u = |x: f64| moh * w * (-0.5 * (x / sigma).powi(2)).exp() - k * k;
    let (pr, pt) = scalar_probabilities(&u, k, r.grid.x_min, r.grid.x_max, 200_000);
    assert!((r.prob_reflection[0] - pr).abs() < 1e-6);
    assert!((r.prob_transmission[0] - pt).abs() < 1e-6);
}

#[test]
fn amplitudes_match_oracle_phases() {
    let moh = Atom::neon20().mass_over_hbar();
    // narrow, asymmetric bump and well: sizeable R and T
    let g1 = GaussianProfile::new(2e5, -0.2e-6, 0.3e-6).unwrap();
    let g2 = GaussianProfile::new(-1e5, 0.8e-6, 0.5e-6).unwrap();
    let m = PotentialMatrix::new(vec![c(0.0)]).with_term(0, 0, g1).with_term(0, 0, g2);
    for w in [2.0, -2.0, 2.5, -2.3] {
        let (cs, inc) = channels(&[c(0.0)], w * CM_PER_S, 0.0);
        let r = solve_default(&m, &cs, &inc);
        let k = cs.kx;
        let sign = if w > 0.0 { 1.0 } else { -1.0 };
        let u = |x: f64| moh * (g1.value(sign * x) + g2.value(sign * x)) - k * k;
        let (ro, to) = scalar_rt(&u, k, -10e-6, 10e-6, 20_000);
        // phases carry the propagator's O((kh)⁴) error accumulated over ~10³ rad
        assert!((r.reflection[0] - ro).norm() < 5e-5, "w={w}: R {} vs {ro}", r.reflection[0]);
        assert!((r.transmission[0] - to).norm() < 5e-5, "w={w}: T {} vs {to}", r.transmission[0]);
        assert!((r.prob_reflection[0] - ro.norm_sqr()).abs() < 1e-7);
        assert!(r.prob_reflection[0] > 1e-3 && r.prob_transmission[0] > 1e-3);
    }
}

/// Random diagonal problems: every channel sees its own Gaussians only.
fn diagonal_case(rng: &mut ChaCha8Rng) -> (PotentialMatrix, ChannelSet, Incidence) {
    let n = rng.gen_range(1..=4);
    let mut asym = vec![c(0.0)];
    for _ in 1..n {
        asym.push(c(rng.gen_range(-4e5..2e5)));
    }
    let w = rng.gen_range(3.0..25.0) * CM_PER_S * if rng.gen_bool(0.3) { -1.0 } else { 1.0 };
    let theta = rng.gen_range(-1.2..1.2);
    let (cs, inc) = channels(&asym, w, theta);
    let mut m = PotentialMatrix::new(asym);
    for j in 0..n {
        for _ in 0..rng.gen_range(1..=2) {
            let g = GaussianProfile::new(
                rng.gen_range(-1e6..4e6),
                rng.gen_range(-30e-6..30e-6),
                rng.gen_range(5e-6..15e-6),
            )
            .unwrap();
            m = m.with_term(j, j, g);
        }
    }
    (m, cs, inc)
}

#[test]
fn diagonal_problems_match_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let moh = Atom::neon20().mass_over_hbar();
    let mut worst: f64 = 0.0;
    for _ in 0..60 {
        let (m, cs, inc) = diagonal_case(&mut rng);
        let r = solve_default(&m, &cs, &inc);
        let k = cs.kx;
        let sign = if inc.from_left() { 1.0 } else { -1.0 };
        let terms: Vec<_> = m.terms().iter().filter(|t| t.row == 0).map(|t| t.profile).collect();
        let u = |x: f64| moh * terms.iter().map(|g| g.value(sign * x)).sum::<f64>() - k * k;
        let (x_l, x_r) = (r.grid.x_min.min(-r.grid.x_max), r.grid.x_max.max(-r.grid.x_min));
        let (pr, pt) = scalar_probabilities(&u, k, x_l, x_r, 100_000);
        worst = worst.max((r.prob_reflection[0] - pr).abs()).max((r.prob_transmission[0] - pt).abs());
        for j in 1..cs.len() {
            assert!(r.prob_reflection[j].abs() < 1e-20 && r.prob_transmission[j].abs() < 1e-20);
        }
    }
    assert!(worst < 1e-6, "worst {worst:e}");
}

#[test]
fn flux_is_conserved_without_decay() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["fig3b", "fig7b"] {
        let cfg = presets::by_name(name).unwrap().scheme_config().unwrap();
        for _ in 0..15 {
            let w = rng.gen_range(2.0..40.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let theta = rng.gen_range(-80.0..80.0);
            match solve(&cfg, &Incidence::from_lab_units(w, theta, 0)) {
                Ok(r) => assert!(r.absorption.abs() < 1e-6, "{name} {w} {theta}: {}", r.absorption),
                Err(e) => panic!("{name} {w} {theta}: {e}"),
            }
        }
    }
}

#[test]
fn decay_only_removes_flux() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for name in ["fig5", "fig8"] {
        let cfg = presets::by_name(name).unwrap().scheme_config().unwrap();
        for _ in 0..6 {
            let w = rng.gen_range(3.0..30.0);
            let theta = rng.gen_range(-70.0..70.0);
            let r = solve(&cfg, &Incidence::from_lab_units(w, theta, 0)).unwrap();
            assert!(r.absorption > -1e-6, "{name}: {}", r.absorption);
            assert!(r.prob_reflection.iter().chain(&r.prob_transmission).all(|p| *p >= 0.0));
        }
    }
}

#[test]
fn angle_enters_only_through_kx_for_a_mirror() {
    let m = PotentialMatrix::new(vec![c(0.0)])
        .with_term(0, 0, GaussianProfile::new(3e5, 5e-6, 15e-6).unwrap());
    let (cs1, inc1) = channels(&[c(0.0)], 4.0 * CM_PER_S, 0.0);
    let theta = 1.1f64;
    let (cs2, inc2) = channels(&[c(0.0)], 4.0 * CM_PER_S / theta.cos(), theta);
    let a = solve_default(&m, &cs1, &inc1);
    let b = solve_default(&m, &cs2, &inc2);
    assert!(rel(cs1.kx, cs2.kx) < 1e-14);
    assert!(a.max_probability_change(&b) < 1e-8);
}

#[test]
fn fig3b_left_ten_cm_s_transfers_to_excited() {
    let cfg = presets::fig3b().scheme_config().unwrap();
    let r = solve(&cfg, &Incidence::from_lab_units(10.0, 0.0, 0)).unwrap();
    assert!(r.prob_transmission[1] >= 0.99, "{:?}", r.prob_transmission);
    assert!(r.error_estimate.unwrap() <= CONVERGENCE_TOLERANCE);
}

#[test]
fn closed_channels_carry_no_probability() {
    let cfg = presets::fig3a().scheme_config().unwrap();
    // below the pump threshold channel 2 is evanescent
    let inc = Incidence::from_lab_units(2.0, 0.0, 0);
    let r = solve(&cfg, &inc).unwrap();
    assert_eq!(r.wavenumbers[1].re, 0.0);
    assert_eq!(r.prob_reflection[1], 0.0);
    assert_eq!(r.prob_transmission[1], 0.0);
    assert!(r.absorption.abs() < 1e-6);
}

#[test]
fn rejected_incidences() {
    let cfg = presets::fig3a().scheme_config().unwrap();
    let e = solve(&cfg, &Incidence::from_lab_units(2.0, 0.0, 1)).unwrap_err();
    assert_eq!(e, SolveError::ClosedIncidentChannel { channel: 1 });
    let e = solve(&cfg, &Incidence::from_lab_units(10.0, 89.9, 0)).unwrap_err();
    assert!(matches!(e, SolveError::GrazingIncidence { .. }), "{e}");
}

#[test]
fn grid_invariants_enforced() {
    let cfg = presets::fig3b().scheme_config().unwrap();
    let inc = Incidence::from_lab_units(10.0, 0.0, 0);
    let m = potential_for(&cfg, &inc);
    let cs = atom_diode::scheme::channel_set(&cfg, &inc);
    let g = SolverGrid::default_for(&m, &cs);
    assert!(g.points() >= 100);
    assert!(g.effective_step() * cs.channels.iter().map(|c| c.kx.re).fold(0.0, f64::max) <= 0.1);
    let coarse = SolverGrid { step: g.step * 3.0, ..g };
    assert!(matches!(solve_scattering(&m, &cs, &inc, &coarse), Err(SolveError::InvalidGrid(_))));
    let few = SolverGrid::new(0.0, 1e-9, 1e-10);
    assert!(matches!(solve_scattering(&m, &cs, &inc, &few), Err(SolveError::InvalidGrid(_))));
}

#[test]
fn solves_are_bit_identical() {
    let cfg = presets::fig8().scheme_config().unwrap();
    let inc = Incidence::from_lab_units(12.0, -30.0, 0);
    assert_eq!(solve(&cfg, &inc).unwrap(), solve(&cfg, &inc).unwrap());
}

/// Error against a fine reference shrinks by ~2⁴ per halving.
#[test]
fn propagator_is_fourth_order() {
    let m = PotentialMatrix::new(vec![c(0.0), c(-2e5)])
        .with_term(0, 0, GaussianProfile::new(2e6, 4e-6, 3e-6).unwrap())
        .with_term(1, 1, GaussianProfile::new(-3e6, -2e-6, 2e-6).unwrap())
        .with_term(0, 1, GaussianProfile::new(3e6, 0.0, 3e-6).unwrap());
    let (cs, inc) = channels(&[c(0.0), c(-2e5)], 3.0 * CM_PER_S, 0.0);
    let base = SolverGrid::default_for(&m, &cs);
    let grid = |f: f64| SolverGrid { step: base.step * f, ..base };
    let reference = solve_scattering(&m, &cs, &inc, &grid(1.0 / 64.0)).unwrap();
    let err = |f: f64| {
        let r = solve_scattering(&m, &cs, &inc, &grid(f)).unwrap();
        (r.reflection[0] - reference.reflection[0]).norm() + (r.transmission[1] - reference.transmission[1]).norm()
    };
    let (e1, e2, e3) = (err(1.0), err(0.5), err(0.25));
    let (o1, o2) = ((e1 / e2).log2(), (e2 / e3).log2());
    assert!(o1 > 3.5 && o1 < 4.5 && o2 > 3.5 && o2 < 4.5, "errors {e1:e} {e2:e} {e3:e}, orders {o1} {o2}");
}

/// A box cutting into the Gaussian changes the result far more than halving
/// the step does.
#[test]
fn truncation_shows_up_as_box_dependence() {
    let sigma = 15e-6;
    let m = PotentialMatrix::new(vec![c(0.0)]).with_term(0, 0, GaussianProfile::new(5e5, 0.0, sigma).unwrap());
    let (cs, inc) = channels(&[c(0.0)], 4.0 * CM_PER_S, 0.0);
    let step = SolverGrid::default_for(&m, &cs).step;
    let narrow = SolverGrid::new(-2.0 * sigma, 2.0 * sigma, step);
    let wide = SolverGrid::new(-4.0 * sigma, 4.0 * sigma, step);
    let a = solve_scattering(&m, &cs, &inc, &narrow).unwrap();
    let a2 = solve_scattering(&m, &cs, &inc, &narrow.refined()).unwrap();
    let b = solve_scattering(&m, &cs, &inc, &wide).unwrap();
    let by_step = a.max_probability_change(&a2);
    let by_box = a.max_probability_change(&b);
    assert!(by_box > 1e3 * by_step, "box {by_box:e}, step {by_step:e}");
    let eight = SolverGrid::new(-8.0 * sigma, 8.0 * sigma, step);
    let ten = SolverGrid::new(-10.0 * sigma, 10.0 * sigma, step);
    let e = solve_scattering(&m, &cs, &inc, &eight).unwrap();
    let t = solve_scattering(&m, &cs, &inc, &ten).unwrap();
    let e2 = solve_scattering(&m, &cs, &inc, &eight.refined()).unwrap();
    // what is left between 8σ and 10σ boxes is discretisation, not truncation
    assert!(e.max_probability_change(&t) < e.max_probability_change(&e2));
}
