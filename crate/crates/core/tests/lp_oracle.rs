mod common;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use rpsubspace::sparserep::{basis_pursuit, BasisPursuitOptions, Dictionary, SolverStatus};

fn gaussian(rng: &mut Xoshiro256PlusPlus, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

#[test]
fn admm_matches_lp_on_small_instances() {
    let opts = BasisPursuitOptions::default();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    for case in 0..40 {
        let m = rng.random_range(1..=6);
        let t = rng.random_range(m..=12);
        let dict = Dictionary::new(gaussian(&mut rng, m, t), vec![1; t]).unwrap();
        let y = DVector::from_fn(m, |_, _| rng.sample(StandardNormal));
        let code = basis_pursuit(&dict, &y, &opts).unwrap();
        let (opt, _) = common::lp_l1_min(dict.columns(), &y).expect("lp solves");
        assert_eq!(code.status, SolverStatus::Converged, "case {case}");
        assert!((code.l1_norm() - opt).abs() <= 10.0 * opts.tol, "case {case}: {} vs {opt}", code.l1_norm());
    }
}

#[test]
fn lp_and_admm_agree_on_infeasibility() {
    // rank-one dictionary, y off its span
    let d = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, -1.0, 1.0, 2.0, -1.0]);
    let y = DVector::from_vec(vec![1.0, -1.0]);
    let dict = Dictionary::new(d, vec![1, 1, 2]).unwrap();
    assert!(common::lp_l1_min(dict.columns(), &y).is_none());
    let code = basis_pursuit(&dict, &y, &BasisPursuitOptions::default()).unwrap();
    assert_eq!(code.status, SolverStatus::Infeasible);
}

#[test]
fn sparse_ground_truth_recovered() {
    // a 1-sparse y = column j has optimum exactly 1
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
    let dict = Dictionary::new(gaussian(&mut rng, 6, 12), vec![1; 12]).unwrap();
    let y = dict.columns().column(4).into_owned();
    let (opt, w) = common::lp_l1_min(dict.columns(), &y).unwrap();
    assert!((opt - 1.0).abs() < 1e-9);
    assert!((w[4] - 1.0).abs() < 1e-9);
    let code = basis_pursuit(&dict, &y, &BasisPursuitOptions::default()).unwrap();
    assert!((code.w[4] - 1.0).abs() < 1e-5);
}
