mod common;

use common::tableau::{solve, Oracle};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use reachstl::optim::{find_counterexample, lp_solve, LinearProgram, LpOutcome, DEFAULT_EPSILON};
use reachstl::setops::Polytope;

fn lp_instance() -> impl Strategy<Value = (usize, Vec<f64>, Vec<Vec<f64>>, Vec<f64>, f64)> {
    (1usize..5, 0usize..7).prop_flat_map(|(n, m)| {
        (
            Just(n),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), m),
            prop::collection::vec(-1.0f64..1.0, m),
            0.5f64..2.0,
        )
    })
}

fn to_matrix(rows: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
}

/// Smallest `|alpha|_1` over one fixed violated row per polytope, by enumeration.
fn enumerate(polys: &[Polytope], dim: usize, eps: f64) -> Option<f64> {
    let mut choice = vec![0usize; polys.len()];
    let mut best: Option<f64> = None;
    loop {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (p, &k) in polys.iter().zip(&choice) {
            let mut row = vec![0.0; 2 * dim];
            for i in 0..dim {
                row[i] = -p.c[(k, i)];
                row[dim + i] = p.c[(k, i)];
            }
            a.push(row);
            b.push(-(p.d[k] + eps));
        }
        if let Oracle::Optimal { value, .. } = solve(&vec![1.0; 2 * dim], &a, &b, &vec![0.0; 2 * dim], &vec![1.0; 2 * dim]) {
            best = Some(best.map_or(value, |v: f64| v.min(value)));
        }
        let mut j = 0;
        loop {
            if j == polys.len() {
                return best;
            }
            choice[j] += 1;
            if choice[j] < polys[j].num_constraints() {
                break;
            }
            choice[j] = 0;
            j += 1;
        }
    }
}

#[test]
fn tableau_oracle_on_a_known_problem() {
    // max x + y s.t. x + 2y <= 4, 3x + y <= 6, box [0, 10]: optimum (1.6, 1.2).
    let r = solve(&[-1.0, -1.0], &[vec![1.0, 2.0], vec![3.0, 1.0]], &[4.0, 6.0], &[0.0, 0.0], &[10.0, 10.0]);
    match r {
        Oracle::Optimal { value, x } => {
            assert!((value + 2.8).abs() < 1e-12);
            assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 1.2).abs() < 1e-12);
        }
        Oracle::Infeasible => panic!("feasible problem"),
    }
    assert_eq!(solve(&[1.0], &[vec![1.0]], &[-2.0], &[-1.0], &[1.0]), Oracle::Infeasible);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lp_matches_tableau((n, c, a, b, w) in lp_instance()) {
        let lo = vec![-w; n];
        let hi = vec![w; n];
        let oracle = solve(&c, &a, &b, &lo, &hi);
        let lp = LinearProgram::new(n)
            .with_objective(DVector::from_vec(c.clone()))
            .with_inequalities(to_matrix(&a, n), DVector::from_vec(b.clone()))
            .with_bounds(-w, w);
        match (lp_solve(&lp).unwrap(), oracle) {
            (LpOutcome::Optimal { value, x }, Oracle::Optimal { value: v, .. }) => {
                prop_assert!((value - v).abs() < 1e-6, "{} vs {}", value, v);
                for (row, bi) in a.iter().zip(&b) {
                    let lhs: f64 = row.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                    prop_assert!(lhs <= bi + 1e-7);
                }
            }
            (LpOutcome::Infeasible, Oracle::Infeasible) => {}
            (got, want) => prop_assert!(false, "lp {:?} oracle {:?}", got, want),
        }
    }

    #[test]
    fn counterexample_search_matches_enumeration(
        dim in 1usize..4,
        shapes in prop::collection::vec(1usize..4, 1..5),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let polys: Vec<Polytope> = shapes
            .iter()
            .map(|&rows| {
                Polytope::new(
                    DMatrix::from_fn(rows, dim, |_, _| rng.gen_range(-1.0..1.0)),
                    DVector::from_fn(rows, |_, _| rng.gen_range(-0.6..0.9)),
                )
                .unwrap()
            })
            .collect();
        let found = find_counterexample(&polys, dim, DEFAULT_EPSILON, 100_000).unwrap();
        let truth = enumerate(&polys, dim, DEFAULT_EPSILON);
        match (found, truth) {
            (Some(alpha), Some(v)) => {
                prop_assert!((alpha.lp_norm(1) - v).abs() < 1e-6);
                for p in &polys {
                    prop_assert!(!p.contains(&alpha, 0.0));
                }
            }
            (None, None) => {}
            (f, t) => prop_assert!(false, "search {:?} enumeration {:?}", f, t),
        }
    }
}
