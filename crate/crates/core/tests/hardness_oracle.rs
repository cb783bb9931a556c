use proptest::prelude::*;
use rand::Rng;
use sgda_core::hardness::*;
use sgda_core::seeded_rng;

/// Plain DPLL with unit propagation over signed DIMACS literals.
fn dpll(clauses: &[Vec<i64>], assign: &mut Vec<i8>) -> bool {
    let mut simplified: Vec<Vec<i64>> = Vec::new();
    for c in clauses {
        let mut keep = Vec::new();
        let mut sat = false;
        for &l in c {
            let v = assign[(l.unsigned_abs() - 1) as usize];
            if v == 0 {
                keep.push(l);
            } else if (v > 0) == (l > 0) {
                sat = true;
                break;
            }
        }
        if sat {
            continue;
        }
        if keep.is_empty() {
            return false;
        }
        simplified.push(keep);
    }
    if simplified.is_empty() {
        return true;
    }
    if let Some(unit) = simplified.iter().find(|c| c.len() == 1) {
        let l = unit[0];
        let idx = (l.unsigned_abs() - 1) as usize;
        assign[idx] = if l > 0 { 1 } else { -1 };
        let ok = dpll(&simplified, assign);
        if !ok {
            assign[idx] = 0;
        }
        return ok;
    }
    let l = simplified[0][0];
    let idx = (l.unsigned_abs() - 1) as usize;
    for val in [1i8, -1] {
        assign[idx] = val;
        if dpll(&simplified, assign) {
            return true;
        }
    }
    assign[idx] = 0;
    false
}

fn satisfiable(d: usize, clauses: &[[i64; 3]]) -> bool {
    let cl: Vec<Vec<i64>> = clauses.iter().map(|c| c.to_vec()).collect();
    dpll(&cl, &mut vec![0; d])
}

fn random_instance(rng: &mut impl Rng, d: usize, m: usize) -> Vec<[i64; 3]> {
    (0..m)
        .map(|_| {
            let mut c = [0i64; 3];
            for l in &mut c {
                let v = rng.random_range(1..=d as i64);
                *l = if rng.random_bool(0.5) { v } else { -v };
            }
            c
        })
        .collect()
}

#[test]
fn dpll_oracle_sanity() {
    assert!(satisfiable(2, &[[1, 2, 2], [-1, 2, 2], [1, -2, -2], [1, 1, 1]]));
    assert!(!satisfiable(2, &[[1, 1, 1], [-1, -1, -1], [2, 2, 2], [-2, -2, -2]]));
    assert!(!satisfiable(2, &[[1, 2, 2], [-1, 2, 2], [1, -2, -2], [-1, -2, -2]]));
}

#[test]
fn reduction_matches_dpll_small_instances() {
    let mut rng = seeded_rng(41);
    let mut seen = [0usize; 2];
    for _ in 0..50 {
        let cl = random_instance(&mut rng, 4, 4);
        let sat = Sat3Instance::from_dimacs(4, &cl).unwrap();
        let expected = satisfiable(4, &cl);
        assert_eq!(stationary_exists_bruteforce(&build_minmax(&sat)).unwrap(), expected, "{cl:?}");
        seen[expected as usize] += 1;
    }
    assert!(seen[1] > 0);
}

#[test]
fn reduction_matches_dpll_up_to_ten_vars() {
    let mut rng = seeded_rng(42);
    let mut seen = [0usize; 2];
    for trial in 0..300 {
        let d = 3 + trial % 8;
        // Clause counts around the 3SAT threshold give both outcomes.
        let m = (4.3 * d as f64).round() as usize + rng.random_range(0..4);
        let cl = random_instance(&mut rng, d, m);
        let sat = Sat3Instance::from_dimacs(d, &cl).unwrap();
        let expected = satisfiable(d, &cl);
        let form = build_minmax(&sat);
        assert_eq!(stationary_exists_bruteforce(&form).unwrap(), expected, "{cl:?}");
        if let Some(w) = stationary_witness(&form).unwrap() {
            assert!(sat.satisfied_by(&w));
        }
        seen[expected as usize] += 1;
    }
    assert!(seen[0] > 20 && seen[1] > 20, "{seen:?}");
}

#[test]
fn witness_is_stationary_by_finite_differences() {
    let sat = Sat3Instance::from_dimacs(5, &[[1, -2, 3], [-1, 4, 5], [2, -3, -5], [-4, 1, 2], [3, 4, -5]]).unwrap();
    let f = build_minmax(&sat);
    let w: Vec<f64> = stationary_witness(&f).unwrap().unwrap().iter().map(|&v| v as f64).collect();
    let y0 = vec![0.0; f.y_len()];
    assert!(f.term_groups(&w).unwrap().stacked().iter().all(|g| *g == 0.0));
    let h = 1e-6;
    for i in 0..f.num_vars() {
        let mut xp = w.clone();
        let mut xm = w.clone();
        xp[i] += h;
        xm[i] -= h;
        let g = (f.eval(&xp, &y0).unwrap() - f.eval(&xm, &y0).unwrap()) / (2.0 * h);
        assert_eq!(g, 0.0);
    }
    for j in 0..f.y_len() {
        let mut yp = y0.clone();
        let mut ym = y0.clone();
        yp[j] += h;
        ym[j] -= h;
        let g = (f.eval(&w, &yp).unwrap() - f.eval(&w, &ym).unwrap()) / (2.0 * h);
        assert!(g.abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn zero_y_gives_zero(x in prop::collection::vec(-3.0f64..3.0, 4), seed in 0u64..1000) {
        let mut rng = seeded_rng(seed);
        let cl = random_instance(&mut rng, 4, 6);
        let f = build_minmax(&Sat3Instance::from_dimacs(4, &cl).unwrap());
        prop_assert_eq!(f.eval(&x, &vec![0.0; f.y_len()]).unwrap(), 0.0);
    }

    #[test]
    fn linear_in_y(x in prop::collection::vec(-2.0f64..2.0, 4), s in -3.0f64..3.0, seed in 0u64..1000) {
        let mut rng = seeded_rng(seed);
        let cl = random_instance(&mut rng, 4, 5);
        let f = build_minmax(&Sat3Instance::from_dimacs(4, &cl).unwrap());
        let y: Vec<f64> = (0..f.y_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = y.iter().map(|v| s * v).collect();
        let a = f.eval(&x, &y).unwrap();
        prop_assert!((f.eval(&x, &ys).unwrap() - s * a).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn groups_vanish_only_on_satisfying_corners(bits in 0u32..16, seed in 0u64..1000) {
        let mut rng = seeded_rng(seed);
        let cl = random_instance(&mut rng, 4, 4);
        let sat = Sat3Instance::from_dimacs(4, &cl).unwrap();
        let f = build_minmax(&sat);
        let xi: Vec<i8> = (0..4).map(|j| if bits >> j & 1 == 1 { 1 } else { -1 }).collect();
        let x: Vec<f64> = xi.iter().map(|&v| v as f64).collect();
        prop_assert_eq!(f.term_groups(&x).unwrap().all_zero(), sat.satisfied_by(&xi));
    }

    #[test]
    fn interior_points_are_never_stationary(x in prop::collection::vec(-0.999f64..0.999, 4), seed in 0u64..1000) {
        let mut rng = seeded_rng(seed);
        let cl = random_instance(&mut rng, 4, 4);
        let f = build_minmax(&Sat3Instance::from_dimacs(4, &cl).unwrap());
        prop_assert!(f.term_groups(&x).unwrap().counting < 0.0);
    }
}
