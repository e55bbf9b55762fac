//! Values frozen from an independent exact-fraction evaluation of the closed
//! forms and delta ladders, plus pinned resource counts.

use hamforge::delta::{delta_expr, universality_certificate, verify_delta};
use hamforge::filter::{eval_gamma, eval_lambda, normalized_filter_vector, resource_estimate, FilterExpr};
use hamforge::pulse::{count_resources, materialize, materialize_compressed, realized_filter};
use hamforge::rational::{int, rat};
use hamforge::{FilterVector, Precision, Rational};

fn row(values: &[(i64, i64)]) -> Vec<Rational> {
    values.iter().map(|&(p, q)| rat(p, q)).collect()
}

#[test]
fn lambda_table() {
    let l3: Vec<Rational> = (1..=7).map(|d| eval_lambda(3, d).unwrap()).collect();
    assert_eq!(l3, row(&[(1, 3), (-1, 3), (-1, 1), (-1, 3), (1, 3), (1, 1), (1, 3)]));
    let l4: Vec<Rational> = (1..=8).map(|d| eval_lambda(4, d).unwrap()).collect();
    assert_eq!(l4, row(&[(1, 2), (0, 1), (-1, 2), (-1, 1), (-1, 2), (0, 1), (1, 2), (1, 1)]));
    for d in 1..20 {
        assert_eq!(eval_lambda(1, d).unwrap(), int(if d % 2 == 0 { 1 } else { -1 }));
    }
}

#[test]
fn gamma_table() {
    let g5: Vec<Rational> = (1..=10).map(|d| eval_gamma(5, d).unwrap()).collect();
    let mut want = vec![rat(1, 5); 10];
    want[4] = int(1);
    want[9] = int(1);
    assert_eq!(g5, want);
    let g4: Vec<Rational> = (1..=8).map(|d| eval_gamma(4, d).unwrap()).collect();
    assert_eq!(g4, row(&[(0, 1), (0, 1), (0, 1), (1, 1), (0, 1), (0, 1), (0, 1), (1, 1)]));
}

#[test]
fn delta_strengths() {
    // (d, N, sign, on-target value, concatenations)
    let cases: [(usize, usize, i8, Rational, u32); 8] = [
        (1, 15, -1, rat(-3, 16), 5),
        (1, 15, 1, rat(3, 16), 5),
        (1, 31, -1, rat(-21, 128), 7),
        (5, 16, -1, rat(-4085, 55296), 8),
        (5, 16, 1, rat(4085, 55296), 8),
        (9, 31, -1, rat(-7447653, 1101463552), 9),
        (3, 31, -1, rat(-2, 9), 5),
        (4, 31, 1, rat(2, 9), 5),
    ];
    for (d, n, sign, value, depth) in cases {
        let r = delta_expr(d, n, sign).unwrap();
        let v = normalized_filter_vector(&r.expr, n - 1).unwrap();
        assert_eq!(v.at(d), &value, "d = {d}, N = {n}");
        assert_eq!(v.support(), vec![d]);
        assert_eq!(r.concatenations, depth);
        assert!(r.adjustment.is_none());
    }
}

#[test]
fn deltas_survive_materialization() {
    // Full materialization grows super-polynomially; beyond N = 7 merge rows
    // equal up to sign, which leaves the realized filter unchanged.
    for n in [5, 7, 9, 11] {
        for d in 1..n {
            for sign in [-1, 1] {
                let r = delta_expr(d, n, sign).unwrap();
                let s = if n <= 7 { materialize(&r.expr, n) } else { materialize_compressed(&r.expr, n) }.unwrap();
                let realized = realized_filter(&s).unwrap();
                assert_eq!(realized, normalized_filter_vector(&r.expr, n - 1).unwrap(), "d = {d}, N = {n}");
            }
        }
    }
}

#[test]
fn three_qubit_certificate() {
    let c = universality_certificate(3).unwrap();
    assert_eq!(c.half_width_exact, rat(1, 2));
    let r = c.recipe(2, -1);
    assert_eq!(normalized_filter_vector(&r.expr, 2).unwrap(), FilterVector::new(vec![int(0), int(-1)]));
    let rep = verify_delta(c.recipe(1, 1), 3, 0.0, Precision::Rational).unwrap();
    assert!(rep.passed && rep.exact);
}

#[test]
fn nearest_neighbour_filter_value() {
    let e = hamforge::filter::nearest_neighbour_expr(4);
    assert_eq!(normalized_filter_vector(&e, 3).unwrap(), FilterVector::new(vec![rat(1, 3), int(0), int(0)]));
}

#[test]
fn resource_regression() {
    // Pinned totals for the d = 1 recipe at N = 15; both counting paths must agree.
    let r = delta_expr(1, 15, -1).unwrap();
    let estimate = resource_estimate(&r.expr, 15).unwrap();
    let counted = count_resources(&materialize(&r.expr, 15).unwrap());
    assert_eq!(estimate.pulse_layers, counted.pulse_layers);
    assert_eq!(estimate.spin_flips, counted.spin_flips);
    assert_eq!(estimate.segment_count, 6075);
    assert_eq!((estimate.pulse_layers, estimate.spin_flips), (6076, 19314));
}

#[test]
fn identity_has_no_pulses() {
    let c = resource_estimate(&FilterExpr::identity(), 8).unwrap();
    assert_eq!((c.pulse_layers, c.spin_flips, c.segment_count), (0, 0, 1));
}
