use proptest::prelude::*;
use tactile_cs::basis::{BasisKind, SparseBasis};
use tactile_cs::linop::{dot, LinearOperator};
use tactile_cs::measurement::{SbheOperator, SeparableOperator};
use tactile_cs::recon::SensingOperator;

fn adjoint_gap(op: &dyn LinearOperator, x: &[f64], y: &[f64]) -> f64 {
    (dot(&op.apply(x).unwrap(), y) - dot(x, &op.adjoint(y).unwrap())).abs()
}

fn vector(len: usize, seed: u64) -> Vec<f64> {
    (0..len as u64)
        .map(|i| ((((i + 1) * 2654435761) ^ seed) % 1000) as f64 / 500.0 - 1.0)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sbhe_adjoint(log_n in 2u32..11, frac in 0.05f64..1.0, log_b in 1u32..6, seed in any::<u64>()) {
        let n = 1usize << log_n;
        let m = ((n as f64 * frac) as usize).max(1);
        let block = (1usize << log_b).min(n);
        let op = SbheOperator::new(n, m, block, seed).unwrap();
        let (x, y) = (vector(n, seed), vector(m, seed ^ 7));
        prop_assert!(adjoint_gap(&op, &x, &y) < 1e-9 * n as f64);
    }

    #[test]
    fn separable_adjoint(log_s in 1u32..6, a in 1usize..32, b in 1usize..32, seed in any::<u64>()) {
        let side = 1usize << log_s;
        let op = SeparableOperator::new(side, a.min(side), b.min(side), seed).unwrap();
        let (x, y) = (vector(side * side, seed), vector(op.rows(), seed ^ 3));
        prop_assert!(adjoint_gap(&op, &x, &y) < 1e-9 * (side * side) as f64);
    }

    #[test]
    fn composed_operator_adjoint(kind in prop::sample::select(BasisKind::ALL.to_vec()), log_s in 2u32..6, seed in any::<u64>()) {
        let side = 1usize << log_s;
        let n = side * side;
        let phi = SbheOperator::new(n, n / 4, 32.min(n), seed).unwrap();
        let basis = SparseBasis::new(kind, side).unwrap();
        let a = SensingOperator::new(&phi, &basis).unwrap();
        let (x, y) = (vector(n, seed), vector(n / 4, seed ^ 5));
        prop_assert!(adjoint_gap(&a, &x, &y) < 1e-9 * n as f64);
    }

    #[test]
    fn basis_round_trip(kind in prop::sample::select(BasisKind::ALL.to_vec()), log_s in 1u32..7, seed in any::<u64>()) {
        let side = 1usize << log_s;
        let Ok(basis) = SparseBasis::new(kind, side) else { return Ok(()); };
        let x = vector(side * side, seed);
        let back = basis.synthesize(&basis.analyze(&x).unwrap()).unwrap();
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10);
    }
}
