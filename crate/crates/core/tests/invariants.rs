use std::sync::OnceLock;

use choquard::radial::io::{read_profile, write_profile};
use choquard::radial::{assemble, build_grid, OperatorKind, OperatorMatrix, RadialProfile, TailModel};
use proptest::prelude::*;

const PPD: u32 = 10;

fn ops() -> &'static [OperatorMatrix; 2] {
    static OPS: OnceLock<[OperatorMatrix; 2]> = OnceLock::new();
    OPS.get_or_init(|| {
        let g = build_grid(1e-3, 30.0, PPD).unwrap();
        [
            assemble(OperatorKind::Riesz { alpha: 2.0 }, 3, &g).unwrap(),
            assemble(OperatorKind::Green, 3, &g).unwrap(),
        ]
    })
}

fn len() -> usize {
    ops()[0].grid().len()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..10.0, len())
}

const TAIL: TailModel = TailModel::ExpDecay { rate: 1.0, power: 1.0 };

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operators_preserve_order(a in values(), b in values(), which in 0usize..2, sigma in 0.0f64..0.9) {
        let op = &ops()[which];
        let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let la = op.apply_values(&a, sigma, TAIL).unwrap();
        let lh = op.apply_values(&hi, sigma, TAIL).unwrap();
        for (x, y) in la.iter().zip(&lh) {
            prop_assert!(*x >= 0.0);
            prop_assert!(y + 1e-12 * y.abs() >= *x);
        }
    }

    #[test]
    fn operators_are_linear(a in values(), b in values(), c in 0.0f64..5.0, which in 0usize..2) {
        let op = &ops()[which];
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| c * x + y).collect();
        let la = op.apply_values(&a, 0.5, TAIL).unwrap();
        let lb = op.apply_values(&b, 0.5, TAIL).unwrap();
        let lm = op.apply_values(&mix, 0.5, TAIL).unwrap();
        for ((x, y), z) in la.iter().zip(&lb).zip(&lm) {
            let want = c * x + y;
            prop_assert!((z - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn profile_csv_round_trips(v in values(), sigma in prop::option::of(0.0f64..3.0)) {
        let g = ops()[0].grid().clone();
        let u = RadialProfile::new(g, v, sigma, TAIL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        write_profile(&u, &path).unwrap();
        let back = read_profile(&path).unwrap();
        prop_assert_eq!(back.values(), u.values());
        prop_assert_eq!(back.grid().nodes(), u.grid().nodes());
        prop_assert_eq!(back.tail(), u.tail());
    }
}
