use std::collections::BTreeMap;

use homog_core::study::report::{emit_json, parse_json_report};
use homog_core::study::sweep::{CellSummary, ReportRow};
use homog_core::{
    cell_average, fit_rate, ConvergenceReport, DomainField, DomainGrid, L2Norm, PeriodicGrid,
    TwoScaleField,
};
use proptest::prelude::*;

fn grids(dim: usize) -> (DomainGrid, PeriodicGrid) {
    let n = if dim == 1 { 17 } else { 5 };
    (
        DomainGrid::new(dim, &vec![1.0; dim], n).unwrap(),
        PeriodicGrid::new(dim, 4).unwrap(),
    )
}

fn field(dim: usize, values: &[f64]) -> TwoScaleField {
    let (d, c) = grids(dim);
    TwoScaleField::new(d, c, values[..d.len() * c.len()].to_vec()).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 400)
}

proptest! {
    #[test]
    fn cell_average_obeys_jensen(dim in 1usize..=2, v in values()) {
        let u = field(dim, &v);
        let avg = cell_average(&u);
        for i in 0..u.domain_grid().len() {
            let top = u.y_slice(i).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(avg.values()[i].abs() <= top + 1e-14);
        }
        prop_assert!(avg.l2_norm() <= u.l2_norm() * (1.0 + 1e-14));
    }

    #[test]
    fn cell_average_is_linear(dim in 1usize..=2, v in values(), w in values(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (u, z) = (field(dim, &v), field(dim, &w));
        let combo = u.scaled(a).add_scaled(b, &z).unwrap();
        let lhs = cell_average(&combo);
        let rhs = cell_average(&u).scaled(a).add_scaled(b, &cell_average(&z)).unwrap();
        for (p, q) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn norms_are_homogeneous_and_subadditive(dim in 1usize..=2, v in values(), w in values(), c in -5.0f64..5.0) {
        let (u, z) = (field(dim, &v), field(dim, &w));
        prop_assert!((u.scaled(c).l2_norm() - c.abs() * u.l2_norm()).abs() <= 1e-12 * (1.0 + u.l2_norm()));
        prop_assert!(u.add_scaled(1.0, &z).unwrap().l2_norm() <= u.l2_norm() + z.l2_norm() + 1e-12);

        let (d, _) = grids(dim);
        let f = DomainField::new(d, v[..d.len()].to_vec()).unwrap();
        let g = DomainField::new(d, w[..d.len()].to_vec()).unwrap();
        prop_assert!((f.scaled(c).l2_norm() - c.abs() * f.l2_norm()).abs() <= 1e-12 * (1.0 + f.l2_norm()));
        prop_assert!(f.add_scaled(1.0, &g).unwrap().l2_norm() <= f.l2_norm() + g.l2_norm() + 1e-12);
    }

    #[test]
    fn rate_slope_is_scale_equivariant(
        slope in 0.2f64..3.0,
        noise in prop::collection::vec(-0.2f64..0.2, 5),
        c in 1e-3f64..1e3,
    ) {
        let pairs: Vec<(f64, f64)> = noise
            .iter()
            .enumerate()
            .map(|(k, n)| {
                let eps = 0.5f64.powi(k as i32 + 2);
                (eps, eps.powf(slope) * n.exp())
            })
            .collect();
        let scaled: Vec<(f64, f64)> = pairs.iter().map(|&(e, v)| (e, c * v)).collect();
        let (a, b) = (fit_rate(&pairs).unwrap(), fit_rate(&scaled).unwrap());
        prop_assert!((a.slope - b.slope).abs() <= 1e-12);
        prop_assert!((b.intercept - a.intercept - c.ln()).abs() <= 1e-10);
    }

    #[test]
    fn report_json_round_trip_is_bit_exact(
        nums in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 7),
        flags in prop::collection::vec(any::<Option<bool>>(), 1),
    ) {
        let row = ReportRow {
            eps: nums[0].abs(),
            h1_gap: nums[1],
            avg_grad_error: nums[2],
            bl_corrected_error: Some(nums[3]),
            bound_rhs: if flags[0].is_some() { Some(nums[4]) } else { None },
            bound_ok: flags[0],
            error_gradient: Some(nums[5]),
            error_bound: None,
            boundary_layer_norm: Some(nums[6]),
            boundary_layer_bound: None,
            iterations: 17,
        };
        let report = ConvergenceReport {
            spec: None,
            cell: CellSummary {
                a_hom: vec![vec![nums[1]]],
                chi_gradient_norms: vec![nums[2]],
                chi_sup: nums[3],
                residual: nums[4],
                alpha: 1.0,
                beta: 3.0,
            },
            rows: vec![row],
            fitted_rates: BTreeMap::new(),
            timings: Vec::new(),
        };
        let back = parse_json_report(&emit_json(&report)).unwrap();
        let (p, q) = (&back.rows[0], &report.rows[0]);
        for (x, y) in [(p.eps, q.eps), (p.h1_gap, q.h1_gap), (p.avg_grad_error, q.avg_grad_error)] {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        prop_assert_eq!(back, report);
    }
}
