use homog_core::correctors::{boundary_layer_1d, boundary_layer_2d, error_gradient_1d};
use homog_core::pde_solvers::{solve_dirichlet_1d_flux, solve_homogenized, solve_oscillating_family};
use homog_core::study::sweep::prepare;
use homog_core::{
    cell_average, parse_config, run_sweep, solve_correctors, L2Norm, ProblemSpec,
};

fn cosine_1d(eps: &str) -> ProblemSpec {
    parse_config(&format!(
        r#"{{"dim": 1, "extents": [1.0], "N": 513, "M": 128, "eps_list": {eps},
            "coefficient": {{"kind": "catalog", "id": "cosine1d", "base": 2, "amp": 1}},
            "source": {{"kind": "constant", "value": 1.0}}}}"#
    ))
    .unwrap()
}

fn laminate_2d() -> ProblemSpec {
    parse_config(
        r#"{"dim": 2, "extents": [1.0, 1.0], "N": 33, "M": 16, "eps_list": [0.5, 0.25],
            "coefficient": {"kind": "catalog", "id": "laminate2d", "base": 2, "amp": 1},
            "source": {"kind": "sine_product", "amp": 1.0}}"#,
    )
    .unwrap()
}

fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f)
}

#[test]
fn sweeps_are_bitwise_reproducible() {
    for spec in [cosine_1d("[0.25, 0.125, 0.0625]"), laminate_2d()] {
        let first = with_threads(1, || run_sweep(&spec).unwrap()).without_timings();
        let second = with_threads(4, || run_sweep(&spec).unwrap()).without_timings();
        assert_eq!(first, second);
        let bits = |r: &homog_core::ConvergenceReport| -> Vec<u64> {
            r.rows.iter().flat_map(|row| [row.h1_gap.to_bits(), row.avg_grad_error.to_bits()]).collect()
        };
        assert_eq!(bits(&first), bits(&second));
    }
}

#[test]
fn slices_are_one_periodic_in_the_translation() {
    let spec = cosine_1d("[0.125]");
    let eps = 0.125;
    let fam = solve_oscillating_family(&spec, eps).unwrap();
    let domain = spec.domain_grid().unwrap();
    let cell = spec.cell_grid().unwrap();
    let f_anti = spec.source.antiderivative_1d(&domain);
    for j in [0, 5, 127] {
        let y = cell.coord(j)[0] + 1.0;
        let line: Vec<f64> = (0..domain.len())
            .map(|i| spec.coefficient.eval_scalar(0.0, y + domain.coord(i)[0] / eps))
            .collect();
        let direct = solve_dirichlet_1d_flux(&line, &f_anti, domain.spacing(0)).unwrap();
        let gap = (0..domain.len())
            .map(|i| (direct.u[i] - fam.u.get(i, j)).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-12, "slice {j}: {gap}");
    }
}

#[test]
fn averaged_error_gradient_is_below_the_two_scale_norm() {
    let spec = cosine_1d("[0.125]");
    let (cs, hom) = prepare(&spec).unwrap();
    for eps in [0.25, 0.125, 0.0625] {
        let fam = solve_oscillating_family(&spec, eps).unwrap();
        let bl = boundary_layer_1d(&hom, &cs, &spec.coefficient, eps).unwrap();
        let de = error_gradient_1d(&fam, &hom, &cs, &bl).unwrap();
        assert!(cell_average(&de).l2_norm() <= de.l2_norm() * (1.0 + 1e-14));
    }
}

#[test]
fn laminate_boundary_layer_obeys_the_maximum_principle() {
    let spec = laminate_2d();
    let domain = spec.domain_grid().unwrap();
    let cs = solve_correctors(&spec.coefficient, spec.m, spec.cg_tol, &domain).unwrap();
    let hom = solve_homogenized(&spec, &cs).unwrap();
    let mask = domain.boundary_mask();
    for eps in [0.5, 0.25] {
        let bl = boundary_layer_2d(&hom, &cs, &spec.coefficient, eps, spec.cg_tol).unwrap();
        for j in 0..cs.cell_grid().len() {
            let mut inner: f64 = 0.0;
            let mut edge: f64 = 0.0;
            for (i, on_edge) in mask.iter().enumerate() {
                let v = bl.v.get(i, j).abs();
                if *on_edge {
                    edge = edge.max(v);
                } else {
                    inner = inner.max(v);
                }
            }
            assert!(inner <= edge + 1e-8, "eps {eps}, slice {j}: {inner} > {edge}");
        }
    }
}
