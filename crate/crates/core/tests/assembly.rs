use std::f64::consts::PI;
use std::sync::Arc;

use msras_core::assembly::{assemble_ccfv, assemble_dg, evaluate_solution, l2_error, DgParams, DiscreteSystem};
use msras_core::grid::{BoundarySpec, BoundaryTag, Grid};
use msras_core::problem::{constant_field, velocity_constant, ProblemSpec};
use msras_core::sparse::factorize;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn manufactured(n: usize) -> (Grid, ProblemSpec) {
    let g = Grid::unit_square(n, &BoundarySpec::all_dirichlet()).unwrap();
    let f = Arc::new(|[x, y]: [f64; 2]| {
        let u = (PI * x).sin() * (PI * y).sin();
        let ux = PI * (PI * x).cos() * (PI * y).sin();
        let uy = PI * (PI * x).sin() * (PI * y).cos();
        2.0 * PI * PI * u + 2.0 / 3.0 * ux + uy
    });
    let p = ProblemSpec::new(vec![1.0; n * n], velocity_constant()).with_source(f);
    (g, p)
}

fn exact([x, y]: [f64; 2]) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

fn solve(s: &DiscreteSystem<f64>) -> Vec<f64> {
    factorize(&s.b).unwrap().solve(&s.f).unwrap()
}

fn order(errors: &[f64]) -> f64 {
    (errors[0] / errors[errors.len() - 1]).log2() / (errors.len() - 1) as f64
}

#[test]
fn dg_manufactured_second_order() {
    let errs: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let (g, p) = manufactured(n);
            let s = assemble_dg::<f64>(&g, &p, DgParams::default()).unwrap();
            l2_error(&s, &solve(&s), exact).unwrap()
        })
        .collect();
    assert!(order(&errs) >= 1.8, "errors {errs:?}");
}

#[test]
fn ccfv_manufactured_first_order() {
    let errs: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let (g, p) = manufactured(n);
            let s = assemble_ccfv::<f64>(&g, &p).unwrap();
            l2_error(&s, &solve(&s), exact).unwrap()
        })
        .collect();
    assert!(order(&errs) >= 0.9, "errors {errs:?}");
}

fn checker(n: usize) -> Vec<f64> {
    (0..n * n).map(|c| if ((c % n) + (c / n)) % 2 == 0 { 1.0 } else { 1e-3 }).collect()
}

#[test]
fn pure_diffusion_is_symmetric_positive_definite() {
    let g = Grid::unit_square(6, &BoundarySpec::all_dirichlet()).unwrap();
    let p = ProblemSpec::new(checker(6), Arc::new(|_| [0.0, 0.0]));
    let s = assemble_dg::<f64>(&g, &p, DgParams::default()).unwrap();
    assert!(s.b.asymmetry() <= 1e-12 * s.b.max_abs());
    assert_eq!(s.a_a.to_dense(), s.b.to_dense());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let x: Vec<f64> = (0..s.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bx = s.b.spmv(&x).unwrap();
        assert!(x.iter().zip(&bx).map(|(a, b)| a * b).sum::<f64>() > 0.0);
    }
}

#[test]
fn inner_product_matrix_is_symmetric_semidefinite() {
    let g = Grid::unit_square(6, &BoundarySpec::inflow_left_bottom()).unwrap();
    let p = ProblemSpec::new(checker(6), velocity_constant());
    for s in [assemble_dg::<f64>(&g, &p, DgParams::default()).unwrap(), assemble_ccfv::<f64>(&g, &p).unwrap()] {
        assert!(s.a_a.asymmetry() <= 1e-12 * s.a_a.max_abs());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x: Vec<f64> = (0..s.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ax = s.a_a.spmv(&x).unwrap();
            assert!(x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>() >= -1e-12);
        }
    }
}

#[test]
fn constant_dirichlet_data_is_reproduced() {
    let g = Grid::unit_square(5, &BoundarySpec::all_dirichlet()).unwrap();
    let p = ProblemSpec::new(checker(5), Arc::new(|_| [0.0, 0.0])).with_dirichlet(constant_field(2.5));
    let s = assemble_dg::<f64>(&g, &p, DgParams::default()).unwrap();
    let u = solve(&s);
    assert!(u.iter().all(|v| (v - 2.5).abs() < 1e-10));
    let s = assemble_ccfv::<f64>(&g, &p).unwrap();
    assert!(solve(&s).iter().all(|v| (v - 2.5).abs() < 1e-10));
}

#[test]
fn dg_transport_is_block_lower_triangular_along_flow() {
    let spec = BoundarySpec {
        left: BoundaryTag::Dirichlet,
        right: BoundaryTag::Outflow,
        bottom: BoundaryTag::Outflow,
        top: BoundaryTag::Outflow,
        face_override: None,
    };
    let g = Grid::new(6, 1, [0.0, 6.0, 0.0, 1.0], &spec).unwrap();
    let p = ProblemSpec::new(vec![0.0; 6], Arc::new(|_| [1.0, 0.0])).with_transport_limit(true);
    let s = assemble_dg::<f64>(&g, &p, DgParams::default()).unwrap();
    for i in 0..s.num_dofs() {
        let (cols, vals) = s.b.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j / 4 > i / 4 {
                assert!(v.abs() < 1e-15, "upper block entry ({i},{j}) = {v}");
            }
        }
    }
}

#[test]
fn ccfv_upwind_reproduces_inflow_constant() {
    let spec = BoundarySpec {
        left: BoundaryTag::Dirichlet,
        right: BoundaryTag::Outflow,
        bottom: BoundaryTag::Outflow,
        top: BoundaryTag::Outflow,
        face_override: None,
    };
    let g = Grid::new(8, 1, [0.0, 8.0, 0.0, 1.0], &spec).unwrap();
    let p = ProblemSpec::new(vec![0.0; 8], Arc::new(|_| [1.0, 0.0]))
        .with_transport_limit(true)
        .with_dirichlet(constant_field(1.0));
    let s = assemble_ccfv::<f64>(&g, &p).unwrap();
    assert!(solve(&s).iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn ccfv_interior_rows_annihilate_constants() {
    let g = Grid::unit_square(7, &BoundarySpec::all_dirichlet()).unwrap();
    let p = ProblemSpec::new(checker(7), velocity_constant());
    let s = assemble_ccfv::<f64>(&g, &p).unwrap();
    let r = s.b.spmv(&vec![1.0; 49]).unwrap();
    for c in 0..49 {
        let (ix, iy) = g.cell_ij(c);
        if ix > 0 && iy > 0 && ix < 6 && iy < 6 {
            assert!(r[c].abs() < 1e-12);
        }
    }
}

#[test]
fn evaluation_reproduces_linear_interpolant() {
    let g = Grid::unit_square(4, &BoundarySpec::all_dirichlet()).unwrap();
    let p = ProblemSpec::new(vec![1.0; 16], velocity_constant());
    let s = assemble_dg::<f64>(&g, &p, DgParams::default()).unwrap();
    let u: Vec<f64> = (0..s.num_dofs()).map(|d| s.dof_coordinates(d)[0]).collect();
    let pts = [[0.13, 0.7], [0.5, 0.5], [0.99, 0.01]];
    let v = evaluate_solution(&s, &u, &pts).unwrap();
    for (p, val) in pts.iter().zip(v) {
        assert!((val - p[0]).abs() < 1e-14);
    }
    let c = evaluate_solution(&s, &vec![3.0; s.num_dofs()], &pts).unwrap();
    assert!(c.iter().all(|v| (v - 3.0).abs() < 1e-14));
    assert!(evaluate_solution(&s, &u, &[[2.0, 0.0]]).is_err());
}

#[test]
fn evaluation_matches_direct_bilinear_formula() {
    let g = Grid::unit_square(3, &BoundarySpec::all_dirichlet()).unwrap();
    let p = ProblemSpec::new(vec![1.0; 9], velocity_constant());
    let s = assemble_dg::<f64>(&g, &p, DgParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u: Vec<f64> = (0..s.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..20 {
        let pt = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let cell = g.locate(pt[0], pt[1]).unwrap();
        let [xa, xb, ya, yb] = g.cell_bounds(cell);
        let (s_, t_) = ((pt[0] - xa) / (xb - xa), (pt[1] - ya) / (yb - ya));
        let c = &u[4 * cell..4 * cell + 4];
        let want = c[0] * (1.0 - s_) * (1.0 - t_) + c[1] * s_ * (1.0 - t_) + c[2] * (1.0 - s_) * t_ + c[3] * s_ * t_;
        let got = evaluate_solution(&s, &u, &[pt]).unwrap()[0];
        assert!((got - want).abs() < 1e-14);
    }
}

#[test]
fn dg_upwind_reproduces_inflow_constant() {
    let spec = BoundarySpec {
        left: BoundaryTag::Dirichlet,
        right: BoundaryTag::Outflow,
        bottom: BoundaryTag::Outflow,
        top: BoundaryTag::Outflow,
        face_override: None,
    };
    let g = Grid::new(5, 2, [0.0, 5.0, 0.0, 2.0], &spec).unwrap();
    let p = ProblemSpec::new(vec![0.0; 10], Arc::new(|_| [1.0, 0.0]))
        .with_transport_limit(true)
        .with_dirichlet(constant_field(1.0));
    let s = assemble_dg::<f64>(&g, &p, DgParams::default()).unwrap();
    assert!(solve(&s).iter().all(|v| (v - 1.0).abs() < 1e-12));
}
