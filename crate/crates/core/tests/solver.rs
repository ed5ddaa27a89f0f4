use msras_core::assembly::{assemble, DgParams, Discretization, DiscreteSystem};
use msras_core::coarse::{build_coarse_space, compute_spectra, CoarseSpace, EigenOptions, SelectionRule};
use msras_core::decomp::{partition_structured, Decomposition, LayerConfig, PuMode};
use msras_core::problem::{model_catalogue, ModelName, ModelParams};
use msras_core::solver::{
    a_norm_error, gmres, richardson, richardson_observed, KrylovConfig, KrylovVariant, Preconditioner, PreconditionerMode,
};
use msras_core::sparse::{factorize, SparseMatrix, TripletBuilder};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desk(n: usize, p: usize, layers: LayerConfig, a_min: f64, kind: Discretization) -> (DiscreteSystem<f64>, Decomposition) {
    let params = ModelParams { n: Some(n), a_min: Some(a_min), a_max: None, tiles: Some(8) };
    let (g, prob) = model_catalogue(ModelName::Checkerboard51, &params).unwrap();
    let s = assemble(&g, &prob, kind, DgParams::default()).unwrap();
    let core = partition_structured(&g, p, p).unwrap();
    let d = Decomposition::build(&g.cell_adjacency(), core, layers, PuMode::Ramp, s.dofs_per_cell()).unwrap();
    (s, d)
}

fn dense(m: &SparseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.nrows(), m.ncols(), &m.to_dense())
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Dense `Σ_j R_jᵀ Ξ_j B_j⁻¹ R_j`.
fn dense_one_level(s: &DiscreteSystem<f64>, d: &Decomposition) -> DMatrix<f64> {
    let n = s.num_dofs();
    let b = dense(&s.b);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..d.num_subdomains() {
        let dofs = &d.dofs_overlap[j];
        let bj = DMatrix::from_fn(dofs.len(), dofs.len(), |r, c| b[(dofs[r], dofs[c])]);
        let inv = bj.try_inverse().unwrap();
        for (r, &gr) in dofs.iter().enumerate() {
            for (c, &gc) in dofs.iter().enumerate() {
                m[(gr, gc)] += d.pu[j][r] * inv[(r, c)];
            }
        }
    }
    m
}

fn small_coarse(s: &DiscreteSystem<f64>, d: &Decomposition, lmax: f64) -> CoarseSpace<f64> {
    let rule = SelectionRule::Threshold(lmax);
    let spectra = compute_spectra(s, d, rule, &EigenOptions::default()).unwrap();
    build_coarse_space(s, d, &spectra, rule).unwrap()
}

fn full_coarse(b: &SparseMatrix<f64>, m: usize) -> CoarseSpace<f64> {
    let cols = (0..b.nrows()).map(|i| (i % m, vec![(i, 1.0)])).collect();
    CoarseSpace::from_columns(b, m, cols).unwrap()
}

#[test]
fn one_level_matches_dense_operator() {
    let (s, d) = desk(16, 2, LayerConfig::default(), 1e-3, Discretization::Dg);
    let p = Preconditioner::new(&s.b, &d, None, PreconditionerMode::OneLevel).unwrap();
    let m = dense_one_level(&s, &d);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let r = random_vec(s.num_dofs(), &mut rng);
        let want: Vec<f64> = (&m * DMatrix::from_column_slice(r.len(), 1, &r)).iter().copied().collect();
        let got = p.apply_one_level(&r).unwrap();
        assert!(max_diff(&got, &want) <= 1e-9 * inf_norm(&want));
    }
}

#[test]
fn two_level_matches_dense_operator() {
    let (s, d) = desk(16, 2, LayerConfig::default(), 1e-3, Discretization::Dg);
    let cs = small_coarse(&s, &d, 2.0);
    assert!(cs.dim() > 0);
    let rt = dense(&cs.r_st);
    let q = &rt * dense(&cs.b_s).try_inverse().unwrap() * rt.transpose();
    let m1 = dense_one_level(&s, &d);
    let n = s.num_dofs();
    let m2 = &m1 + &q * (DMatrix::identity(n, n) - dense(&s.b) * &m1);
    let p = Preconditioner::new(&s.b, &d, Some(cs), PreconditionerMode::TwoLevelHybrid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let r = random_vec(n, &mut rng);
        let want: Vec<f64> = (&m2 * DMatrix::from_column_slice(n, 1, &r)).iter().copied().collect();
        let got = p.apply(&r).unwrap();
        assert!(max_diff(&got, &want) <= 1e-8 * inf_norm(&want));
    }
}

#[test]
fn single_subdomain_is_direct_solve() {
    let (s, d) = desk(16, 1, LayerConfig::default(), 1e-4, Discretization::Dg);
    let p = Preconditioner::new(&s.b, &d, None, PreconditionerMode::OneLevel).unwrap();
    let z = p.apply(&s.f).unwrap();
    let u = factorize(&s.b).unwrap().solve(&s.f).unwrap();
    assert!(max_diff(&z, &u) <= 1e-9 * inf_norm(&u));
    let cfg = KrylovConfig { epsilon: 1e-8, ..KrylovConfig::default() };
    let (_, rep) = gmres(&s.b, &p, &s.f, &cfg, &vec![0.0; s.num_dofs()]).unwrap();
    assert_eq!(rep.iterations, 1);
    assert!(rep.converged);
}

#[test]
fn disjoint_blocks_invert_block_diagonal_matrix() {
    let (s, d) = desk(16, 4, LayerConfig { overlap_layers: 0, oversample_layers: 1 }, 1e-2, Discretization::Ccfv);
    let mut owner = vec![0; s.num_dofs()];
    for (j, dofs) in d.dofs_overlap.iter().enumerate() {
        for &i in dofs {
            owner[i] = j;
        }
    }
    let mut t = TripletBuilder::new(s.num_dofs(), s.num_dofs());
    for i in 0..s.num_dofs() {
        let (cols, vals) = s.b.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            if owner[c] == owner[i] {
                t.push(i, c, v);
            }
        }
    }
    let bd = t.build();
    assert!(d.pu.iter().flatten().all(|&w| w == 1.0));
    let p = Preconditioner::new(&bd, &d, None, PreconditionerMode::OneLevel).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_vec(s.num_dofs(), &mut rng);
    let y = p.apply(&bd.spmv(&x).unwrap()).unwrap();
    assert!(max_diff(&x, &y) < 1e-10);
}

#[test]
fn empty_coarse_space_equals_one_level() {
    let (s, d) = desk(16, 2, LayerConfig::default(), 1e-3, Discretization::Dg);
    let cs = CoarseSpace::from_columns(&s.b, 4, Vec::new()).unwrap();
    let p1 = Preconditioner::new(&s.b, &d, None, PreconditionerMode::OneLevel).unwrap();
    let p2 = Preconditioner::new(&s.b, &d, Some(cs), PreconditionerMode::TwoLevelHybrid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let r = random_vec(s.num_dofs(), &mut rng);
        let a = p1.apply(&r).unwrap();
        let b = p2.apply(&r).unwrap();
        assert!(max_diff(&a, &b) <= 1e-13 * inf_norm(&a));
    }
}

#[test]
fn full_coarse_space_is_exact() {
    let (s, d) = desk(8, 2, LayerConfig { overlap_layers: 1, oversample_layers: 1 }, 1e-3, Discretization::Dg);
    assert!(s.num_dofs() <= 1000);
    let p = Preconditioner::new(&s.b, &d, Some(full_coarse(&s.b, 4)), PreconditionerMode::TwoLevelHybrid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_vec(s.num_dofs(), &mut rng);
    let y = p.apply(&s.b.spmv(&x).unwrap()).unwrap();
    assert!(max_diff(&x, &y) <= 1e-8);
    let zero = vec![0.0; s.num_dofs()];
    let cfg = KrylovConfig { epsilon: 1e-8, ..KrylovConfig::default() };
    let (_, rep) = gmres(&s.b, &p, &s.f, &cfg, &zero).unwrap();
    assert_eq!(rep.iterations, 1);
    let (_, rep) = richardson(&s.b, &p, &s.f, &cfg, &zero).unwrap();
    assert_eq!(rep.iterations, 1);
    assert!(rep.converged);
}

#[test]
fn one_richardson_step_is_preconditioner_action() {
    let (s, d) = desk(16, 2, LayerConfig::default(), 1e-3, Discretization::Dg);
    let p = Preconditioner::new(&s.b, &d, Some(small_coarse(&s, &d, 2.0)), PreconditionerMode::TwoLevelHybrid).unwrap();
    let cfg = KrylovConfig { max_iters: 1, variant: KrylovVariant::Richardson, ..KrylovConfig::default() };
    let (u, _) = richardson(&s.b, &p, &s.f, &cfg, &vec![0.0; s.num_dofs()]).unwrap();
    assert_eq!(u, p.apply(&s.f).unwrap());
}

#[test]
fn gmres_history_monotone_within_cycles() {
    let (s, d) = desk(16, 4, LayerConfig { overlap_layers: 1, oversample_layers: 1 }, 1e-3, Discretization::Dg);
    let p = Preconditioner::new(&s.b, &d, None, PreconditionerMode::OneLevel).unwrap();
    let cfg = KrylovConfig { epsilon: 1e-8, restart: 7, max_iters: 400, ..KrylovConfig::default() };
    let (u, rep) = gmres(&s.b, &p, &s.f, &cfg, &vec![0.0; s.num_dofs()]).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert!(rep.restarts > 0);
    assert_eq!(rep.residuals.len(), rep.iterations + 1);
    for (k, w) in rep.residuals.windows(2).enumerate() {
        if (k + 1) % cfg.restart != 0 {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "step {k}: {} > {}", w[1], w[0]);
        }
    }
    let exact = factorize(&s.b).unwrap().solve(&s.f).unwrap();
    assert!(max_diff(&u, &exact) <= 1e-5 * inf_norm(&exact));
}

#[test]
fn gmres_and_richardson_agree() {
    let (s, d) = desk(16, 2, LayerConfig::default(), 1e-2, Discretization::Dg);
    let p = Preconditioner::new(&s.b, &d, Some(small_coarse(&s, &d, 0.5)), PreconditionerMode::TwoLevelHybrid).unwrap();
    let zero = vec![0.0; s.num_dofs()];
    let cfg = KrylovConfig { epsilon: 1e-10, ..KrylovConfig::default() };
    let (ug, rg) = gmres(&s.b, &p, &s.f, &cfg, &zero).unwrap();
    let (ur, rr) = richardson(&s.b, &p, &s.f, &cfg, &zero).unwrap();
    assert!(rg.converged && rr.converged);
    assert!(max_diff(&ug, &ur) <= 1e-6 * inf_norm(&ug));
}

#[test]
fn richardson_contracts_in_energy_norm() {
    let (s, d) = desk(16, 2, LayerConfig::default(), 1e-3, Discretization::Dg);
    let p = Preconditioner::new(&s.b, &d, Some(small_coarse(&s, &d, 0.5)), PreconditionerMode::TwoLevelHybrid).unwrap();
    let exact = factorize(&s.b).unwrap().solve(&s.f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u0 = random_vec(s.num_dofs(), &mut rng);
    let mut errs = Vec::new();
    let cfg = KrylovConfig { epsilon: 1e-10, max_iters: 20, ..KrylovConfig::default() };
    richardson_observed(&s.b, &p, &s.f, &cfg, &u0, |_, u| errs.push(a_norm_error(u, &exact, &s.a_a).unwrap())).unwrap();
    let theta = errs.windows(2).map(|w| w[1] / w[0]).filter(|r| r.is_finite()).fold(0.0, f64::max);
    assert!(theta < 1.0, "contraction {theta}, errors {errs:?}");
}

#[test]
fn a_norm_error_matches_dense_quadratic_form() {
    let (s, _) = desk(8, 1, LayerConfig::default(), 1e-2, Discretization::Dg);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = random_vec(s.num_dofs(), &mut rng);
    let v = random_vec(s.num_dofs(), &mut rng);
    let e = DMatrix::from_iterator(s.num_dofs(), 1, u.iter().zip(&v).map(|(a, b)| a - b));
    let want = (e.transpose() * dense(&s.a_a) * &e)[0].sqrt();
    assert!((a_norm_error(&u, &v, &s.a_a).unwrap() - want).abs() <= 1e-12 * want);
}

#[test]
fn subdomain_factorizations_are_worker_independent() {
    let (s, d) = desk(16, 4, LayerConfig::default(), 1e-3, Discretization::Dg);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r = random_vec(s.num_dofs(), &mut rng);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let p = Preconditioner::new(&s.b, &d, None, PreconditionerMode::OneLevel).unwrap();
            p.apply(&r).unwrap()
        })
    };
    assert_eq!(run(1), run(4));
}
