//! Matrix-free conjugate gradient for the quadratic ADMM substeps.
//!
//! The normal equations `(A'A + bt*Dh'Dh + bs*Dv'Dv) u = rhs` are symmetric
//! positive definite whenever the stacked difference operator is full rank,
//! so plain CG with a warm start is enough; no preconditioner here.

use crate::error::{Error, Result};
use crate::grid::{inner_product, ImageGrid};
use crate::operators::LinearOperator;

#[derive(Debug, Clone, Copy)]
pub struct CgConfig {
    /// Stop when `||M x - b|| <= rel_tolerance * ||b||`.
    pub rel_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            rel_tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

/// Outcome of one CG solve.
#[derive(Debug, Clone)]
pub struct CgReport {
    pub iterations_used: usize,
    pub final_relative_residual: f64,
    pub converged: bool,
    /// `||r_k|| / ||b||` after each iteration, starting with the warm-start
    /// residual at index 0.
    pub residual_history: Vec<f64>,
}

/// Conjugate gradient on grid space for a symmetric positive definite map.
///
/// Returns the best iterate even when the iteration cap is hit
/// (`converged = false`); the caller decides whether that is fatal.
/// A zero right-hand side short-circuits to the exact solution 0.
pub fn solve_spd(
    apply_m: impl Fn(&ImageGrid) -> ImageGrid,
    b: &ImageGrid,
    x0: &ImageGrid,
    cfg: &CgConfig,
) -> Result<(ImageGrid, CgReport)> {
    if !b.same_shape(x0) {
        return Err(Error::dimension("cg: b and x0 shapes differ"));
    }
    if !(cfg.rel_tolerance > 0.0 && cfg.rel_tolerance < 1.0) {
        return Err(Error::config("cg: rel_tolerance must be in (0,1)"));
    }
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok((
            ImageGrid::zeros_like(b),
            CgReport {
                iterations_used: 0,
                final_relative_residual: 0.0,
                converged: true,
                residual_history: vec![0.0],
            },
        ));
    }

    let mut x = x0.clone();
    let mut r = b.sub(&apply_m(&x))?;
    let mut rho = inner_product(&r, &r)?;
    let mut history = vec![rho.sqrt() / b_norm];
    if rho.sqrt() <= cfg.rel_tolerance * b_norm {
        return Ok((
            x,
            CgReport {
                iterations_used: 0,
                final_relative_residual: rho.sqrt() / b_norm,
                converged: true,
                residual_history: history,
            },
        ));
    }

    let mut p = r.clone();
    for iter in 1..=cfg.max_iterations {
        let q = apply_m(&p);
        let pq = inner_product(&p, &q)?;
        if !pq.is_finite() || pq <= 0.0 {
            return Err(Error::numerical(
                None,
                format!("cg: <p, Mp> = {pq} (operator not positive definite?)"),
            ));
        }
        let alpha = rho / pq;
        x = x.axpy(alpha, &p)?;
        r = r.axpy(-alpha, &q)?;
        let rho_next = inner_product(&r, &r)?;
        if !rho_next.is_finite() {
            return Err(Error::numerical(None, "cg: residual became non-finite"));
        }
        let rel = rho_next.sqrt() / b_norm;
        history.push(rel);
        if rel <= cfg.rel_tolerance {
            return Ok((
                x,
                CgReport {
                    iterations_used: iter,
                    final_relative_residual: rel,
                    converged: true,
                    residual_history: history,
                },
            ));
        }
        let beta = rho_next / rho;
        p = r.axpy(beta, &p)?;
        rho = rho_next;
    }
    let rel = rho.sqrt() / b_norm;
    Ok((
        x,
        CgReport {
            iterations_used: cfg.max_iterations,
            final_relative_residual: rel,
            converged: false,
            residual_history: history,
        },
    ))
}

/// The (unnormalized) coefficient map of the quadratic substep:
/// `u -> A'A u + beta_t * Dh'Dh u + beta_s * Dv'Dv u`.
pub fn make_admm_normal_operator<'a>(
    a: &'a dyn LinearOperator,
    dh: &'a dyn LinearOperator,
    dv: &'a dyn LinearOperator,
    beta_t: f64,
    beta_s: f64,
) -> Result<impl Fn(&ImageGrid) -> ImageGrid + 'a> {
    if !(beta_t > 0.0 && beta_s > 0.0) {
        return Err(Error::config(format!(
            "penalty parameters must be positive, got beta_t={beta_t}, beta_s={beta_s}"
        )));
    }
    let shape = a.input_shape();
    if dh.input_shape() != shape || dv.input_shape() != shape {
        return Err(Error::dimension("normal operator: operator shapes differ"));
    }
    Ok(move |u: &ImageGrid| {
        let mut acc = a.apply_adjoint(&a.apply(u));
        acc = acc
            .axpy(beta_t, &dh.apply_adjoint(&dh.apply(u)))
            .expect("shape");
        acc.axpy(beta_s, &dv.apply_adjoint(&dv.apply(u)))
            .expect("shape")
    })
}

/// Right-hand side of the quadratic substep's optimality system:
/// `A'g + beta_t * Dh'(t - lambda_t/beta_t) + beta_s * Dv'(s - lambda_s/beta_s)`.
#[allow(clippy::too_many_arguments)]
pub fn make_admm_rhs(
    a: &dyn LinearOperator,
    dh: &dyn LinearOperator,
    dv: &dyn LinearOperator,
    g: &ImageGrid,
    t: &ImageGrid,
    s: &ImageGrid,
    lambda_t: &ImageGrid,
    lambda_s: &ImageGrid,
    beta_t: f64,
    beta_s: f64,
) -> Result<ImageGrid> {
    if g.shape() != a.output_shape() {
        return Err(Error::dimension("rhs: g does not match A's output shape"));
    }
    if !(t.same_shape(lambda_t) && s.same_shape(lambda_s)) {
        return Err(Error::dimension("rhs: split/dual plane shapes differ"));
    }
    let mut rhs = a.apply_adjoint(g);
    let th = t.axpy(-1.0 / beta_t, lambda_t)?;
    rhs = rhs.axpy(beta_t, &dh.apply_adjoint(&th))?;
    let sv = s.axpy(-1.0 / beta_s, lambda_s)?;
    rhs.axpy(beta_s, &dv.apply_adjoint(&sv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{
        compose_forward, make_blur, make_downsample, make_gradient_h, make_gradient_v, BlurSpec,
        BoundaryCondition, DownsampleSpec,
    };
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(shape: (usize, usize), rng: &mut ChaCha8Rng) -> ImageGrid {
        let (h, w) = shape;
        let data = (0..h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ImageGrid::from_vec(h, w, 1, data).unwrap()
    }

    fn densify_map(
        apply: &impl Fn(&ImageGrid) -> ImageGrid,
        shape: (usize, usize),
    ) -> DMatrix<f64> {
        let n = shape.0 * shape.1;
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let col = apply(&ImageGrid::from_vec(shape.0, shape.1, 1, e).unwrap());
            for (i, v) in col.data().iter().enumerate() {
                m[(i, k)] = *v;
            }
        }
        m
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_grid((6, 6), &mut rng);
        let x0 = ImageGrid::zeros(6, 6);
        let (x, rep) = solve_spd(|v| v.clone(), &b, &x0, &CgConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations_used, 1);
        assert!(x.sub(&b).unwrap().norm() <= 1e-12);
    }

    #[test]
    fn scaled_identity_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_grid((5, 5), &mut rng);
        let x0 = ImageGrid::zeros(5, 5);
        let (x, rep) = solve_spd(|v| v.scaled(2.0), &b, &x0, &CgConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(x.sub(&b.scaled(0.5)).unwrap().norm() <= 1e-10);
    }

    #[test]
    fn zero_rhs_returns_zero_solution() {
        let b = ImageGrid::zeros(4, 4);
        let x0 = ImageGrid::new_constant(4, 4, 3.0).unwrap();
        let (x, rep) = solve_spd(|v| v.clone(), &b, &x0, &CgConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations_used, 0);
        assert_eq!(x.norm(), 0.0);
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100; // 10x10 grid
        for _ in 0..5 {
            let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let m = raw.transpose() * &raw + DMatrix::identity(n, n);
            let apply = |x: &ImageGrid| {
                let xv = DVector::from_column_slice(x.data());
                let y = &m * xv;
                ImageGrid::from_vec(10, 10, 1, y.as_slice().to_vec()).unwrap()
            };
            let b = random_grid((10, 10), &mut rng);
            let x0 = ImageGrid::zeros(10, 10);
            let cfg = CgConfig {
                rel_tolerance: 1e-10,
                max_iterations: 500,
            };
            let (x, rep) = solve_spd(apply, &b, &x0, &cfg).unwrap();
            assert!(rep.converged);
            let oracle = m
                .clone()
                .lu()
                .solve(&DVector::from_column_slice(b.data()))
                .unwrap();
            let diff: f64 = x
                .data()
                .iter()
                .zip(oracle.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(diff <= 1e-6 * oracle.norm());
        }
    }

    #[test]
    fn warm_start_at_solution_is_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sol = random_grid((6, 6), &mut rng);
        let b = sol.scaled(3.0); // M = 3I
        let (x, rep) = solve_spd(|v| v.scaled(3.0), &b, &sol, &CgConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations_used <= 1);
        assert!(x.sub(&sol).unwrap().norm() <= 1e-10);
    }

    fn standard_operators(
        shape: (usize, usize),
    ) -> (
        crate::operators::DownsampleOp,
        crate::operators::BlurOp,
        crate::operators::GradientOp,
        crate::operators::GradientOp,
    ) {
        let s = make_downsample(shape, &DownsampleSpec::new(2)).unwrap();
        let h = make_blur(shape, &BlurSpec::gaussian(1.0)).unwrap();
        let dh = make_gradient_h(shape, BoundaryCondition::DirichletZero);
        let dv = make_gradient_v(shape, BoundaryCondition::DirichletZero);
        (s, h, dh, dv)
    }

    #[test]
    fn normal_operator_matches_dense_assembly() {
        let shape = (8, 8);
        let (s, h, dh, dv) = standard_operators(shape);
        let a = compose_forward(&s, &h).unwrap();
        let (bt, bs) = (1.7, 0.9);
        let normal = make_admm_normal_operator(&a, &dh, &dv, bt, bs).unwrap();

        let dense_a = {
            let mut m = DMatrix::zeros(16, 64);
            for k in 0..64 {
                let mut e = vec![0.0; 64];
                e[k] = 1.0;
                let col = a.apply(&ImageGrid::from_vec(8, 8, 1, e).unwrap());
                for (i, v) in col.data().iter().enumerate() {
                    m[(i, k)] = *v;
                }
            }
            m
        };
        let dense_dh = densify_map(&|x: &ImageGrid| dh.apply(x), shape);
        let dense_dv = densify_map(&|x: &ImageGrid| dv.apply(x), shape);
        let dense_m = dense_a.transpose() * &dense_a
            + bt * dense_dh.transpose() * &dense_dh
            + bs * dense_dv.transpose() * &dense_dv;

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_grid(shape, &mut rng);
        let got = normal(&u);
        let expect = &dense_m * DVector::from_column_slice(u.data());
        for i in 0..64 {
            assert!((got.data()[i] - expect[i]).abs() <= 1e-10);
        }
        // zero maps to zero
        assert_eq!(normal(&ImageGrid::zeros(8, 8)).norm(), 0.0);
    }

    #[test]
    fn normal_operator_rejects_degenerate_betas() {
        let shape = (8, 8);
        let (s, h, dh, dv) = standard_operators(shape);
        let a = compose_forward(&s, &h).unwrap();
        assert!(make_admm_normal_operator(&a, &dh, &dv, 0.0, 0.0).is_err());
        assert!(make_admm_normal_operator(&a, &dh, &dv, 1.0, -1.0).is_err());
    }

    #[test]
    fn normal_operator_symmetric_positive_definite() {
        let shape = (8, 8);
        let (s, h, dh, dv) = standard_operators(shape);
        let a = compose_forward(&s, &h).unwrap();
        let normal = make_admm_normal_operator(&a, &dh, &dv, 2.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..30 {
            let x = random_grid(shape, &mut rng);
            let y = random_grid(shape, &mut rng);
            let mxy = inner_product(&normal(&x), &y).unwrap();
            let xmy = inner_product(&x, &normal(&y)).unwrap();
            assert!((mxy - xmy).abs() <= 1e-8 * x.norm() * y.norm());
            let quad = inner_product(&normal(&x), &x).unwrap();
            assert!(quad > 0.0, "positive definiteness");
        }
    }

    #[test]
    fn rhs_linearity_cases() {
        let shape = (8, 8);
        let (s, h, dh, dv) = standard_operators(shape);
        let a = compose_forward(&s, &h).unwrap();
        let zero_hr = ImageGrid::zeros(8, 8);
        let zero_lr = ImageGrid::zeros(4, 4);
        let rhs = make_admm_rhs(
            &a, &dh, &dv, &zero_lr, &zero_hr, &zero_hr, &zero_hr, &zero_hr, 1.0, 1.0,
        )
        .unwrap();
        assert_eq!(rhs.norm(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_grid((4, 4), &mut rng);
        let rhs = make_admm_rhs(
            &a, &dh, &dv, &g, &zero_hr, &zero_hr, &zero_hr, &zero_hr, 2.5, 2.5,
        )
        .unwrap();
        let expect = a.apply_adjoint(&g);
        assert!(rhs.sub(&expect).unwrap().norm() <= 1e-14);
    }

    #[test]
    fn admm_system_cg_matches_dense_solve() {
        let shape = (8, 8);
        let (s, h, dh, dv) = standard_operators(shape);
        let a = compose_forward(&s, &h).unwrap();
        let (bt, bs) = (3.0, 3.0);
        let normal = make_admm_normal_operator(&a, &dh, &dv, bt, bs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_grid((4, 4), &mut rng);
        let t = random_grid(shape, &mut rng);
        let sv = random_grid(shape, &mut rng);
        let lt = random_grid(shape, &mut rng);
        let ls = random_grid(shape, &mut rng);
        let rhs = make_admm_rhs(&a, &dh, &dv, &g, &t, &sv, &lt, &ls, bt, bs).unwrap();

        let cfg = CgConfig {
            rel_tolerance: 1e-10,
            max_iterations: 400,
        };
        let (x, rep) = solve_spd(&normal, &rhs, &ImageGrid::zeros(8, 8), &cfg).unwrap();
        assert!(rep.converged);

        let dense_m = densify_map(&normal, shape);
        let oracle = dense_m
            .lu()
            .solve(&DVector::from_column_slice(rhs.data()))
            .unwrap();
        let diff: f64 = x
            .data()
            .iter()
            .zip(oracle.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-6 * oracle.norm());
    }

    // The guaranteed monotone quantity for CG is the A-norm of the error;
    // the 2-norm of the residual may wiggle on ill-conditioned systems, so
    // the non-increase check runs on the error A-norm via a dense oracle.
    #[test]
    fn error_a_norm_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 36;
        let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let m = raw.transpose() * &raw + DMatrix::identity(n, n);
        let b = random_grid((6, 6), &mut rng);
        let exact = m
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(b.data()))
            .unwrap();

        // re-run CG step by step by capping iterations
        let mut prev_anorm = f64::INFINITY;
        for cap in 1..=20usize {
            let cfg = CgConfig {
                rel_tolerance: 1e-14,
                max_iterations: cap,
            };
            let apply = |x: &ImageGrid| {
                let y = &m * DVector::from_column_slice(x.data());
                ImageGrid::from_vec(6, 6, 1, y.as_slice().to_vec()).unwrap()
            };
            let (x, _) = solve_spd(apply, &b, &ImageGrid::zeros(6, 6), &cfg).unwrap();
            let e = DVector::from_column_slice(x.data()) - &exact;
            let anorm = (e.transpose() * &m * &e)[(0, 0)].sqrt();
            assert!(anorm <= prev_anorm + 1e-12 * anorm.max(1.0));
            prev_anorm = anorm;
        }
    }

    #[test]
    fn error_a_norm_non_increasing_on_admm_systems() {
        // Residual 2-norms can climb by ~30% on these systems (ordinary CG
        // behavior); the A-norm of the error is the monotone quantity.
        let shape = (8, 8);
        let (s, h, dh, dv) = standard_operators(shape);
        let a = compose_forward(&s, &h).unwrap();
        let normal = make_admm_normal_operator(&a, &dh, &dv, 5.0, 5.0).unwrap();
        let dense_m = densify_map(&normal, shape);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = random_grid(shape, &mut rng);
        let exact = dense_m
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(b.data()))
            .unwrap();
        let mut prev_anorm = f64::INFINITY;
        for cap in 1..=25usize {
            let cfg = CgConfig {
                rel_tolerance: 1e-14,
                max_iterations: cap,
            };
            let (x, _) = solve_spd(&normal, &b, &ImageGrid::zeros(8, 8), &cfg).unwrap();
            let e = DVector::from_column_slice(x.data()) - &exact;
            let anorm = (e.transpose() * &dense_m * &e)[(0, 0)].abs().sqrt();
            assert!(anorm <= prev_anorm + 1e-12 * anorm.max(1.0));
            prev_anorm = anorm;
        }
    }
}
