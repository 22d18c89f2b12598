//! Joint estimation of an edge flow and the triangle metric `G2` from one
//! noisy observation.
//!
//! The estimator alternates two convex blocks of
//!
//! ```text
//! min  || B1^T x0 + G1 B2 G2^{-1} x2 + xh - x_tilde ||^2
//!        + l0 |x0|_1 + l2 |x2|_1 + lh |xh|_1
//! s.t. L(G2) xh = 0,  G2 positive diagonal
//! ```
//!
//! first over the signal components with `G2` fixed, then over `G2` with the
//! components fixed. Each accepted block update is non-increasing in the
//! objective above, which is what `objective_trace` records.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex2;
use crate::error::{Error, Result};
use crate::hodge::{
    harmonic_basis, HodgeComponents, HodgeOperators, MetricTensor, SimplicialSignal,
    DECOMPOSE_RCOND, KERNEL_RTOL,
};
use crate::linalg::{self, scale_cols, scale_rows, PINV_RCOND};

/// How the unregularised signal block is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// `x0 = L0^+ B1 x_tilde`, `x2 = (W B2^T G1 B2 W)^+ W B2^T x_tilde`, harmonic
    /// part as the residual.
    #[default]
    PaperLiteral,
    /// The exact minimiser of the signal block: the weighted Hodge
    /// decomposition of the observation under the current metrics.
    ExactLs,
}

/// l1 penalty weights on the node potential, the triangle potential and the
/// harmonic flow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L1Weights {
    pub node: f64,
    pub triangle: f64,
    pub harmonic: f64,
}

impl L1Weights {
    pub const ZERO: L1Weights = L1Weights {
        node: 0.0,
        triangle: 0.0,
        harmonic: 0.0,
    };

    pub fn new(node: f64, triangle: f64, harmonic: f64) -> Self {
        Self {
            node,
            triangle,
            harmonic,
        }
    }

    pub fn uniform(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.node * s, self.triangle * s, self.harmonic * s)
    }

    pub fn is_zero(&self) -> bool {
        self.node == 0.0 && self.triangle == 0.0 && self.harmonic == 0.0
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("node", self.node),
            ("triangle", self.triangle),
            ("harmonic", self.harmonic),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "l1 weight `{name}` must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// `G2 = I` and the closed-form components at that metric.
    #[default]
    Identity,
    /// `G2` drawn from `seed`, components in closed form at that metric.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub n_iterations: usize,
    /// Stop once the relative objective decrease of an iteration drops below
    /// this value.
    pub early_stop_rtol: Option<f64>,
    pub q2_tolerance: f64,
    pub q2_max_steps: usize,
    pub q2_penalty_weight: f64,
    pub l1_weights: L1Weights,
    pub l1_tolerance: f64,
    pub l1_max_steps: usize,
    /// Lower bound on the diagonal of `G2^{-1}`.
    pub w_floor: f64,
    pub update_rule: UpdateRule,
    pub init: InitKind,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_iterations: 50,
            early_stop_rtol: None,
            q2_tolerance: 1e-8,
            q2_max_steps: 2000,
            q2_penalty_weight: 1e3,
            l1_weights: L1Weights::ZERO,
            l1_tolerance: 1e-9,
            l1_max_steps: 20_000,
            w_floor: 1e-6,
            update_rule: UpdateRule::PaperLiteral,
            init: InitKind::Identity,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "`{name}` must be positive, got {v}"
                )))
            }
        };
        if self.n_iterations == 0 {
            return Err(Error::InvalidArgument("`n_iterations` must be at least 1".into()));
        }
        positive("q2_tolerance", self.q2_tolerance)?;
        positive("q2_penalty_weight", self.q2_penalty_weight)?;
        positive("l1_tolerance", self.l1_tolerance)?;
        positive("w_floor", self.w_floor)?;
        if let Some(r) = self.early_stop_rtol {
            positive("early_stop_rtol", r)?;
        }
        if self.q2_max_steps == 0 || self.l1_max_steps == 0 {
            return Err(Error::InvalidArgument("step budgets must be at least 1".into()));
        }
        self.l1_weights.validate()
    }
}

/// Problem data shared by every block solve.
struct Problem<'a> {
    ops: HodgeOperators,
    g0: &'a MetricTensor,
    g1: &'a MetricTensor,
    x: &'a DVector<f64>,
}

impl<'a> Problem<'a> {
    fn new(
        x_tilde: &'a SimplicialSignal,
        complex: &SimplicialComplex2,
        g0: &'a MetricTensor,
        g1: &'a MetricTensor,
    ) -> Result<Self> {
        let ops = HodgeOperators::new(complex)?;
        ops.check_metrics(Some(g0), Some(g1), None)?;
        x_tilde.check(1, complex.n_edges())?;
        Ok(Self {
            ops,
            g0,
            g1,
            x: &x_tilde.values,
        })
    }

    fn check_components(&self, c: &HodgeComponents) -> Result<()> {
        c.x0.check(0, self.ops.n_vertices())?;
        c.x2.check(2, self.ops.n_triangles())?;
        c.xh.check(1, self.ops.n_edges())
    }

    fn residual(&self, c: &HodgeComponents, w2: &[f64]) -> DVector<f64> {
        self.ops.flow_parts_w(c, self.g1, w2).total() - self.x
    }

    fn objective(&self, c: &HodgeComponents, w2: &[f64], l1: &L1Weights) -> f64 {
        self.residual(c, w2).norm_squared()
            + l1.node * c.x0.values.lp_norm(1)
            + l1.triangle * c.x2.values.lp_norm(1)
            + l1.harmonic * c.xh.values.lp_norm(1)
    }

    /// `L_d = B1^T G0 B1 G1^{-1}`
    fn lower_laplacian(&self) -> DMatrix<f64> {
        let b1 = self.ops.b1();
        let gb = scale_cols(&scale_rows(b1, self.g0.weights()), &self.g1.inverse_weights());
        b1.transpose() * gb
    }

    /// `|| L(G2) xh ||`
    fn harmonic_gap(&self, xh: &DVector<f64>, w2: &[f64]) -> f64 {
        let lower = self.lower_laplacian() * xh;
        let curl = self.ops.b2().tr_mul(xh);
        let weighted = DVector::from_iterator(curl.len(), curl.iter().zip(w2).map(|(c, w)| c * w));
        let upper = scale_rows(self.ops.b2(), self.g1.weights()) * weighted;
        (lower + upper).norm()
    }

    fn closed_form(&self, w2: &[f64], rule: UpdateRule) -> Result<HodgeComponents> {
        match rule {
            UpdateRule::ExactLs => {
                let g2 = MetricTensor::from_inverse_weights(2, w2)?;
                self.ops.decompose(self.x, self.g1, &g2, DECOMPOSE_RCOND)
            }
            UpdateRule::PaperLiteral => {
                let b1 = self.ops.b1();
                let b2 = self.ops.b2();
                // L0 = G0 B1 G1^{-1} B1^T
                let l0 = scale_rows(&scale_cols(b1, &self.g1.inverse_weights()), self.g0.weights())
                    * b1.transpose();
                let x0 = linalg::pinv(&l0, PINV_RCOND) * (b1 * self.x);

                let b2w = scale_cols(b2, w2);
                let gram = b2w.transpose() * scale_rows(&b2w, self.g1.weights());
                let x2 = linalg::pinv(&gram, PINV_RCOND) * b2w.tr_mul(self.x);

                let sol = self.ops.solenoidal_map(self.g1, w2) * &x2;
                let xh = self.x - b1.tr_mul(&x0) - sol;
                Ok(HodgeComponents {
                    x0: SimplicialSignal::new(0, x0),
                    x2: SimplicialSignal::new(2, x2),
                    xh: SimplicialSignal::new(1, xh),
                })
            }
        }
    }
}

/// Closed-form minimiser of the signal block at a fixed `G2`.
pub fn q1_closed_form(
    x_tilde: &SimplicialSignal,
    complex: &SimplicialComplex2,
    g0: &MetricTensor,
    g1: &MetricTensor,
    g2: &MetricTensor,
    rule: UpdateRule,
) -> Result<HodgeComponents> {
    let p = Problem::new(x_tilde, complex, g0, g1)?;
    g2.check(2, complex.n_triangles())?;
    p.closed_form(&g2.inverse_weights(), rule)
}

/// Value of the joint objective at `(components, G2)`.
pub fn q_objective(
    x_tilde: &SimplicialSignal,
    complex: &SimplicialComplex2,
    g1: &MetricTensor,
    g2: &MetricTensor,
    components: &HodgeComponents,
    l1: &L1Weights,
) -> Result<f64> {
    let g0 = MetricTensor::identity(0, complex.n_vertices());
    let p = Problem::new(x_tilde, complex, &g0, g1)?;
    g2.check(2, complex.n_triangles())?;
    p.check_components(components)?;
    Ok(p.objective(components, &g2.inverse_weights(), l1))
}

/// `|| L(G2) xh ||`, the violation of the harmonic constraint.
pub fn harmonic_gap(
    complex: &SimplicialComplex2,
    g0: &MetricTensor,
    g1: &MetricTensor,
    g2: &MetricTensor,
    xh: &SimplicialSignal,
) -> Result<f64> {
    let ops = HodgeOperators::new(complex)?;
    ops.check_metrics(Some(g0), Some(g1), Some(g2))?;
    xh.check(1, complex.n_edges())?;
    let p = Problem {
        ops,
        g0,
        g1,
        x: &xh.values,
    };
    Ok(p.harmonic_gap(&xh.values, &g2.inverse_weights()))
}

#[derive(Clone, Debug)]
pub struct L1Outcome {
    pub components: HodgeComponents,
    pub objective: f64,
    pub iterations: usize,
    /// False when the step budget ran out before the residual tolerances
    /// were met; `components` then holds the last iterate.
    pub converged: bool,
}

/// Dual state carried between consecutive l1 solves.
#[derive(Clone, Debug)]
pub struct L1WarmStart {
    z: DVector<f64>,
    u: DVector<f64>,
    rho: f64,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// ADMM for the l1-regularised signal block. The harmonic flow is written as
/// `xh = H c` with `H` a Euclidean orthonormal basis of `ker(L)`, and the
/// penalties act on the split copy `z = (x0, x2, H c)`.
struct L1Solver {
    harmonic: DMatrix<f64>,
}

impl L1Solver {
    fn new(p: &Problem<'_>) -> Result<Self> {
        // ker(L) does not depend on G2, identity is as good as any
        let g2 = MetricTensor::identity(2, p.ops.n_triangles());
        let l1 = p.ops.laplacian(1, p.g0, p.g1, &g2)?;
        let basis = harmonic_basis(&l1.full, p.g1, KERNEL_RTOL)?;
        Ok(Self {
            harmonic: linalg::orthonormal_columns(&basis, 1e-8),
        })
    }

    fn solve(
        &self,
        p: &Problem<'_>,
        w2: &[f64],
        lambda: &L1Weights,
        tol: f64,
        max_steps: usize,
        warm: Option<&L1WarmStart>,
    ) -> (L1Outcome, L1WarmStart) {
        let (nv, nt, ne) = (p.ops.n_vertices(), p.ops.n_triangles(), p.ops.n_edges());
        let nh = self.harmonic.ncols();
        let n = nv + nt + nh;
        let m_split = nv + nt + ne;

        let mut design = DMatrix::zeros(ne, n);
        design.columns_mut(0, nv).copy_from(&p.ops.b1().transpose());
        design
            .columns_mut(nv, nt)
            .copy_from(&p.ops.solenoidal_map(p.g1, w2));
        design.columns_mut(nv + nt, nh).copy_from(&self.harmonic);
        let gram2 = design.tr_mul(&design) * 2.0;
        let rhs0 = design.tr_mul(p.x) * 2.0;

        let thresholds: Vec<f64> = (0..m_split)
            .map(|i| {
                if i < nv {
                    lambda.node
                } else if i < nv + nt {
                    lambda.triangle
                } else {
                    lambda.harmonic
                }
            })
            .collect();

        let split = |v: &DVector<f64>| -> DVector<f64> {
            let mut out = DVector::zeros(m_split);
            out.rows_mut(0, nv + nt).copy_from(&v.rows(0, nv + nt));
            out.rows_mut(nv + nt, ne)
                .copy_from(&(&self.harmonic * v.rows(nv + nt, nh)));
            out
        };
        let split_t = |y: &DVector<f64>| -> DVector<f64> {
            let mut out = DVector::zeros(n);
            out.rows_mut(0, nv + nt).copy_from(&y.rows(0, nv + nt));
            out.rows_mut(nv + nt, nh)
                .copy_from(&self.harmonic.tr_mul(&y.rows(nv + nt, ne)));
            out
        };

        let mean_diag = if n > 0 { gram2.trace() / n as f64 } else { 1.0 };
        let (mut z, mut u, mut rho) = match warm {
            Some(w) if w.z.len() == m_split => (w.z.clone(), w.u.clone(), w.rho),
            _ => (DVector::zeros(m_split), DVector::zeros(m_split), mean_diag.max(1e-8)),
        };

        let factor = |rho: f64| -> Cholesky<f64, Dyn> {
            let mut a = gram2.clone();
            for i in 0..n {
                a[(i, i)] += rho;
            }
            Cholesky::new(a).expect("gram + rho I is positive definite")
        };
        let mut chol = factor(rho);

        let scale = p.x.amax().max(1.0);
        let eps_abs = tol * scale;
        let mut v = DVector::zeros(n);
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..max_steps {
            iterations = it + 1;
            let rhs = &rhs0 + split_t(&(&z - &u)) * rho;
            v = chol.solve(&rhs);
            let kv = split(&v);
            let z_old = z.clone();
            let shifted = &kv + &u;
            z = DVector::from_iterator(
                m_split,
                shifted
                    .iter()
                    .zip(&thresholds)
                    .map(|(s, l)| soft_threshold(*s, l / rho)),
            );
            let r = &kv - &z;
            u += &r;
            let r_norm = r.norm();
            let s_norm = rho * split_t(&(&z - &z_old)).norm();
            let eps_pri = (m_split as f64).sqrt() * eps_abs + tol * kv.norm().max(z.norm());
            let eps_dual =
                (n as f64).sqrt() * eps_abs + tol * rho * split_t(&u).norm();
            if r_norm <= eps_pri && s_norm <= eps_dual {
                converged = true;
                break;
            }
            if it % 10 == 9 {
                let new_rho = if r_norm > 10.0 * s_norm {
                    rho * 2.0
                } else if s_norm > 10.0 * r_norm {
                    rho * 0.5
                } else {
                    rho
                };
                if new_rho != rho && new_rho > 1e-12 && new_rho < 1e12 {
                    u *= rho / new_rho;
                    rho = new_rho;
                    chol = factor(rho);
                }
            }
        }

        let coeffs = v.rows(nv + nt, nh).into_owned();
        let xh = &self.harmonic * &coeffs;
        let from_v = HodgeComponents {
            x0: SimplicialSignal::new(0, v.rows(0, nv).into_owned()),
            x2: SimplicialSignal::new(2, v.rows(nv, nt).into_owned()),
            xh: SimplicialSignal::new(1, xh.clone()),
        };
        let from_z = HodgeComponents {
            x0: SimplicialSignal::new(0, z.rows(0, nv).into_owned()),
            x2: SimplicialSignal::new(2, z.rows(nv, nt).into_owned()),
            xh: SimplicialSignal::new(1, xh),
        };
        let fv = p.objective(&from_v, w2, lambda);
        let fz = p.objective(&from_z, w2, lambda);
        let (components, objective) = if fz <= fv { (from_z, fz) } else { (from_v, fv) };
        (
            L1Outcome {
                components,
                objective,
                iterations,
                converged,
            },
            L1WarmStart { z, u, rho },
        )
    }
}

/// l1-regularised signal block at a fixed `G2`, with the harmonic flow kept
/// in `ker(L)`.
#[allow(clippy::too_many_arguments)]
pub fn q1_l1_regularized(
    x_tilde: &SimplicialSignal,
    complex: &SimplicialComplex2,
    g0: &MetricTensor,
    g1: &MetricTensor,
    g2: &MetricTensor,
    l1_weights: &L1Weights,
    tol: f64,
    max_steps: usize,
) -> Result<L1Outcome> {
    l1_weights.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let p = Problem::new(x_tilde, complex, g0, g1)?;
    g2.check(2, complex.n_triangles())?;
    let solver = L1Solver::new(&p)?;
    Ok(solver
        .solve(&p, &g2.inverse_weights(), l1_weights, tol, max_steps, None)
        .0)
}

#[derive(Clone, Debug)]
pub struct Q2Outcome {
    pub g2: MetricTensor,
    /// Joint objective (data term plus l1 terms) at the returned metric.
    pub objective: f64,
    /// `|| L(G2) xh ||` at the returned metric.
    pub feasibility_gap: f64,
    pub feasible: bool,
    pub steps: usize,
    /// False when the returned metric is the incoming one because no
    /// candidate improved on it.
    pub moved: bool,
}

/// Metric block: minimises the objective over `w = diag(G2^{-1}) >= w_floor`
/// with the harmonic constraint enforced by a quadratic penalty.
///
/// The objective is linear in `w`:
/// `|| G1 B2 diag(x2) w + (B1^T x0 + xh - x_tilde) ||^2`, and the constraint
/// reads `G1 B2 diag(B2^T xh) w = -L_d xh`.
#[allow(clippy::too_many_arguments)]
pub fn q2_solve(
    x_tilde: &SimplicialSignal,
    complex: &SimplicialComplex2,
    g0: &MetricTensor,
    g1: &MetricTensor,
    components: &HodgeComponents,
    incoming: &MetricTensor,
    config: &EstimatorConfig,
) -> Result<Q2Outcome> {
    config.validate()?;
    let p = Problem::new(x_tilde, complex, g0, g1)?;
    incoming.check(2, complex.n_triangles())?;
    p.check_components(components)?;
    Ok(solve_metric_block(&p, components, &incoming.inverse_weights(), config))
}

fn solve_metric_block(
    p: &Problem<'_>,
    c: &HodgeComponents,
    w_in: &[f64],
    cfg: &EstimatorConfig,
) -> Q2Outcome {
    let nt = p.ops.n_triangles();
    let floor = cfg.w_floor;
    let l1 = &cfg.l1_weights;
    let finish = |w: Vec<f64>, steps: usize, moved: bool| {
        let objective = p.objective(c, &w, l1);
        let gap = p.harmonic_gap(&c.xh.values, &w);
        Q2Outcome {
            g2: MetricTensor::from_inverse_weights(2, &w).expect("w >= floor > 0"),
            objective,
            feasibility_gap: gap,
            feasible: gap <= cfg.q2_tolerance * p.x.norm().max(1.0),
            steps,
            moved,
        }
    };
    let w_start: Vec<f64> = w_in.iter().map(|w| w.max(floor)).collect();
    if nt == 0 || c.x2.values.iter().all(|v| *v == 0.0) {
        return finish(w_in.to_vec(), 0, false);
    }

    let g1w = scale_rows(p.ops.b2(), p.g1.weights());
    let a = scale_cols(&g1w, c.x2.values.as_slice());
    let offset = p.ops.b1().tr_mul(&c.x0.values) + &c.xh.values - p.x;

    let curl = p.ops.b2().tr_mul(&c.xh.values);
    let lower_h = p.lower_laplacian() * &c.xh.values;
    let xh_scale = c.xh.values.norm().max(f64::MIN_POSITIVE);
    let vacuous = curl.amax() <= 1e-12 * xh_scale && lower_h.amax() <= 1e-12 * xh_scale;

    // Stacked least squares || P w - q ||^2
    let (pm, q) = if vacuous {
        (a, -offset)
    } else {
        let mu = cfg.q2_penalty_weight.sqrt();
        let cmat = scale_cols(&g1w, curl.as_slice()) * mu;
        let mut pm = DMatrix::zeros(2 * p.ops.n_edges(), nt);
        pm.rows_mut(0, p.ops.n_edges()).copy_from(&a);
        pm.rows_mut(p.ops.n_edges(), p.ops.n_edges()).copy_from(&cmat);
        let mut q = DVector::zeros(2 * p.ops.n_edges());
        q.rows_mut(0, p.ops.n_edges()).copy_from(&(-offset));
        q.rows_mut(p.ops.n_edges(), p.ops.n_edges())
            .copy_from(&(-lower_h * mu));
        (pm, q)
    };
    let penalized = |w: &DVector<f64>| (&pm * w - &q).norm_squared();
    let gram = pm.tr_mul(&pm);
    let pq = pm.tr_mul(&q);
    let grad = |w: &DVector<f64>| (&gram * w - &pq) * 2.0;
    let project = |w: DVector<f64>| w.map(|v| v.max(floor));
    let proj_grad_norm = |w: &DVector<f64>, g: &DVector<f64>| {
        w.iter()
            .zip(g.iter())
            .map(|(wi, gi)| if *wi > floor || *gi < 0.0 { gi.abs() } else { 0.0 })
            .fold(0.0_f64, f64::max)
    };
    let grad_scale = 2.0 * pq.amax().max(gram.amax()).max(f64::MIN_POSITIVE);

    let mut w = DVector::from_vec(w_start);
    let mut f = penalized(&w);
    let mut step = 1.0 / (2.0 * gram.trace().max(f64::MIN_POSITIVE));
    let mut steps = 0;
    while steps < cfg.q2_max_steps {
        steps += 1;
        let g = grad(&w);
        if proj_grad_norm(&w, &g) <= cfg.q2_tolerance * grad_scale {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand = project(&w - &g * step);
            let d = &cand - &w;
            let fc = penalized(&cand);
            if fc <= f + g.dot(&d) + d.norm_squared() / (2.0 * step) {
                accepted = d.amax() > 0.0;
                w = cand;
                f = fc;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 1.5;
    }

    // Active-set polish: Newton steps on the free coordinates.
    for _ in 0..(nt + 5) {
        let g = grad(&w);
        let free: Vec<usize> = (0..nt)
            .filter(|&i| w[i] > floor * (1.0 + 1e-12) || g[i] < 0.0)
            .collect();
        if free.is_empty() {
            break;
        }
        let r = &q - &pm * &w;
        let pf = DMatrix::from_fn(pm.nrows(), free.len(), |i, j| pm[(i, free[j])]);
        let delta = linalg::lstsq(&pf, &r, 1e-12);
        let mut alpha: f64 = 1.0;
        for (j, &i) in free.iter().enumerate() {
            if delta[j] < 0.0 {
                alpha = alpha.min((w[i] - floor) / -delta[j]);
            }
        }
        if alpha <= 0.0 || delta.amax() == 0.0 {
            break;
        }
        let mut cand = w.clone();
        for (j, &i) in free.iter().enumerate() {
            cand[i] += alpha * delta[j];
        }
        let cand = project(cand);
        let fc = penalized(&cand);
        if fc < f {
            w = cand;
            f = fc;
        } else {
            break;
        }
    }

    let w_in_vec = DVector::from_column_slice(w_in);
    let f_in = penalized(&w_in_vec);
    let improves_penalized = f < f_in - 1e-14 * (1.0 + f_in);
    let cand = w.as_slice().to_vec();
    let improves_objective = p.objective(c, &cand, l1) <= p.objective(c, w_in, l1);
    if improves_penalized && improves_objective {
        finish(cand, steps, true)
    } else {
        finish(w_in.to_vec(), steps, false)
    }
}

/// Starting point for [`estimate`].
#[derive(Clone, Debug)]
pub struct EstimationInit {
    pub components: HodgeComponents,
    pub g2: MetricTensor,
}

impl EstimationInit {
    /// `G2 = I` (or a random metric for [`InitKind::Random`]) and the
    /// closed-form components at that metric.
    pub fn from_config(
        x_tilde: &SimplicialSignal,
        complex: &SimplicialComplex2,
        g0: &MetricTensor,
        g1: &MetricTensor,
        config: &EstimatorConfig,
    ) -> Result<Self> {
        let nt = complex.n_triangles();
        let g2 = match config.init {
            InitKind::Identity => MetricTensor::identity(2, nt),
            InitKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                let w: Vec<f64> = (0..nt).map(|_| rng.random_range(0.5..2.0)).collect();
                MetricTensor::from_inverse_weights(2, &w)?
            }
        };
        let components = q1_closed_form(x_tilde, complex, g0, g1, &g2, config.update_rule)?;
        Ok(Self { components, g2 })
    }
}

#[derive(Clone, Debug)]
pub struct EstimationResult {
    pub components: HodgeComponents,
    pub g2_hat: MetricTensor,
    pub x_hat: SimplicialSignal,
    pub initial_objective: f64,
    /// Objective after each completed iteration.
    pub objective_trace: Vec<f64>,
    pub harmonic_gap: f64,
    pub q2_feasible: bool,
    pub l1_converged: bool,
}

impl EstimationResult {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len()
    }
}

/// Alternating minimisation over the signal block and the metric block.
pub fn estimate(
    x_tilde: &SimplicialSignal,
    complex: &SimplicialComplex2,
    g0: &MetricTensor,
    g1: &MetricTensor,
    init: &EstimationInit,
    config: &EstimatorConfig,
) -> Result<EstimationResult> {
    config.validate()?;
    let p = Problem::new(x_tilde, complex, g0, g1)?;
    init.g2.check(2, complex.n_triangles())?;
    p.check_components(&init.components)?;
    let mut w = init.g2.inverse_weights();
    if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| **v < config.w_floor) {
        return Err(Error::InvalidArgument(format!(
            "initial G2^-1 entry {i} = {v} lies below w_floor = {}",
            config.w_floor
        )));
    }
    let lambda = config.l1_weights;
    let regularized = !lambda.is_zero();
    let solver = if regularized {
        Some(L1Solver::new(&p)?)
    } else {
        None
    };

    let mut z = init.components.clone();
    let mut f = p.objective(&z, &w, &lambda);
    let initial_objective = f;
    let mut trace = Vec::with_capacity(config.n_iterations);
    let mut warm: Option<L1WarmStart> = None;
    let mut l1_converged = true;
    let mut feasible = true;
    let mut gap = p.harmonic_gap(&z.xh.values, &w);

    for _ in 0..config.n_iterations {
        match &solver {
            Some(s) => {
                let (out, state) = s.solve(
                    &p,
                    &w,
                    &lambda,
                    config.l1_tolerance,
                    config.l1_max_steps,
                    warm.as_ref(),
                );
                warm = Some(state);
                l1_converged &= out.converged;
                if out.objective <= f {
                    z = out.components;
                }
            }
            None => {
                z = p.closed_form(&w, config.update_rule)?;
            }
        }
        let q2 = solve_metric_block(&p, &z, &w, config);
        if q2.moved {
            w = q2.g2.inverse_weights();
        }
        f = q2.objective;
        gap = q2.feasibility_gap;
        feasible = q2.feasible;
        let prev = trace.last().copied().unwrap_or(initial_objective);
        trace.push(f);
        if let Some(rtol) = config.early_stop_rtol {
            if prev - f <= rtol * prev.abs() {
                break;
            }
        }
    }

    let g2_hat = MetricTensor::from_inverse_weights(2, &w)?;
    let x_hat = SimplicialSignal::new(1, p.ops.flow_parts_w(&z, g1, &w).total());
    Ok(EstimationResult {
        components: z,
        g2_hat,
        x_hat,
        initial_objective,
        objective_trace: trace,
        harmonic_gap: gap,
        q2_feasible: feasible,
        l1_converged,
    })
}

/// `|x_hat . x| / (||x_hat|| ||x||)`
pub fn correlation(x_hat: &DVector<f64>, x_true: &DVector<f64>) -> Result<f64> {
    if x_hat.len() != x_true.len() {
        return Err(Error::dims("correlation operand", x_true.len(), x_hat.len()));
    }
    let (a, b) = (x_hat.norm(), x_true.norm());
    if a == 0.0 || b == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((x_hat.dot(x_true).abs() / (a * b)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn full_triangle() -> SimplicialComplex2 {
        SimplicialComplex2::new(3, vec![[0, 1], [0, 2], [1, 2]], vec![[0, 1, 2]]).unwrap()
    }

    fn triangle_with_pendant() -> SimplicialComplex2 {
        SimplicialComplex2::new(4, vec![[0, 1], [0, 2], [1, 2], [2, 3]], vec![[0, 1, 2]]).unwrap()
    }

    // two filled triangles, one hollow square: betti_1 = 1
    fn mixed() -> SimplicialComplex2 {
        SimplicialComplex2::new(
            6,
            vec![[0, 1], [0, 2], [1, 2], [1, 3], [2, 3], [3, 4], [3, 5], [4, 5], [2, 4]],
            vec![[0, 1, 2], [1, 2, 3]],
        )
        .unwrap()
    }

    fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
    }

    fn random_metric(rng: &mut ChaCha8Rng, order: usize, n: usize) -> MetricTensor {
        MetricTensor::new(order, (0..n).map(|_| rng.random_range(0.3..3.0)).collect()).unwrap()
    }

    fn signal(v: DVector<f64>) -> SimplicialSignal {
        SimplicialSignal::new(1, v)
    }

    fn parts(c: &SimplicialComplex2, comps: &HodgeComponents, g1: &MetricTensor, g2: &MetricTensor) -> crate::hodge::EdgeFlowParts {
        HodgeOperators::new(c).unwrap().flow_parts(comps, g1, g2).unwrap()
    }

    #[test]
    fn closed_form_recovers_gradient_potential() {
        let c = full_triangle();
        let id0 = MetricTensor::identity(0, 3);
        let id1 = MetricTensor::identity(1, 3);
        let id2 = MetricTensor::identity(2, 1);
        let x0 = DVector::from_column_slice(&[1.0, 0.0, -1.0]);
        let x = signal(HodgeOperators::new(&c).unwrap().b1().tr_mul(&x0));
        for rule in [UpdateRule::PaperLiteral, UpdateRule::ExactLs] {
            let z = q1_closed_form(&x, &c, &id0, &id1, &id2, rule).unwrap();
            assert!((&z.x0.values - &x0).amax() < 1e-12);
            assert!(z.x2.values.amax() < 1e-12 && z.xh.values.amax() < 1e-12);
            let zero = q1_closed_form(&signal(DVector::zeros(3)), &c, &id0, &id1, &id2, rule).unwrap();
            assert_eq!(zero.x0.values.amax() + zero.x2.values.amax() + zero.xh.values.amax(), 0.0);
        }
    }

    #[test]
    fn update_rules_coincide_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = mixed();
        let (n0, n1, n2) = (c.n_vertices(), c.n_edges(), c.n_triangles());
        let g0 = MetricTensor::identity(0, n0);
        let g1 = MetricTensor::identity(1, n1);
        let g2 = MetricTensor::identity(2, n2);
        for _ in 0..10 {
            let x = signal(normal_vec(&mut rng, n1));
            let a = q1_closed_form(&x, &c, &g0, &g1, &g2, UpdateRule::PaperLiteral).unwrap();
            let b = q1_closed_form(&x, &c, &g0, &g1, &g2, UpdateRule::ExactLs).unwrap();
            let h = crate::hodge::hodge_decompose(&x, &c, &g0, &g1, &g2, DECOMPOSE_RCOND).unwrap();
            let (pa, pb, ph) = (parts(&c, &a, &g1, &g2), parts(&c, &b, &g1, &g2), parts(&c, &h, &g1, &g2));
            for (u, v) in [(&pa, &pb), (&pb, &ph)] {
                assert!((&u.irrotational - &v.irrotational).amax() < 1e-8);
                assert!((&u.solenoidal - &v.solenoidal).amax() < 1e-8);
                assert!((&u.harmonic - &v.harmonic).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn literal_solenoidal_part_is_weighted_projection() {
        // the literal triangle update equals the exact one for any metrics;
        // only the node update differs once G0, G1 are not identities
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = mixed();
        let g0 = random_metric(&mut rng, 0, c.n_vertices());
        let g1 = random_metric(&mut rng, 1, c.n_edges());
        let g2 = random_metric(&mut rng, 2, c.n_triangles());
        let x = signal(normal_vec(&mut rng, c.n_edges()));
        let a = q1_closed_form(&x, &c, &g0, &g1, &g2, UpdateRule::PaperLiteral).unwrap();
        let b = q1_closed_form(&x, &c, &g0, &g1, &g2, UpdateRule::ExactLs).unwrap();
        let (pa, pb) = (parts(&c, &a, &g1, &g2), parts(&c, &b, &g1, &g2));
        assert!((&pa.solenoidal - &pb.solenoidal).amax() < 1e-8);
        assert!((&pa.irrotational - &pb.irrotational).amax() > 1e-6);
    }

    #[test]
    fn l1_without_penalty_matches_exact_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for c in [full_triangle(), triangle_with_pendant(), mixed()] {
            let g0 = random_metric(&mut rng, 0, c.n_vertices());
            let g1 = random_metric(&mut rng, 1, c.n_edges());
            let g2 = random_metric(&mut rng, 2, c.n_triangles());
            let x = signal(normal_vec(&mut rng, c.n_edges()));
            let out = q1_l1_regularized(&x, &c, &g0, &g1, &g2, &L1Weights::ZERO, 1e-10, 20_000).unwrap();
            assert!(out.converged);
            let exact = q1_closed_form(&x, &c, &g0, &g1, &g2, UpdateRule::ExactLs).unwrap();
            let (pa, pb) = (parts(&c, &out.components, &g1, &g2), parts(&c, &exact, &g1, &g2));
            assert!((&pa.irrotational - &pb.irrotational).amax() < 1e-6);
            assert!((&pa.solenoidal - &pb.solenoidal).amax() < 1e-6);
            assert!((&pa.harmonic - &pb.harmonic).amax() < 1e-6);
        }
    }

    #[test]
    fn large_node_penalty_kills_potential() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = mixed();
        let (g0, g1, g2) = (
            MetricTensor::identity(0, c.n_vertices()),
            MetricTensor::identity(1, c.n_edges()),
            MetricTensor::identity(2, c.n_triangles()),
        );
        let x = signal(normal_vec(&mut rng, c.n_edges()));
        let l = L1Weights::new(1e4, 0.0, 0.0);
        let out = q1_l1_regularized(&x, &c, &g0, &g1, &g2, &l, 1e-10, 20_000).unwrap();
        assert_eq!(out.components.x0.values.amax(), 0.0);
    }

    /// Cyclic coordinate descent on `||M v - x||^2 + lambda |v|_1`.
    fn lasso_cd(m: &DMatrix<f64>, x: &DVector<f64>, lambda: f64, sweeps: usize) -> f64 {
        let n = m.ncols();
        let mut v = DVector::zeros(n);
        let mut r = -x.clone();
        for _ in 0..sweeps {
            for j in 0..n {
                let col = m.column(j);
                let nn = col.norm_squared();
                if nn == 0.0 {
                    continue;
                }
                let rho = -col.dot(&r) + nn * v[j];
                let new = soft_threshold(rho, lambda / 2.0) / nn;
                r += col * (new - v[j]);
                v[j] = new;
            }
        }
        r.norm_squared() + lambda * v.lp_norm(1)
    }

    #[test]
    fn l1_matches_coordinate_descent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let c = triangle_with_pendant();
        let ops = HodgeOperators::new(&c).unwrap();
        for _ in 0..5 {
            let g0 = MetricTensor::identity(0, 4);
            let g1 = random_metric(&mut rng, 1, 4);
            let g2 = random_metric(&mut rng, 2, 1);
            let x = signal(normal_vec(&mut rng, 4));
            let out =
                q1_l1_regularized(&x, &c, &g0, &g1, &g2, &L1Weights::uniform(0.1), 1e-10, 50_000)
                    .unwrap();
            // no harmonic flows on this complex
            assert_eq!(out.components.xh.values.amax(), 0.0);
            let mut m = DMatrix::zeros(4, 5);
            m.columns_mut(0, 4).copy_from(&ops.b1().transpose());
            m.columns_mut(4, 1)
                .copy_from(&ops.solenoidal_map(&g1, &g2.inverse_weights()));
            let oracle = lasso_cd(&m, &x.values, 0.1, 100_000);
            assert!((out.objective - oracle).abs() < 1e-4, "{} vs {}", out.objective, oracle);
        }
    }

    fn zoom_grid(f: &dyn Fn(&[f64]) -> f64, lo: f64, hi: f64, dim: usize) -> f64 {
        let pts = 41usize;
        let mut box_lo = vec![lo; dim];
        let mut box_hi = vec![hi; dim];
        let mut best = f64::INFINITY;
        for _ in 0..40 {
            let mut best_w = box_lo.clone();
            let total = pts.pow(dim as u32);
            for idx in 0..total {
                let mut k = idx;
                let w: Vec<f64> = (0..dim)
                    .map(|d| {
                        let i = k % pts;
                        k /= pts;
                        box_lo[d] + (box_hi[d] - box_lo[d]) * i as f64 / (pts - 1) as f64
                    })
                    .collect();
                let v = f(&w);
                if v < best {
                    best = v;
                    best_w = w;
                }
            }
            for d in 0..dim {
                let cell = (box_hi[d] - box_lo[d]) / (pts - 1) as f64;
                box_lo[d] = (best_w[d] - 3.0 * cell).max(lo);
                box_hi[d] = (best_w[d] + 3.0 * cell).min(hi);
            }
        }
        best
    }

    #[test]
    fn metric_block_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let c = SimplicialComplex2::new(
            4,
            vec![[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]],
            vec![[0, 1, 2], [1, 2, 3]],
        )
        .unwrap();
        let cfg = EstimatorConfig::default();
        for _ in 0..5 {
            let g0 = MetricTensor::identity(0, 4);
            let g1 = random_metric(&mut rng, 1, 5);
            let x = signal(normal_vec(&mut rng, 5));
            let comps = HodgeComponents {
                x0: SimplicialSignal::new(0, normal_vec(&mut rng, 4)),
                x2: SimplicialSignal::new(2, normal_vec(&mut rng, 2)),
                xh: SimplicialSignal::zeros(1, 5),
            };
            let incoming = MetricTensor::identity(2, 2);
            let out = q2_solve(&x, &c, &g0, &g1, &comps, &incoming, &cfg).unwrap();
            assert!(out.feasible);
            let f = |w: &[f64]| {
                let g2 = MetricTensor::from_inverse_weights(2, w).unwrap();
                q_objective(&x, &c, &g1, &g2, &comps, &L1Weights::ZERO).unwrap()
            };
            let grid = zoom_grid(&f, cfg.w_floor, 50.0, 2);
            assert!(out.objective <= grid + 1e-6, "{} vs grid {}", out.objective, grid);
        }
    }

    #[test]
    fn metric_block_without_triangle_potential_keeps_metric() {
        let c = full_triangle();
        let g0 = MetricTensor::identity(0, 3);
        let g1 = MetricTensor::identity(1, 3);
        let incoming = MetricTensor::new(2, vec![2.5]).unwrap();
        let comps = HodgeComponents::zeros(&c);
        let x = signal(DVector::from_column_slice(&[1.0, -1.0, 1.0]));
        let out = q2_solve(&x, &c, &g0, &g1, &comps, &incoming, &EstimatorConfig::default()).unwrap();
        assert_eq!(out.g2, incoming);
        assert!(!out.moved);
    }

    #[test]
    fn metric_block_recovers_noiseless_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let c = mixed();
        let (n0, n1, n2) = (c.n_vertices(), c.n_edges(), c.n_triangles());
        let g0 = MetricTensor::identity(0, n0);
        let g1 = random_metric(&mut rng, 1, n1);
        let w_true: Vec<f64> = (0..n2).map(|_| rng.random_range(0.2..1.0)).collect();
        let g2_true = MetricTensor::from_inverse_weights(2, &w_true).unwrap();
        let l = HodgeOperators::new(&c).unwrap().laplacian(1, &g0, &g1, &g2_true).unwrap();
        let h = harmonic_basis(&l.full, &g1, KERNEL_RTOL).unwrap();
        let comps = HodgeComponents {
            x0: SimplicialSignal::new(0, normal_vec(&mut rng, n0)),
            x2: SimplicialSignal::new(2, normal_vec(&mut rng, n2)),
            xh: SimplicialSignal::new(1, &h * normal_vec(&mut rng, h.ncols())),
        };
        let x = HodgeOperators::new(&c).unwrap().reconstruct(&comps, &g1, &g2_true).unwrap();
        let out = q2_solve(&x, &c, &g0, &g1, &comps, &MetricTensor::identity(2, n2), &EstimatorConfig::default())
            .unwrap();
        assert!(out.objective.sqrt() <= 1e-6, "residual {}", out.objective.sqrt());
        assert!(out.feasibility_gap <= 1e-8);
        let w = out.g2.inverse_weights();
        for (a, b) in w.iter().zip(&w_true) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn noiseless_estimate_reproduces_observation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let c = mixed();
        let g0 = MetricTensor::identity(0, c.n_vertices());
        let g1 = random_metric(&mut rng, 1, c.n_edges());
        let g2 = random_metric(&mut rng, 2, c.n_triangles());
        let x = signal(normal_vec(&mut rng, c.n_edges()));
        for rule in [UpdateRule::PaperLiteral, UpdateRule::ExactLs] {
            let cfg = EstimatorConfig {
                n_iterations: 3,
                update_rule: rule,
                ..EstimatorConfig::default()
            };
            let init = EstimationInit {
                components: q1_closed_form(&x, &c, &g0, &g1, &g2, rule).unwrap(),
                g2: g2.clone(),
            };
            let r = estimate(&x, &c, &g0, &g1, &init, &cfg).unwrap();
            assert!((&r.x_hat.values - &x.values).amax() < 1e-10);
            assert!(r.objective_trace[0] < 1e-20);
        }
    }

    #[test]
    fn regularized_estimate_descends() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let c = mixed();
        let g0 = MetricTensor::identity(0, c.n_vertices());
        let g1 = random_metric(&mut rng, 1, c.n_edges());
        let x = signal(normal_vec(&mut rng, c.n_edges()));
        let cfg = EstimatorConfig {
            n_iterations: 15,
            l1_weights: L1Weights::uniform(0.2),
            ..EstimatorConfig::default()
        };
        let init = EstimationInit::from_config(&x, &c, &g0, &g1, &cfg).unwrap();
        let r = estimate(&x, &c, &g0, &g1, &init, &cfg).unwrap();
        let mut prev = r.initial_objective;
        for f in &r.objective_trace {
            assert!(*f <= prev + 1e-9, "{f} > {prev}");
            prev = *f;
        }
        assert!(r.g2_hat.inverse_weights().iter().all(|w| *w >= cfg.w_floor));
        assert!(r.harmonic_gap < 1e-8);
    }

    #[test]
    fn correlation_examples() {
        let x = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        assert!((correlation(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((correlation(&x, &(&x * -3.0)).unwrap() - 1.0).abs() < 1e-15);
        let e1 = DVector::from_column_slice(&[1.0, 0.0]);
        let e2 = DVector::from_column_slice(&[0.0, 1.0]);
        assert_eq!(correlation(&e1, &e2).unwrap(), 0.0);
        assert!(matches!(correlation(&e1, &DVector::zeros(2)), Err(Error::ZeroVector)));
    }

    #[test]
    fn config_rejects_bad_values() {
        let bad = EstimatorConfig {
            n_iterations: 0,
            ..EstimatorConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EstimatorConfig {
            l1_weights: L1Weights::new(-1.0, 0.0, 0.0),
            ..EstimatorConfig::default()
        };
        assert!(bad.validate().is_err());
        let parsed: EstimatorConfig =
            serde_json::from_str(r#"{"n_iterations": 5, "update_rule": "exact_ls"}"#).unwrap();
        assert_eq!(parsed.update_rule, UpdateRule::ExactLs);
        assert!(serde_json::from_str::<EstimatorConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
