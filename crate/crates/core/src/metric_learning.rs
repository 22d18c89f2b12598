//! Learning the triangle metric from edge-signal snapshots by minimising
//! their weighted circulation.
//!
//! With `w = diag(G2^{-1})` and `b_i` the i-th column of `B2`, the total
//! circulation of a batch is `sum_i w_i a_i` where `a_i = sum_m (b_i^T x_m)^2`.
//! Minimising `sum_i w_i^2 a_i` over the open simplex `{w > 0, sum w = 1}` has
//! the closed-form solution `w_i = lambda / (2 a_i)` with
//! `lambda = 1 / sum_i 1 / (2 a_i)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex2;
use crate::error::{Error, Result};
use crate::hodge::{HodgeOperators, MetricTensor, SimplicialSignal};

/// `n1 x M` matrix whose columns are observed edge signals.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    values: DMatrix<f64>,
}

impl SnapshotMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "snapshot matrix needs at least one column".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn from_columns(columns: &[DVector<f64>]) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(Error::InvalidArgument(
                "snapshot matrix needs at least one column".into(),
            ));
        };
        if let Some(bad) = columns.iter().find(|c| c.len() != first.len()) {
            return Err(Error::dims("snapshot length", first.len(), bad.len()));
        }
        Self::new(DMatrix::from_columns(columns))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_edges(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.values.ncols()
    }
}

/// Circulation energies `a_i >= 0`, one per triangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvCoefficients {
    pub a: Vec<f64>,
}

/// What to do with triangles whose circulation energy is (numerically) zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateHandling {
    /// Report the offending triangles as an error.
    #[default]
    Reject,
    /// Raise every coefficient below the threshold to the threshold.
    Floor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnOptions {
    /// Coefficients at or below `a_rtol * max(a)` count as degenerate.
    pub a_rtol: f64,
    pub degenerate: DegenerateHandling,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            a_rtol: 1e-12,
            degenerate: DegenerateHandling::Reject,
        }
    }
}

/// `|| G2^{-1/2} B2^T x ||^2`
pub fn tv_sol(x: &SimplicialSignal, complex: &SimplicialComplex2, g2: &MetricTensor) -> Result<f64> {
    x.check(1, complex.n_edges())?;
    g2.check(2, complex.n_triangles())?;
    let ops = HodgeOperators::new(complex)?;
    let curl = ops.b2().tr_mul(&x.values);
    Ok(curl
        .iter()
        .zip(g2.weights())
        .map(|(c, g)| c * c / g)
        .sum())
}

/// `a_i = sum_m (b_i^T x_m)^2`.
pub fn tv_coefficients(
    snapshots: &SnapshotMatrix,
    complex: &SimplicialComplex2,
) -> Result<TvCoefficients> {
    if snapshots.n_edges() != complex.n_edges() {
        return Err(Error::dims(
            "snapshot rows (n_1)",
            complex.n_edges(),
            snapshots.n_edges(),
        ));
    }
    let ops = HodgeOperators::new(complex)?;
    let curls = ops.b2().tr_mul(snapshots.values());
    Ok(TvCoefficients {
        a: curls.row_iter().map(|r| r.norm_squared()).collect(),
    })
}

/// Closed-form minimiser of `sum_i w_i^2 a_i` on the probability simplex.
pub fn learn_weights(coeffs: &TvCoefficients, options: &LearnOptions) -> Result<Vec<f64>> {
    let a = &coeffs.a;
    if a.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(bad) = a.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "circulation coefficients must be finite and non-negative, got {bad}"
        )));
    }
    let amax = a.iter().copied().fold(0.0_f64, f64::max);
    let eps = options.a_rtol * amax;
    let degenerate: Vec<usize> = (0..a.len()).filter(|&i| a[i] <= eps).collect();
    let a: Vec<f64> = if degenerate.is_empty() {
        a.clone()
    } else {
        match options.degenerate {
            DegenerateHandling::Reject => {
                return Err(Error::DegenerateCoefficients {
                    triangles: degenerate,
                })
            }
            DegenerateHandling::Floor if eps > 0.0 => a.iter().map(|v| v.max(eps)).collect(),
            // every coefficient vanishes: nothing to weigh against
            DegenerateHandling::Floor => vec![1.0; a.len()],
        }
    };
    let lambda = 1.0 / a.iter().map(|ai| 1.0 / (2.0 * ai)).sum::<f64>();
    let mut w: Vec<f64> = a.iter().map(|ai| lambda / (2.0 * ai)).collect();
    // renormalise away the rounding of the reciprocal sums
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    Ok(w)
}

/// `sum_i w_i^2 a_i`
pub fn tv_objective(w: &[f64], coeffs: &TvCoefficients) -> f64 {
    w.iter().zip(&coeffs.a).map(|(w, a)| w * w * a).sum()
}

/// Learns `G2` (with `g_i = 1 / w_i`) from a batch of edge signals.
pub fn learn_metric(
    snapshots: &SnapshotMatrix,
    complex: &SimplicialComplex2,
    options: &LearnOptions,
) -> Result<MetricTensor> {
    let coeffs = tv_coefficients(snapshots, complex)?;
    let w = learn_weights(&coeffs, options)?;
    MetricTensor::from_inverse_weights(2, &w)
}

/// `sum_i (w_i - w_hat_i)^2`
pub fn metric_mse(w_true: &[f64], w_hat: &[f64]) -> Result<f64> {
    if w_true.len() != w_hat.len() {
        return Err(Error::dims("weight vector", w_true.len(), w_hat.len()));
    }
    Ok(w_true
        .iter()
        .zip(w_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}
