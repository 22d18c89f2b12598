//! Metric tensors, weighted inner products, weighted Hodge Laplacians and the
//! weighted Hodge decomposition of edge flows.
//!
//! A metric tensor of order `k` is a positive diagonal `G_k`; signals of order
//! `k` carry the inner product `<x, y> = x^T G_k^{-1} y`. With that inner
//! product the adjoint of the coboundary `B_k^T` is `G_{k-1} B_k G_k^{-1}`,
//! and
//!
//! ```text
//! L_k = B_k^T G_{k-1} B_k G_k^{-1}  +  G_k B_{k+1} G_{k+1}^{-1} B_{k+1}^T
//!       \_______ lower _________/     \__________ upper ____________/
//! ```
//!
//! `L_k` is not symmetric, but `G_k^{-1/2} L_k G_k^{1/2}` is, which is how
//! spectra and kernels are computed here.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex2;
use crate::error::{Error, Result};
use crate::linalg::{self, scale_cols, scale_rows, PINV_RCOND};

/// Default relative eigenvalue threshold for kernel detection.
pub const KERNEL_RTOL: f64 = 1e-9;

/// Diagonal of a metric tensor `G_k`. Every weight is strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricRepr", into = "MetricRepr")]
pub struct MetricTensor {
    order: usize,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MetricRepr {
    order: usize,
    weights: Vec<f64>,
}

impl TryFrom<MetricRepr> for MetricTensor {
    type Error = Error;
    fn try_from(r: MetricRepr) -> Result<Self> {
        MetricTensor::new(r.order, r.weights)
    }
}

impl From<MetricTensor> for MetricRepr {
    fn from(m: MetricTensor) -> Self {
        MetricRepr {
            order: m.order,
            weights: m.weights,
        }
    }
}

impl MetricTensor {
    pub fn new(order: usize, weights: Vec<f64>) -> Result<Self> {
        if order > 2 {
            return Err(Error::InvalidArgument(format!(
                "metric order {order} is not supported"
            )));
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::NonPositiveWeight { index, value });
        }
        Ok(Self { order, weights })
    }

    pub fn identity(order: usize, n: usize) -> Self {
        Self {
            order,
            weights: vec![1.0; n],
        }
    }

    /// Builds `G` from its inverse diagonal `w = 1 / g`.
    pub fn from_inverse_weights(order: usize, inverse: &[f64]) -> Result<Self> {
        Self::new(order, inverse.iter().map(|w| 1.0 / w).collect())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The diagonal `g_ii`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The diagonal of `G^{-1}`.
    pub fn inverse_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|g| 1.0 / g).collect()
    }

    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|g| g.sqrt()).collect()
    }

    pub fn inv_sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|g| 1.0 / g.sqrt()).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.weights))
    }

    pub(crate) fn check(&self, order: usize, n: usize) -> Result<()> {
        if self.order != order {
            return Err(Error::dims(format!("metric order (G{order})"), order, self.order));
        }
        if self.weights.len() != n {
            return Err(Error::dims(format!("metric G{order} length"), n, self.weights.len()));
        }
        Ok(())
    }
}

/// Real values indexed by the canonically ordered simplices of one order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SignalRepr", into = "SignalRepr")]
pub struct SimplicialSignal {
    pub order: usize,
    pub values: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct SignalRepr {
    order: usize,
    values: Vec<f64>,
}

impl From<SignalRepr> for SimplicialSignal {
    fn from(r: SignalRepr) -> Self {
        SimplicialSignal::from_vec(r.order, r.values)
    }
}

impl From<SimplicialSignal> for SignalRepr {
    fn from(s: SimplicialSignal) -> Self {
        SignalRepr {
            order: s.order,
            values: s.values.iter().copied().collect(),
        }
    }
}

impl SimplicialSignal {
    pub fn new(order: usize, values: DVector<f64>) -> Self {
        Self { order, values }
    }

    pub fn from_vec(order: usize, values: Vec<f64>) -> Self {
        Self::new(order, DVector::from_vec(values))
    }

    pub fn zeros(order: usize, n: usize) -> Self {
        Self::new(order, DVector::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check(&self, order: usize, n: usize) -> Result<()> {
        if self.order != order {
            return Err(Error::dims("signal order", order, self.order));
        }
        if self.values.len() != n {
            return Err(Error::dims(
                format!("signal of order {order} (n_{order})"),
                n,
                self.values.len(),
            ));
        }
        Ok(())
    }
}

/// Node potential, triangle potential and harmonic flow of an edge signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HodgeComponents {
    pub x0: SimplicialSignal,
    pub x2: SimplicialSignal,
    pub xh: SimplicialSignal,
}

impl HodgeComponents {
    pub fn zeros(complex: &SimplicialComplex2) -> Self {
        Self {
            x0: SimplicialSignal::zeros(0, complex.n_vertices()),
            x2: SimplicialSignal::zeros(2, complex.n_triangles()),
            xh: SimplicialSignal::zeros(1, complex.n_edges()),
        }
    }
}

/// The three edge flows a set of components produces.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFlowParts {
    pub irrotational: DVector<f64>,
    pub solenoidal: DVector<f64>,
    pub harmonic: DVector<f64>,
}

impl EdgeFlowParts {
    pub fn total(&self) -> DVector<f64> {
        &self.irrotational + &self.solenoidal + &self.harmonic
    }
}

/// Full, lower and upper Laplacian of one order.
#[derive(Clone, Debug)]
pub struct HodgeLaplacian {
    pub order: usize,
    pub full: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

/// Real-valued incidence matrices of a validated complex, built once and
/// reused by every weighted operator.
#[derive(Clone, Debug)]
pub struct HodgeOperators {
    n: [usize; 3],
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
}

impl HodgeOperators {
    pub fn new(complex: &SimplicialComplex2) -> Result<Self> {
        let b1 = complex.incidence_b1()?.to_f64();
        let b2 = complex.incidence_b2()?.to_f64();
        Ok(Self {
            n: [complex.n_vertices(), complex.n_edges(), complex.n_triangles()],
            b1,
            b2,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n[0]
    }

    pub fn n_edges(&self) -> usize {
        self.n[1]
    }

    pub fn n_triangles(&self) -> usize {
        self.n[2]
    }

    pub fn b1(&self) -> &DMatrix<f64> {
        &self.b1
    }

    pub fn b2(&self) -> &DMatrix<f64> {
        &self.b2
    }

    fn b(&self, k: usize) -> &DMatrix<f64> {
        if k == 1 {
            &self.b1
        } else {
            &self.b2
        }
    }

    pub fn check_metrics(
        &self,
        g0: Option<&MetricTensor>,
        g1: Option<&MetricTensor>,
        g2: Option<&MetricTensor>,
    ) -> Result<()> {
        for (k, g) in [g0, g1, g2].into_iter().enumerate() {
            if let Some(g) = g {
                g.check(k, self.n[k])?;
            }
        }
        Ok(())
    }

    /// `G_{k-1} B_k G_k^{-1}` for `k` in {1, 2}.
    pub fn coboundary_adjoint(
        &self,
        k: usize,
        g_prev: &MetricTensor,
        g_k: &MetricTensor,
    ) -> Result<DMatrix<f64>> {
        if !(k == 1 || k == 2) {
            return Err(Error::InvalidArgument(format!(
                "coboundary order {k} is not supported (expected 1 or 2)"
            )));
        }
        g_prev.check(k - 1, self.n[k - 1])?;
        g_k.check(k, self.n[k])?;
        Ok(scale_cols(
            &scale_rows(self.b(k), g_prev.weights()),
            &g_k.inverse_weights(),
        ))
    }

    /// `G1 B2 G2^{-1}` from explicit inverse triangle weights.
    pub(crate) fn solenoidal_map(&self, g1: &MetricTensor, w2: &[f64]) -> DMatrix<f64> {
        scale_cols(&scale_rows(&self.b2, g1.weights()), w2)
    }

    pub fn laplacian(
        &self,
        k: usize,
        g0: &MetricTensor,
        g1: &MetricTensor,
        g2: &MetricTensor,
    ) -> Result<HodgeLaplacian> {
        self.check_metrics(Some(g0), Some(g1), Some(g2))?;
        let (lower, upper) = match k {
            0 => {
                let upper = self.coboundary_adjoint(1, g0, g1)? * self.b1.transpose();
                (DMatrix::zeros(self.n[0], self.n[0]), upper)
            }
            1 => {
                let lower = self.b1.transpose() * self.coboundary_adjoint(1, g0, g1)?;
                let upper = self.solenoidal_map(g1, &g2.inverse_weights()) * self.b2.transpose();
                (lower, upper)
            }
            2 => {
                let lower = self.b2.transpose() * self.coboundary_adjoint(2, g1, g2)?;
                (lower, DMatrix::zeros(self.n[2], self.n[2]))
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "Laplacian order {k} is not supported (expected 0, 1 or 2)"
                )))
            }
        };
        Ok(HodgeLaplacian {
            order: k,
            full: &lower + &upper,
            lower,
            upper,
        })
    }

    /// Weighted least-squares Hodge decomposition of an edge flow.
    ///
    /// Potentials are the minimum-norm representatives; the harmonic part is
    /// the residual, so the three flows sum back to `x` up to rounding.
    pub fn decompose(
        &self,
        x: &DVector<f64>,
        g1: &MetricTensor,
        g2: &MetricTensor,
        rcond: f64,
    ) -> Result<HodgeComponents> {
        self.check_metrics(None, Some(g1), Some(g2))?;
        if x.len() != self.n[1] {
            return Err(Error::dims("edge flow (n_1)", self.n[1], x.len()));
        }
        let s = g1.inv_sqrt_weights();
        let y = DVector::from_iterator(x.len(), x.iter().zip(&s).map(|(v, s)| v * s));

        let a0 = scale_rows(&self.b1.transpose(), &s);
        let x0 = linalg::pinv(&a0, rcond) * &y;

        let a2 = scale_cols(&scale_rows(&self.b2, &g1.sqrt_weights()), &g2.inverse_weights());
        let x2 = linalg::pinv(&a2, rcond) * &y;

        let irr = self.b1.tr_mul(&x0);
        let sol = self.solenoidal_map(g1, &g2.inverse_weights()) * &x2;
        let xh = x - irr - sol;
        Ok(HodgeComponents {
            x0: SimplicialSignal::new(0, x0),
            x2: SimplicialSignal::new(2, x2),
            xh: SimplicialSignal::new(1, xh),
        })
    }

    pub fn flow_parts(
        &self,
        c: &HodgeComponents,
        g1: &MetricTensor,
        g2: &MetricTensor,
    ) -> Result<EdgeFlowParts> {
        self.check_metrics(None, Some(g1), Some(g2))?;
        c.x0.check(0, self.n[0])?;
        c.x2.check(2, self.n[2])?;
        c.xh.check(1, self.n[1])?;
        Ok(self.flow_parts_w(c, g1, &g2.inverse_weights()))
    }

    pub(crate) fn flow_parts_w(
        &self,
        c: &HodgeComponents,
        g1: &MetricTensor,
        w2: &[f64],
    ) -> EdgeFlowParts {
        EdgeFlowParts {
            irrotational: self.b1.tr_mul(&c.x0.values),
            solenoidal: self.solenoidal_map(g1, w2) * &c.x2.values,
            harmonic: c.xh.values.clone(),
        }
    }

    pub fn reconstruct(
        &self,
        c: &HodgeComponents,
        g1: &MetricTensor,
        g2: &MetricTensor,
    ) -> Result<SimplicialSignal> {
        Ok(SimplicialSignal::new(1, self.flow_parts(c, g1, g2)?.total()))
    }
}

/// `sum_i x_i y_i / g_i`.
pub fn weighted_inner_product(
    x: &SimplicialSignal,
    y: &SimplicialSignal,
    g: &MetricTensor,
) -> Result<f64> {
    if x.order != g.order() || y.order != g.order() {
        return Err(Error::InvalidArgument(format!(
            "orders differ: x is {}, y is {}, metric is {}",
            x.order,
            y.order,
            g.order()
        )));
    }
    weighted_dot(&x.values, &y.values, g)
}

pub(crate) fn weighted_dot(x: &DVector<f64>, y: &DVector<f64>, g: &MetricTensor) -> Result<f64> {
    if x.len() != g.len() {
        return Err(Error::dims("left signal", g.len(), x.len()));
    }
    if y.len() != g.len() {
        return Err(Error::dims("right signal", g.len(), y.len()));
    }
    Ok(x
        .iter()
        .zip(y.iter())
        .zip(g.weights())
        .map(|((a, b), g)| a * b / g)
        .sum())
}

pub fn coboundary_adjoint(
    complex: &SimplicialComplex2,
    k: usize,
    g_prev: &MetricTensor,
    g_k: &MetricTensor,
) -> Result<DMatrix<f64>> {
    HodgeOperators::new(complex)?.coboundary_adjoint(k, g_prev, g_k)
}

pub fn hodge_laplacian(
    complex: &SimplicialComplex2,
    k: usize,
    g0: &MetricTensor,
    g1: &MetricTensor,
    g2: &MetricTensor,
) -> Result<HodgeLaplacian> {
    HodgeOperators::new(complex)?.laplacian(k, g0, g1, g2)
}

/// `G^{-1/2} L G^{1/2}`, symmetric for any Laplacian built with metric `g` at
/// its own order.
pub fn symmetrized(l: &DMatrix<f64>, g: &MetricTensor) -> Result<DMatrix<f64>> {
    if l.nrows() != g.len() || l.ncols() != g.len() {
        return Err(Error::dims("Laplacian size", g.len(), l.nrows()));
    }
    let s = scale_cols(&scale_rows(l, &g.inv_sqrt_weights()), &g.sqrt_weights());
    Ok((&s + s.transpose()) * 0.5)
}

/// Real spectrum of a weighted Laplacian, ascending.
pub fn laplacian_spectrum(l: &DMatrix<f64>, g: &MetricTensor) -> Result<DVector<f64>> {
    Ok(linalg::sym_eigen_sorted(&symmetrized(l, g)?).0)
}

/// Basis of `ker(L1)`, orthonormal under `<x, y> = x^T G1^{-1} y`.
///
/// Eigenvalues of the symmetrised Laplacian below
/// `rtol * max(lambda_max, 1)` count as zero.
pub fn harmonic_basis(l1: &DMatrix<f64>, g1: &MetricTensor, rtol: f64) -> Result<DMatrix<f64>> {
    let n = g1.len();
    let (vals, vecs) = linalg::sym_eigen_sorted(&symmetrized(l1, g1)?);
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let threshold = rtol * vals[n - 1].max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] < threshold).collect();
    let sq = g1.sqrt_weights();
    Ok(DMatrix::from_fn(n, keep.len(), |i, j| sq[i] * vecs[(i, keep[j])]))
}

pub fn hodge_decompose(
    x: &SimplicialSignal,
    complex: &SimplicialComplex2,
    g0: &MetricTensor,
    g1: &MetricTensor,
    g2: &MetricTensor,
    rcond: f64,
) -> Result<HodgeComponents> {
    let ops = HodgeOperators::new(complex)?;
    ops.check_metrics(Some(g0), Some(g1), Some(g2))?;
    x.check(1, complex.n_edges())?;
    ops.decompose(&x.values, g1, g2, rcond)
}

pub fn reconstruct(
    c: &HodgeComponents,
    complex: &SimplicialComplex2,
    g1: &MetricTensor,
    g2: &MetricTensor,
) -> Result<SimplicialSignal> {
    HodgeOperators::new(complex)?.reconstruct(c, g1, g2)
}

/// Default singular-value cutoff for decompositions.
pub const DECOMPOSE_RCOND: f64 = PINV_RCOND;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn full_triangle() -> SimplicialComplex2 {
        SimplicialComplex2::new(3, vec![[0, 1], [0, 2], [1, 2]], vec![[0, 1, 2]]).unwrap()
    }

    fn hollow_triangle() -> SimplicialComplex2 {
        SimplicialComplex2::new(3, vec![[0, 1], [0, 2], [1, 2]], vec![]).unwrap()
    }

    fn ids(c: &SimplicialComplex2) -> [MetricTensor; 3] {
        [
            MetricTensor::identity(0, c.n_vertices()),
            MetricTensor::identity(1, c.n_edges()),
            MetricTensor::identity(2, c.n_triangles()),
        ]
    }

    fn sig(order: usize, v: &[f64]) -> SimplicialSignal {
        SimplicialSignal::from_vec(order, v.to_vec())
    }

    #[test]
    fn metric_rejects_non_positive() {
        assert!(matches!(
            MetricTensor::new(1, vec![1.0, 0.0]),
            Err(Error::NonPositiveWeight { index: 1, .. })
        ));
        assert!(MetricTensor::new(1, vec![1.0, f64::NAN]).is_err());
        assert!(MetricTensor::new(3, vec![1.0]).is_err());
        let err = serde_json::from_str::<MetricTensor>(r#"{"order":1,"weights":[0.0]}"#);
        assert!(err.unwrap_err().to_string().contains("weights must be positive"));
    }

    #[test]
    fn inner_product_examples() {
        let g = MetricTensor::identity(1, 3);
        let one = sig(1, &[1.0, 1.0, 1.0]);
        assert_eq!(weighted_inner_product(&one, &one, &g).unwrap(), 3.0);
        let g = MetricTensor::new(1, vec![4.0, 1.0]).unwrap();
        let v = weighted_inner_product(&sig(1, &[2.0, 0.0]), &sig(1, &[3.0, 5.0]), &g).unwrap();
        assert!((v - 1.5).abs() < 1e-15);
        assert!(weighted_inner_product(&sig(1, &[1.0]), &sig(1, &[1.0, 2.0]), &g).is_err());
        assert!(weighted_inner_product(&sig(0, &[1.0, 1.0]), &sig(1, &[1.0, 2.0]), &g).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let c = full_triangle();
        let [g0, g1, g2] = ids(&c);
        let d1 = coboundary_adjoint(&c, 1, &g0, &g1).unwrap();
        assert_eq!(d1, c.incidence_b1().unwrap().to_f64());
        let d2 = coboundary_adjoint(&c, 2, &g1, &g2).unwrap();
        assert_eq!(d2, c.incidence_b2().unwrap().to_f64());

        let g1 = MetricTensor::new(1, vec![2.0; 3]).unwrap();
        let g2 = MetricTensor::new(2, vec![4.0]).unwrap();
        let d2 = coboundary_adjoint(&c, 2, &g1, &g2).unwrap();
        assert_eq!(d2, DMatrix::from_column_slice(3, 1, &[0.5, -0.5, 0.5]));
        assert!(coboundary_adjoint(&c, 3, &g1, &g2).is_err());
        assert!(coboundary_adjoint(&c, 2, &g0, &g2).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let c = full_triangle();
        let [g0, g1, g2] = ids(&c);
        let l1 = hodge_laplacian(&c, 1, &g0, &g1, &g2).unwrap();
        assert_eq!(l1.full, DMatrix::identity(3, 3) * 3.0);
        let l0 = hodge_laplacian(&c, 0, &g0, &g1, &g2).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert_eq!(l0.full, expected);
        let l2 = hodge_laplacian(&c, 2, &g0, &g1, &g2).unwrap();
        assert_eq!(l2.full, DMatrix::from_element(1, 1, 3.0));
        assert!(hodge_laplacian(&c, 3, &g0, &g1, &g2).is_err());
    }

    #[test]
    fn lower_upper_annihilate_under_weights() {
        let c = SimplicialComplex2::new(
            4,
            vec![[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]],
            vec![[0, 1, 2], [1, 2, 3]],
        )
        .unwrap();
        let g0 = MetricTensor::new(0, vec![0.3, 1.7, 2.0, 0.9]).unwrap();
        let g1 = MetricTensor::new(1, vec![0.5, 1.5, 3.0, 0.2, 1.1]).unwrap();
        let g2 = MetricTensor::new(2, vec![0.7, 4.0]).unwrap();
        let l = hodge_laplacian(&c, 1, &g0, &g1, &g2).unwrap();
        assert!(max_abs(&(&l.lower * &l.upper)) <= 1e-10);
        assert!(max_abs(&(&l.upper * &l.lower)) <= 1e-10);
    }

    #[test]
    fn harmonic_basis_examples() {
        let c = full_triangle();
        let [g0, g1, g2] = ids(&c);
        let l1 = hodge_laplacian(&c, 1, &g0, &g1, &g2).unwrap();
        assert_eq!(harmonic_basis(&l1.full, &g1, KERNEL_RTOL).unwrap().ncols(), 0);

        let h = hollow_triangle();
        let [g0, g1, g2] = ids(&h);
        let l1 = hodge_laplacian(&h, 1, &g0, &g1, &g2).unwrap();
        let basis = harmonic_basis(&l1.full, &g1, KERNEL_RTOL).unwrap();
        assert_eq!(basis.ncols(), 1);
        let v = basis.column(0);
        let cycle = DVector::from_vec(vec![1.0, -1.0, 1.0]) / 3f64.sqrt();
        assert!((v.dot(&cycle).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_examples() {
        let c = full_triangle();
        let [g0, g1, g2] = ids(&c);
        let b1 = c.incidence_b1().unwrap().to_f64();
        let x = b1.tr_mul(&DVector::from_vec(vec![1.0, 0.0, -1.0]));
        let comps =
            hodge_decompose(&SimplicialSignal::new(1, x.clone()), &c, &g0, &g1, &g2, DECOMPOSE_RCOND)
                .unwrap();
        let ops = HodgeOperators::new(&c).unwrap();
        let parts = ops.flow_parts(&comps, &g1, &g2).unwrap();
        assert!((&parts.irrotational - &x).norm() < 1e-12);
        assert!(parts.solenoidal.norm() < 1e-12 && parts.harmonic.norm() < 1e-12);

        let x = DVector::from_vec(vec![1.0, -1.0, 1.0]);
        let comps =
            hodge_decompose(&SimplicialSignal::new(1, x.clone()), &c, &g0, &g1, &g2, DECOMPOSE_RCOND)
                .unwrap();
        let parts = ops.flow_parts(&comps, &g1, &g2).unwrap();
        assert!((&parts.solenoidal - &x).norm() < 1e-12);
        assert!(parts.irrotational.norm() < 1e-12 && parts.harmonic.norm() < 1e-12);

        let h = hollow_triangle();
        let [g0, g1, g2] = ids(&h);
        let comps =
            hodge_decompose(&SimplicialSignal::new(1, x.clone()), &h, &g0, &g1, &g2, DECOMPOSE_RCOND)
                .unwrap();
        assert!((&comps.xh.values - &x).norm() < 1e-12);
        assert_eq!(comps.x2.len(), 0);
        assert!(hodge_decompose(&sig(1, &[1.0]), &h, &g0, &g1, &g2, DECOMPOSE_RCOND).is_err());
    }

    #[test]
    fn reconstruct_examples() {
        let c = full_triangle();
        let [_, g1, g2] = ids(&c);
        let zero = HodgeComponents::zeros(&c);
        assert_eq!(reconstruct(&zero, &c, &g1, &g2).unwrap().values.norm(), 0.0);
        let mut comps = zero.clone();
        comps.x0 = sig(0, &[1.0, 0.0, 0.0]);
        assert_eq!(
            reconstruct(&comps, &c, &g1, &g2).unwrap().values,
            DVector::from_vec(vec![-1.0, -1.0, 0.0])
        );
        comps.xh = sig(1, &[1.0]);
        assert!(reconstruct(&comps, &c, &g1, &g2).is_err());
    }

    #[test]
    fn weighted_hollow_harmonic_is_g1_orthonormal() {
        let h = hollow_triangle();
        let g0 = MetricTensor::new(0, vec![1.0, 2.0, 0.5]).unwrap();
        let g1 = MetricTensor::new(1, vec![0.25, 4.0, 1.5]).unwrap();
        let g2 = MetricTensor::identity(2, 0);
        let l1 = hodge_laplacian(&h, 1, &g0, &g1, &g2).unwrap();
        let basis = harmonic_basis(&l1.full, &g1, KERNEL_RTOL).unwrap();
        assert_eq!(basis.ncols(), 1);
        let v = basis.column(0).into_owned();
        assert!((weighted_dot(&v, &v, &g1).unwrap() - 1.0).abs() < 1e-12);
        assert!((&l1.full * &v).norm() < 1e-12);
    }
}
