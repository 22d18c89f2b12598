//! Random complexes, metrics and signals, and the two Monte Carlo harnesses:
//! denoising quality against noise level, and metric-learning error against
//! the number of observed signals.

use std::fmt::Write as _;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex2;
use crate::error::{Error, Result};
use crate::estimator::{
    correlation, estimate, q1_l1_regularized, EstimationInit, EstimatorConfig, L1Weights,
};
use crate::hodge::{
    harmonic_basis, symmetrized, HodgeComponents, HodgeOperators, MetricTensor, SimplicialSignal,
    KERNEL_RTOL,
};
use crate::linalg;
use crate::metric_learning::{
    learn_weights, metric_mse, tv_coefficients, LearnOptions, SnapshotMatrix,
};
use crate::parallel::{map_indexed, Execution};

/// Named RNG sub-streams. Every random draw in a harness comes from
/// `(master seed, stream, index)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Complex = 1,
    Metric = 2,
    Signal = 3,
    Noise = 4,
    Snapshots = 5,
}

/// Seed of sub-stream `(stream, index)` of `master`.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((stream as u64) << 48) ^ index);
    rng.random()
}

/// How vertices are joined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    /// Geometric graph: points uniform in the unit square, joined when their
    /// distance is at most `radius` times the square's diagonal.
    Radius(f64),
    /// Geometric graph with the radius chosen so that exactly this many
    /// pairs are joined.
    TargetEdges(usize),
    /// Erdos-Renyi graph.
    EdgeProbability(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_vertices: usize,
    pub connectivity: Connectivity,
    /// Fill every 3-clique. Otherwise `triangle_count` of them are filled at
    /// random (none when unset).
    pub fill_all_triangles: bool,
    pub triangle_count: Option<usize>,
    pub require_connected: bool,
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_vertices: 40,
            connectivity: Connectivity::TargetEdges(137),
            fill_all_triangles: true,
            triangle_count: None,
            require_connected: false,
            max_retries: 100,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_vertices;
        if n < 3 {
            return Err(Error::InvalidArgument(format!(
                "n_vertices must be at least 3, got {n}"
            )));
        }
        match self.connectivity {
            Connectivity::Radius(r) if !(r > 0.0 && r <= 1.0) => Err(Error::InvalidArgument(
                format!("radius must lie in (0, 1], got {r}"),
            )),
            Connectivity::EdgeProbability(p) if !(0.0..=1.0).contains(&p) => Err(
                Error::InvalidArgument(format!("edge probability must lie in [0, 1], got {p}")),
            ),
            Connectivity::TargetEdges(e) if e > n * (n - 1) / 2 => Err(Error::InvalidArgument(
                format!("{e} edges do not fit on {n} vertices"),
            )),
            _ => Ok(()),
        }
    }
}

fn is_connected(n: usize, edges: &[[usize; 2]]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &[a, b] in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn draw_graph(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Vec<[usize; 2]> {
    let n = cfg.n_vertices;
    let pairs = || (0..n).flat_map(move |i| (i + 1..n).map(move |j| [i, j]));
    match cfg.connectivity {
        Connectivity::EdgeProbability(p) => pairs().filter(|_| rng.random_bool(p)).collect(),
        Connectivity::Radius(_) | Connectivity::TargetEdges(_) => {
            let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
            let dist = |[i, j]: [usize; 2]| {
                let (a, b) = (pts[i], pts[j]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / 2f64.sqrt()
            };
            match cfg.connectivity {
                Connectivity::Radius(r) => pairs().filter(|&e| dist(e) <= r).collect(),
                Connectivity::TargetEdges(k) => {
                    let mut all: Vec<([usize; 2], f64)> = pairs().map(|e| (e, dist(e))).collect();
                    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                    let mut edges: Vec<[usize; 2]> = all.into_iter().take(k).map(|p| p.0).collect();
                    edges.sort_unstable();
                    edges
                }
                Connectivity::EdgeProbability(_) => unreachable!(),
            }
        }
    }
}

fn three_cliques(n: usize, edges: &[[usize; 2]]) -> Vec<[usize; 3]> {
    let mut adj = vec![vec![false; n]; n];
    for &[a, b] in edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    let mut out = Vec::new();
    for &[i, j] in edges {
        for k in j + 1..n {
            if adj[i][k] && adj[j][k] {
                out.push([i, j, k]);
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn generate_complex(cfg: &GeneratorConfig) -> Result<SimplicialComplex2> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_vertices;
    for _ in 0..=cfg.max_retries {
        let edges = draw_graph(cfg, &mut rng);
        if cfg.require_connected && !is_connected(n, &edges) {
            continue;
        }
        let cliques = three_cliques(n, &edges);
        let triangles = if cfg.fill_all_triangles {
            cliques
        } else {
            let k = cfg.triangle_count.unwrap_or(0).min(cliques.len());
            let mut picked: Vec<[usize; 3]> = sample(&mut rng, cliques.len(), k)
                .into_iter()
                .map(|i| cliques[i])
                .collect();
            picked.sort_unstable();
            picked
        };
        return SimplicialComplex2::new(n, edges, triangles);
    }
    Err(Error::Generation(format!(
        "no connected graph after {} retries",
        cfg.max_retries
    )))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// Weights i.i.d. uniform on `(floor, 1]`.
    #[default]
    Uniform,
    /// Reciprocal weights i.i.d. uniform on `(floor, 1]`, then normalised to
    /// sum to one.
    SimplexFeasible,
}

pub fn generate_metric(
    order: usize,
    n: usize,
    floor: f64,
    mode: MetricMode,
    seed: u64,
) -> Result<MetricTensor> {
    if !(0.0..1.0).contains(&floor) {
        return Err(Error::InvalidArgument(format!(
            "metric floor must lie in [0, 1), got {floor}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 1 - u with u in [0, 1) lands in (0, 1]
    let draws: Vec<f64> = (0..n)
        .map(|_| floor + (1.0 - floor) * (1.0 - rng.random::<f64>()))
        .collect();
    match mode {
        MetricMode::Uniform => MetricTensor::new(order, draws),
        MetricMode::SimplexFeasible => {
            let s: f64 = draws.iter().sum();
            let w: Vec<f64> = draws.iter().map(|v| v / s).collect();
            MetricTensor::from_inverse_weights(order, &w)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalGenConfig {
    /// Nonzeros of the node potential; `None` means 10% of the vertices,
    /// rounded up.
    pub sparsity_0: Option<usize>,
    pub sparsity_2: Option<usize>,
    pub sparsity_h: Option<usize>,
    /// Number of low-frequency solenoidal eigenvectors mixed into each
    /// bandlimited signal; `None` means `min(10, dim)`.
    pub bandwidth: Option<usize>,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for SignalGenConfig {
    fn default() -> Self {
        Self {
            sparsity_0: None,
            sparsity_2: None,
            sparsity_h: None,
            bandwidth: None,
            amplitude: 1.0,
            seed: 0,
        }
    }
}

fn tenth(n: usize) -> usize {
    n.div_ceil(10)
}

fn sparse_normal(rng: &mut ChaCha8Rng, n: usize, k: usize, amplitude: f64) -> Result<DVector<f64>> {
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "sparsity {k} exceeds dimension {n}"
        )));
    }
    let mut v = DVector::zeros(n);
    for i in sample(rng, n, k) {
        let z: f64 = StandardNormal.sample(rng);
        v[i] = amplitude * z;
    }
    Ok(v)
}

/// A clean flow, its noisy observation and the components it was built from.
#[derive(Clone, Debug)]
pub struct NoisyFlow {
    pub x_true: SimplicialSignal,
    pub x_tilde: SimplicialSignal,
    pub components: HodgeComponents,
}

/// i.i.d. `N(0, sigma^2)` noise of length `n`.
pub fn gaussian_noise(n: usize, sigma: f64, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma * z
    })
}

/// Sparse potentials `x0`, `x2` and a harmonic flow obtained by projecting a
/// sparse draw onto `ker(L1)` (rescaled to the draw's norm); the observation
/// adds white noise of standard deviation `sigma`.
pub fn generate_noisy_flow(
    complex: &SimplicialComplex2,
    g1: &MetricTensor,
    g2: &MetricTensor,
    cfg: &SignalGenConfig,
    sigma: f64,
) -> Result<NoisyFlow> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )));
    }
    let ops = HodgeOperators::new(complex)?;
    let g0 = MetricTensor::identity(0, complex.n_vertices());
    ops.check_metrics(Some(&g0), Some(g1), Some(g2))?;
    let (n0, n1, n2) = (ops.n_vertices(), ops.n_edges(), ops.n_triangles());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amp = cfg.amplitude;
    let x0 = sparse_normal(&mut rng, n0, cfg.sparsity_0.unwrap_or(tenth(n0)), amp)?;
    let x2 = sparse_normal(&mut rng, n2, cfg.sparsity_2.unwrap_or(tenth(n2)), amp)?;
    let draw = sparse_normal(&mut rng, n1, cfg.sparsity_h.unwrap_or(tenth(n1)), amp)?;

    let basis = harmonic_basis(&ops.laplacian(1, &g0, g1, g2)?.full, g1, KERNEL_RTOL)?;
    let xh = if basis.ncols() == 0 {
        if draw.amax() > 0.0 {
            warn!("complex has no harmonic flows; harmonic component set to zero");
        }
        DVector::zeros(n1)
    } else {
        // the basis is orthonormal under x^T G1^{-1} y
        let coeffs = basis.tr_mul(&draw.component_mul(&DVector::from_vec(g1.inverse_weights())));
        let proj = &basis * coeffs;
        let norm = proj.norm();
        if norm > 0.0 {
            proj * (draw.norm() / norm)
        } else {
            proj
        }
    };
    let components = HodgeComponents {
        x0: SimplicialSignal::new(0, x0),
        x2: SimplicialSignal::new(2, x2),
        xh: SimplicialSignal::new(1, xh),
    };
    let x_true = ops.reconstruct(&components, g1, g2)?;
    let noise_seed: u64 = rng.random();
    let x_tilde = if sigma == 0.0 {
        x_true.clone()
    } else {
        SimplicialSignal::new(1, &x_true.values + gaussian_noise(n1, sigma, noise_seed))
    };
    Ok(NoisyFlow {
        x_true,
        x_tilde,
        components,
    })
}

/// The `bandwidth` solenoidal eigenvectors of the upper Laplacian with the
/// smallest nonzero eigenvalues, as columns.
pub fn solenoidal_band(
    complex: &SimplicialComplex2,
    g1: &MetricTensor,
    g2: &MetricTensor,
    bandwidth: usize,
) -> Result<DMatrix<f64>> {
    let ops = HodgeOperators::new(complex)?;
    let g0 = MetricTensor::identity(0, complex.n_vertices());
    ops.check_metrics(Some(&g0), Some(g1), Some(g2))?;
    let upper = ops.laplacian(1, &g0, g1, g2)?.upper;
    let (vals, vecs) = linalg::sym_eigen_sorted(&symmetrized(&upper, g1)?);
    let n = vals.len();
    let threshold = if n == 0 {
        0.0
    } else {
        KERNEL_RTOL * vals[n - 1].max(1.0)
    };
    let nonzero: Vec<usize> = (0..n).filter(|&i| vals[i] >= threshold).collect();
    if bandwidth == 0 || bandwidth > nonzero.len() {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must lie in [1, {}] (solenoidal dimension), got {bandwidth}",
            nonzero.len()
        )));
    }
    let sq = g1.sqrt_weights();
    Ok(DMatrix::from_fn(n, bandwidth, |i, j| sq[i] * vecs[(i, nonzero[j])]))
}

/// `M` random standard-normal combinations of the solenoidal band.
pub fn generate_bandlimited_solenoidal(
    complex: &SimplicialComplex2,
    g1: &MetricTensor,
    g2: &MetricTensor,
    m: usize,
    bandwidth: usize,
    seed: u64,
) -> Result<SnapshotMatrix> {
    let band = solenoidal_band(complex, g1, g2, bandwidth)?;
    mix_band(&band, m, seed)
}

fn mix_band(band: &DMatrix<f64>, m: usize, seed: u64) -> Result<SnapshotMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = DMatrix::from_fn(band.ncols(), m, |_, _| StandardNormal.sample(&mut rng));
    SnapshotMatrix::new(band * coeffs)
}

/// Tabulated harness output: one row per abscissa.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCurve {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ExperimentCurve {
    /// Header line then one line per row; floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L1Scale {
    /// `2 sqrt(2 ln p)` times the largest column norm of each block of the
    /// flat-metric design, `p` being the number of coefficients.
    Universal,
    PerSigma(L1Weights),
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, f64::max)
}

/// Universal-threshold l1 weights per unit of noise for the design
/// `[B1^T, G1 B2, H]` with `H` orthonormal (`n_harmonic` columns).
pub fn universal_l1_per_sigma(
    complex: &SimplicialComplex2,
    g1: &MetricTensor,
    n_harmonic: usize,
) -> Result<L1Weights> {
    let ops = HodgeOperators::new(complex)?;
    let p = (ops.n_vertices() + ops.n_triangles() + n_harmonic).max(2) as f64;
    let factor = 2.0 * (2.0 * p.ln()).sqrt();
    let node = max_of(ops.b1().row_iter().map(|r| r.norm()));
    let g1b2 = linalg::scale_rows(ops.b2(), g1.weights());
    let triangle = max_of(g1b2.column_iter().map(|c| c.norm()));
    Ok(L1Weights::new(factor * node, factor * triangle, factor))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig1Config {
    pub complex: GeneratorConfig,
    pub signal: SignalGenConfig,
    pub sigma_grid: Vec<f64>,
    pub n_realizations: usize,
    pub estimator: EstimatorConfig,
    /// Penalties per unit of noise; at noise level `sigma` the estimators
    /// use `sigma` times these.
    pub l1_scale: L1Scale,
    /// Lower end of the uniform draws for the diagonals of `G1` and `G2`.
    pub metric_floor: f64,
    pub seed: u64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self {
            complex: GeneratorConfig {
                fill_all_triangles: false,
                triangle_count: Some(96),
                ..GeneratorConfig::default()
            },
            signal: SignalGenConfig::default(),
            sigma_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            n_realizations: 20,
            estimator: EstimatorConfig {
                n_iterations: 20,
                early_stop_rtol: Some(1e-6),
                l1_tolerance: 1e-7,
                ..EstimatorConfig::default()
            },
            l1_scale: L1Scale::PerSigma(L1Weights::uniform(8.0)),
            metric_floor: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Metadata {
    pub seed: u64,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_triangles: usize,
    pub n_harmonic: usize,
    pub realizations: usize,
    /// Failed (excluded) realizations per grid point.
    pub failed: Vec<usize>,
    pub stderr_joint: Vec<f64>,
    pub stderr_flat: Vec<f64>,
    /// Paired standard error of `rho_joint - rho_flat`.
    pub stderr_difference: Vec<f64>,
    pub q2_infeasible_runs: usize,
    pub l1_per_sigma: L1Weights,
    pub config: Fig1Config,
}

#[derive(Clone, Debug)]
pub struct Fig1Output {
    pub curve: ExperimentCurve,
    pub metadata: Fig1Metadata,
}

struct Fig1Sample {
    joint: f64,
    flat: f64,
    q2_feasible: bool,
}

/// Correlation of the joint estimate and of the flat-metric estimate with
/// the clean flow, against the noise level.
///
/// One complex and one pair of metrics `G1`, `G2` are drawn from the seed;
/// every realization draws fresh components and a unit noise vector, which
/// is scaled by each `sigma` in the grid.
pub fn run_fig1(cfg: &Fig1Config, exec: Execution) -> Result<Fig1Output> {
    if cfg.sigma_grid.is_empty() || cfg.n_realizations == 0 {
        return Err(Error::InvalidArgument(
            "fig1 needs a non-empty sigma grid and at least one realization".into(),
        ));
    }
    if let Some(s) = cfg.sigma_grid.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(format!("invalid sigma {s}")));
    }
    cfg.estimator.validate()?;
    let complex = generate_complex(&GeneratorConfig {
        seed: derive_seed(cfg.seed, Stream::Complex, 0),
        ..cfg.complex.clone()
    })?;
    let (n0, n1, n2) = (complex.n_vertices(), complex.n_edges(), complex.n_triangles());
    let g0 = MetricTensor::identity(0, n0);
    let g1 = generate_metric(
        1,
        n1,
        cfg.metric_floor,
        MetricMode::Uniform,
        derive_seed(cfg.seed, Stream::Metric, 1),
    )?;
    let g2 = generate_metric(
        2,
        n2,
        cfg.metric_floor,
        MetricMode::Uniform,
        derive_seed(cfg.seed, Stream::Metric, 2),
    )?;
    let flat = MetricTensor::identity(2, n2);
    let n_harmonic = {
        let l1 = HodgeOperators::new(&complex)?.laplacian(1, &g0, &g1, &g2)?;
        harmonic_basis(&l1.full, &g1, KERNEL_RTOL)?.ncols()
    };

    let per_sigma = match cfg.l1_scale {
        L1Scale::Universal => universal_l1_per_sigma(&complex, &g1, n_harmonic)?,
        L1Scale::PerSigma(w) => w,
    };
    let n_sigma = cfg.sigma_grid.len();
    let tasks = cfg.n_realizations * n_sigma;
    let samples: Vec<Result<Fig1Sample>> = map_indexed(tasks, exec, |t| {
        let (r, s) = (t / n_sigma, t % n_sigma);
        let sigma = cfg.sigma_grid[s];
        let sig_cfg = SignalGenConfig {
            seed: derive_seed(cfg.seed, Stream::Signal, r as u64),
            ..cfg.signal.clone()
        };
        let clean = generate_noisy_flow(&complex, &g1, &g2, &sig_cfg, 0.0)?;
        let noise = gaussian_noise(n1, 1.0, derive_seed(cfg.seed, Stream::Noise, r as u64));
        let x_tilde = SimplicialSignal::new(1, &clean.x_true.values + noise * sigma);
        let lambda = per_sigma.scaled(sigma);

        let est_cfg = EstimatorConfig {
            l1_weights: lambda,
            ..cfg.estimator.clone()
        };
        let flat_est = q1_l1_regularized(
            &x_tilde,
            &complex,
            &g0,
            &g1,
            &flat,
            &lambda,
            est_cfg.l1_tolerance,
            est_cfg.l1_max_steps,
        )?;
        let x_flat = HodgeOperators::new(&complex)?.reconstruct(&flat_est.components, &g1, &flat)?;
        let init = EstimationInit::from_config(&x_tilde, &complex, &g0, &g1, &est_cfg)?;
        let joint = estimate(&x_tilde, &complex, &g0, &g1, &init, &est_cfg)?;
        Ok(Fig1Sample {
            joint: correlation(&joint.x_hat.values, &clean.x_true.values)?,
            flat: correlation(&x_flat.values, &clean.x_true.values)?,
            q2_feasible: joint.q2_feasible,
        })
    });

    let mut rows = Vec::with_capacity(n_sigma);
    let mut failed = vec![0; n_sigma];
    let mut se_joint = Vec::with_capacity(n_sigma);
    let mut se_flat = Vec::with_capacity(n_sigma);
    let mut se_diff = Vec::with_capacity(n_sigma);
    let mut infeasible = 0;
    for (s, &sigma) in cfg.sigma_grid.iter().enumerate() {
        let mut joint = Vec::new();
        let mut flat = Vec::new();
        for r in 0..cfg.n_realizations {
            match &samples[r * n_sigma + s] {
                Ok(x) => {
                    joint.push(x.joint);
                    flat.push(x.flat);
                    infeasible += usize::from(!x.q2_feasible);
                }
                Err(e) => {
                    warn!("fig1 realization {r} at sigma {sigma} failed: {e}");
                    failed[s] += 1;
                }
            }
        }
        let (mj, sj) = mean_and_stderr(&joint);
        let (mf, sf) = mean_and_stderr(&flat);
        let diff: Vec<f64> = joint.iter().zip(&flat).map(|(a, b)| a - b).collect();
        se_diff.push(mean_and_stderr(&diff).1);
        rows.push(vec![sigma, mj, mf]);
        se_joint.push(sj);
        se_flat.push(sf);
    }
    Ok(Fig1Output {
        curve: ExperimentCurve {
            header: vec!["sigma".into(), "rho_joint".into(), "rho_flat".into()],
            rows,
        },
        metadata: Fig1Metadata {
            seed: cfg.seed,
            n_vertices: n0,
            n_edges: n1,
            n_triangles: n2,
            n_harmonic,
            realizations: cfg.n_realizations,
            failed,
            stderr_joint: se_joint,
            stderr_flat: se_flat,
            stderr_difference: se_diff,
            q2_infeasible_runs: infeasible,
            l1_per_sigma: per_sigma,
            config: cfg.clone(),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Config {
    pub complex: GeneratorConfig,
    pub m_grid: Vec<usize>,
    pub n_complexes: usize,
    pub n_signal_draws: usize,
    /// `None` means `min(10, solenoidal dimension)`.
    pub bandwidth: Option<usize>,
    pub learn: LearnOptions,
    pub seed: u64,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            complex: GeneratorConfig::default(),
            m_grid: vec![10, 20, 50, 100],
            n_complexes: 100,
            n_signal_draws: 100,
            bandwidth: None,
            learn: LearnOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexCounts {
    pub n_edges: usize,
    pub n_triangles: usize,
    pub bandwidth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2Metadata {
    pub seed: u64,
    /// Signals are drawn under each complex's ground-truth metric, with
    /// `G1 = I`.
    pub signal_metric: String,
    pub complexes: Vec<Option<ComplexCounts>>,
    /// Failed (excluded) draws per grid point.
    pub failed: Vec<usize>,
    pub stderr: Vec<f64>,
    pub config: Fig2Config,
}

#[derive(Clone, Debug)]
pub struct Fig2Output {
    pub curve: ExperimentCurve,
    pub metadata: Fig2Metadata,
}

struct Fig2Complex {
    counts: ComplexCounts,
    /// per grid point, the MSE of each successful draw
    mse: Vec<Vec<f64>>,
    failed: Vec<usize>,
}

fn fig2_complex(cfg: &Fig2Config, index: usize) -> Result<Fig2Complex> {
    let complex = generate_complex(&GeneratorConfig {
        seed: derive_seed(cfg.seed, Stream::Complex, index as u64),
        ..cfg.complex.clone()
    })?;
    let (n1, n2) = (complex.n_edges(), complex.n_triangles());
    if n2 == 0 {
        return Err(Error::Generation("complex has no triangles".into()));
    }
    let g1 = MetricTensor::identity(1, n1);
    let g2 = generate_metric(
        2,
        n2,
        0.0,
        MetricMode::SimplexFeasible,
        derive_seed(cfg.seed, Stream::Metric, index as u64),
    )?;
    let w_true = g2.inverse_weights();
    let sol_dim = linalg::rank(HodgeOperators::new(&complex)?.b2(), linalg::PINV_RCOND);
    let bandwidth = cfg.bandwidth.unwrap_or(sol_dim.min(10));
    let band = solenoidal_band(&complex, &g1, &g2, bandwidth)?;
    let mut mse = vec![Vec::with_capacity(cfg.n_signal_draws); cfg.m_grid.len()];
    let mut failed = vec![0; cfg.m_grid.len()];
    let m_max = cfg.m_grid.iter().copied().max().unwrap_or(0);
    for d in 0..cfg.n_signal_draws {
        // nested draws: grid point `m` sees the first `m` snapshots
        let stream_index = ((index as u64) << 20) | d as u64;
        let all = mix_band(&band, m_max, derive_seed(cfg.seed, Stream::Snapshots, stream_index))?;
        for (k, &m) in cfg.m_grid.iter().enumerate() {
            let outcome = SnapshotMatrix::new(all.values().columns(0, m).into_owned())
                .and_then(|x| tv_coefficients(&x, &complex))
                .and_then(|a| learn_weights(&a, &cfg.learn))
                .and_then(|w| metric_mse(&w_true, &w));
            match outcome {
                Ok(v) => mse[k].push(v),
                Err(_) => failed[k] += 1,
            }
        }
    }
    Ok(Fig2Complex {
        counts: ComplexCounts {
            n_edges: n1,
            n_triangles: n2,
            bandwidth,
        },
        mse,
        failed,
    })
}

/// Metric estimation error against the number of observed bandlimited
/// solenoidal signals.
pub fn run_fig2(cfg: &Fig2Config, exec: Execution) -> Result<Fig2Output> {
    if cfg.m_grid.is_empty() || cfg.m_grid.contains(&0) {
        return Err(Error::InvalidArgument(
            "fig2 needs a non-empty grid of positive signal counts".into(),
        ));
    }
    if cfg.n_complexes == 0 || cfg.n_signal_draws == 0 {
        return Err(Error::InvalidArgument(
            "fig2 needs at least one complex and one signal draw".into(),
        ));
    }
    let per_complex = map_indexed(cfg.n_complexes, exec, |i| fig2_complex(cfg, i));
    let nk = cfg.m_grid.len();
    let mut pooled = vec![Vec::new(); nk];
    let mut failed = vec![0; nk];
    let mut complexes = Vec::with_capacity(cfg.n_complexes);
    for (i, res) in per_complex.into_iter().enumerate() {
        match res {
            Ok(c) => {
                for k in 0..nk {
                    pooled[k].extend_from_slice(&c.mse[k]);
                    failed[k] += c.failed[k];
                }
                complexes.push(Some(c.counts));
            }
            Err(e) => {
                warn!("fig2 complex {i} failed: {e}");
                failed.iter_mut().for_each(|f| *f += cfg.n_signal_draws);
                complexes.push(None);
            }
        }
    }
    let mut rows = Vec::with_capacity(nk);
    let mut stderr = Vec::with_capacity(nk);
    for (k, &m) in cfg.m_grid.iter().enumerate() {
        let (mean, se) = mean_and_stderr(&pooled[k]);
        rows.push(vec![m as f64, mean]);
        stderr.push(se);
    }
    Ok(Fig2Output {
        curve: ExperimentCurve {
            header: vec!["M".into(), "mse".into()],
            rows,
        },
        metadata: Fig2Metadata {
            seed: cfg.seed,
            signal_metric: "ground truth G2, identity G1".into(),
            complexes,
            failed,
            stderr,
            config: cfg.clone(),
        },
    })
}
