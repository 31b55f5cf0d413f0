//! The real polynomial whose roots are the attainable `|lambda|^2`, its
//! roots, registration-time scans and the extended-receiver size bound.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Schur};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::binom;
use crate::chain::{CouplingMatrix, Partition};
use crate::dynamics::{TransferBlock, TransferEvaluator};
use crate::error::{PstError, Result};
use crate::{CMatrix, C64};

/// Inner products `b_i^dagger b_j` of the transfer-block columns.
#[derive(Debug, Clone)]
pub struct GramData {
    pub g: CMatrix,
}

pub fn gram(v: &TransferBlock) -> GramData {
    gram_of(&v.v_hat)
}

pub fn gram_of(v_hat: &CMatrix) -> GramData {
    GramData {
        g: v_hat.adjoint() * v_hat,
    }
}

/// Monic polynomial in `x = |lambda|^2`, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPolynomial {
    pub coeffs: Vec<f64>,
    /// Largest imaginary part dropped from the interpolated coefficients.
    pub imag_residue: f64,
}

impl LambdaPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

fn det(m: CMatrix) -> C64 {
    if m.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    m.lu().determinant()
}

/// `x * det(G' - x I) - det(G - x diag(1, .., 1, 0))`, where `G'` drops the
/// last sender state.
fn characteristic(g: &CMatrix, x: f64) -> C64 {
    let n = g.nrows();
    let lead = g.view((0, 0), (n - 1, n - 1)).into_owned();
    let mut shifted_lead = lead;
    let mut shifted = g.clone();
    for i in 0..n - 1 {
        shifted_lead[(i, i)] -= x;
        shifted[(i, i)] -= x;
    }
    det(shifted_lead) * x - det(shifted)
}

pub fn lambda_polynomial(gram: &GramData) -> Result<LambdaPolynomial> {
    let g = &gram.g;
    let n = g.nrows();
    if n == 0 || !g.is_square() {
        return Err(PstError::InvalidArgument(
            "Gram matrix must be square and nonempty".into(),
        ));
    }
    let scale = g.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (g[(i, j)] - g[(j, i)].conj()).norm())
        .fold(0.0, f64::max);
    if asym > 1e-10 * scale.max(1.0) {
        return Err(PstError::NotHermitian(asym));
    }
    // Chebyshev nodes on [0, 1], where every root of interest lives.
    let m = n + 1;
    let nodes: Vec<f64> = (0..m)
        .map(|i| 0.5 + 0.5 * ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos())
        .collect();
    let vander = DMatrix::from_fn(m, m, |i, j| nodes[i].powi(j as i32));
    let values: Vec<C64> = nodes.iter().map(|&x| characteristic(g, x)).collect();
    let lu = vander.lu();
    let re = lu
        .solve(&DVector::from_iterator(m, values.iter().map(|z| z.re)))
        .ok_or_else(|| PstError::InvalidArgument("singular interpolation system".into()))?;
    let im = lu
        .solve(&DVector::from_iterator(m, values.iter().map(|z| z.im)))
        .ok_or_else(|| PstError::InvalidArgument("singular interpolation system".into()))?;
    // Leading coefficient is exactly (-1)^(n-1).
    let lead = if n % 2 == 1 { 1.0 } else { -1.0 };
    let mut coeffs: Vec<f64> = re.iter().map(|c| c / lead).collect();
    coeffs[n] = 1.0;
    let imag_residue = im.iter().map(|c| c.abs()).fold(0.0, f64::max);
    Ok(LambdaPolynomial {
        coeffs,
        imag_residue,
    })
}

/// One distinct root, as `|lambda|` and `|lambda|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaRoot {
    pub abs: f64,
    pub x: f64,
    pub multiplicity: usize,
}

const IMAG_TOL: f64 = 1e-9;
const CLUSTER_TOL: f64 = 1e-4;

fn polynomial_roots(poly: &LambdaPolynomial) -> Vec<C64> {
    let n = poly.degree();
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![C64::new(-poly.coeffs[0], 0.0)];
    }
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -poly.coeffs[i];
    }
    match Schur::try_new(comp, f64::EPSILON, 10_000) {
        Some(schur) => schur.complex_eigenvalues().iter().copied().collect(),
        None => durand_kerner(&poly.coeffs),
    }
}

/// Simultaneous root iteration, used when the QR sweep stalls (for example
/// on a nilpotent companion matrix).
fn durand_kerner(coeffs: &[f64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    let eval = |z: C64| {
        coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    };
    let seed = C64::new(0.4, 0.9);
    let mut z: Vec<C64> = (0..n).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let denom = (0..n)
                .filter(|&j| j != i)
                .fold(C64::new(1.0, 0.0), |acc, j| acc * (z[i] - z[j]));
            if denom.norm() == 0.0 {
                continue;
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Groups roots of a repeated factor, which the companion eigenproblem
/// splits into a small complex cloud.
fn cluster(mut z: Vec<C64>) -> Vec<(C64, usize)> {
    z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut groups: Vec<Vec<C64>> = Vec::new();
    for r in z {
        let joined = groups.iter_mut().find(|grp| {
            grp.iter()
                .any(|q| (q - r).norm() < CLUSTER_TOL * r.norm().max(1.0))
        });
        match joined {
            Some(grp) => grp.push(r),
            None => groups.push(vec![r]),
        }
    }
    let mut out = Vec::new();
    for grp in groups {
        if grp.len() > 1 && grp.iter().any(|q| q.im.abs() >= IMAG_TOL) {
            let mean = grp.iter().sum::<C64>() / grp.len() as f64;
            out.push((mean, grp.len()));
        } else {
            out.extend(grp.into_iter().map(|q| (q, 1)));
        }
    }
    out
}

/// Real roots in `[0, 1]`, mapped to `|lambda|` and sorted ascending.
pub fn real_roots(poly: &LambdaPolynomial) -> Vec<LambdaRoot> {
    let mut roots: Vec<LambdaRoot> = cluster(polynomial_roots(poly))
        .into_iter()
        .filter(|(z, _)| z.im.abs() < IMAG_TOL && z.re >= -1e-9 && z.re <= 1.0 + 1e-9)
        .map(|(z, multiplicity)| {
            let x = z.re.clamp(0.0, 1.0);
            LambdaRoot {
                abs: x.sqrt(),
                x,
                multiplicity,
            }
        })
        .collect();
    roots.sort_by(|a, b| a.abs.total_cmp(&b.abs));
    roots
}

/// Roots repeated according to multiplicity.
pub fn expand_roots(roots: &[LambdaRoot]) -> Vec<f64> {
    roots
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.abs, r.multiplicity))
        .collect()
}

/// All `|lambda|` values of a transfer block.
pub fn roots_of(v: &CMatrix) -> Result<Vec<LambdaRoot>> {
    Ok(real_roots(&lambda_polynomial(&gram_of(v))?))
}

/// Uniform grid `tau_min, tau_min + step, ..` up to `tau_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub tau_min: f64,
    pub tau_max: f64,
    pub step: f64,
}

impl TauGrid {
    pub fn new(tau_min: f64, tau_max: f64, step: f64) -> Result<Self> {
        if !(tau_min.is_finite() && tau_max.is_finite() && step.is_finite()) {
            return Err(PstError::InvalidArgument(
                "scan bounds must be finite".into(),
            ));
        }
        if step <= 0.0 {
            return Err(PstError::InvalidArgument(format!(
                "scan step must be positive, got {step}"
            )));
        }
        if tau_max < tau_min {
            return Err(PstError::InvalidArgument(format!(
                "empty scan range [{tau_min}, {tau_max}]"
            )));
        }
        Ok(TauGrid {
            tau_min,
            tau_max,
            step,
        })
    }

    pub fn len(&self) -> usize {
        ((self.tau_max - self.tau_min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        self.tau_min + i as f64 * self.step
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScanOptions {
    /// Golden-section refinement of the grid maximum within one step.
    pub refine: bool,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub taus: Vec<f64>,
    /// Expanded roots (with multiplicity) at every grid point.
    pub roots: Vec<Vec<f64>>,
    pub min_root: Vec<f64>,
    pub argmax: usize,
    pub tau0: f64,
    pub lambda_min: f64,
    pub refined: Option<(f64, f64)>,
    pub k: usize,
    pub n_er: usize,
    pub n_s_k: usize,
}

/// Smallest attainable `|lambda|` at one time, with every root.
pub fn min_root_at(ev: &TransferEvaluator, tau: f64) -> (Vec<f64>, f64) {
    let block = ev.at(tau);
    let roots = match roots_of(&block.v_hat) {
        Ok(r) => expand_roots(&r),
        Err(_) => vec![],
    };
    let min = roots.first().copied().unwrap_or_else(|| {
        log::warn!("no admissible root at tau = {tau}");
        0.0
    });
    (roots, min)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

pub fn scan(
    couplings: &CouplingMatrix,
    partition: &Partition,
    k: usize,
    grid: &TauGrid,
    options: ScanOptions,
) -> Result<ScanResult> {
    let ev = TransferEvaluator::new(couplings, partition, k)?;
    scan_with(&ev, partition, grid, options)
}

/// Scan against a prepared evaluator.
pub fn scan_with(
    ev: &TransferEvaluator,
    partition: &Partition,
    grid: &TauGrid,
    options: ScanOptions,
) -> Result<ScanResult> {
    let taus: Vec<f64> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let points: Vec<(Vec<f64>, f64)> = taus.par_iter().map(|&t| min_root_at(ev, t)).collect();
    let mut argmax = 0;
    for (i, p) in points.iter().enumerate() {
        if p.1 > points[argmax].1 {
            argmax = i;
        }
    }
    let (roots, min_root): (Vec<_>, Vec<_>) = points.into_iter().unzip();
    let refined = options.refine.then(|| {
        let lo = (taus[argmax] - grid.step).max(grid.tau_min);
        let hi = (taus[argmax] + grid.step).min(grid.tau_max);
        golden_max(|t| min_root_at(ev, t).1, lo, hi)
    });
    Ok(ScanResult {
        tau0: taus[argmax],
        lambda_min: min_root[argmax],
        taus,
        roots,
        min_root,
        argmax,
        refined,
        k: ev.k(),
        n_er: partition.n_er(),
        n_s_k: binom(partition.n_s(), ev.k()) as usize,
    })
}

/// Formats with nine significant digits, trailing zeros trimmed.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_scan_csv<W: Write>(result: &ScanResult, mut w: W) -> Result<()> {
    let m = result.n_s_k;
    let mut header = vec!["tau".to_string()];
    header.extend((1..=m).map(|i| format!("root_{i}")));
    header.push("min_root".into());
    writeln!(w, "{}", header.join(","))?;
    for i in 0..result.taus.len() {
        let mut row = vec![sig9(result.taus[i])];
        let r = &result.roots[i];
        row.extend((0..m).map(|j| r.get(j).map(|&v| sig9(v)).unwrap_or_default()));
        row.push(sig9(result.min_root[i]));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScanSummary {
    pub tau0: f64,
    pub lambda_min: f64,
    pub n_er: usize,
    pub k: usize,
    pub chain_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub refined_tau0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl ScanResult {
    pub fn summary(&self, chain_id: &str) -> ScanSummary {
        ScanSummary {
            tau0: self.tau0,
            lambda_min: self.lambda_min,
            n_er: self.n_er,
            k: self.k,
            chain_id: chain_id.to_string(),
            refined_tau0: self.refined.map(|r| r.0),
            config_hash: None,
        }
    }
}

/// Whether an extended receiver has enough k-states for restoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub n_er_k: u64,
    pub n_s_k: u64,
    /// `2 N_S - 1`.
    pub required: u64,
    /// Parameter-counting bound `3/2 N_S - 1/N_S`, weaker than `required`.
    pub counting_bound: f64,
}

pub fn feasibility(n_er: usize, n_s: usize, k: usize) -> Feasibility {
    let n_er_k = binom(n_er, k);
    let n_s_k = binom(n_s, k);
    let required = (2 * n_s_k).saturating_sub(1);
    let counting_bound = if n_s_k == 0 {
        0.0
    } else {
        1.5 * n_s_k as f64 - 1.0 / n_s_k as f64
    };
    Feasibility {
        feasible: n_s_k > 0 && n_er_k >= required,
        n_er_k,
        n_s_k,
        required,
        counting_bound,
    }
}
