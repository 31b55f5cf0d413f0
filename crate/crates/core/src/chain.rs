//! Chain geometry, dipolar couplings and XX Hamiltonian blocks.
//!
//! Units: the reference nearest-neighbour coupling is 1 and time is the
//! dimensionless `tau = t * D_12`. The XX term moves one excitation between
//! sites `i` and `j` with amplitude `D_ij / 2`; there is no diagonal part.

use nalgebra::DMatrix;

use crate::basis::{self, SectorBasis};
use crate::error::{PstError, Result};
use crate::{CMatrix, C64};

/// Largest chain for which the full block-diagonal Hamiltonian is assembled.
pub const FULL_HAMILTONIAN_MAX: usize = 14;

/// Site layout of a dipolar chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Unit spacing, all nearest-neighbour couplings equal to 1.
    Uniform,
    /// Explicit, strictly increasing site positions.
    Positions(Vec<f64>),
    /// Nearest-neighbour couplings for selected edges `(i, i + 1)` (0-based
    /// left site). Each is turned into a spacing `D^(-1/3)`; untouched edges
    /// keep unit spacing and all long-range couplings follow from positions.
    NearestNeighbor(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingModel {
    /// `D_ij = 1 / r_ij^3`.
    Dipole,
    /// Full symmetric matrix supplied by the caller.
    Explicit(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub n_sites: usize,
    pub geometry: Geometry,
    pub model: CouplingModel,
}

impl ChainSpec {
    pub fn homogeneous(n_sites: usize) -> Self {
        ChainSpec {
            n_sites,
            geometry: Geometry::Uniform,
            model: CouplingModel::Dipole,
        }
    }

    pub fn with_positions(positions: Vec<f64>) -> Self {
        ChainSpec {
            n_sites: positions.len(),
            geometry: Geometry::Positions(positions),
            model: CouplingModel::Dipole,
        }
    }

    /// Dipolar chain whose listed nearest-neighbour couplings are realized by
    /// moving the sites.
    pub fn with_nn_overrides(n_sites: usize, overrides: Vec<(usize, f64)>) -> Self {
        ChainSpec {
            n_sites,
            geometry: Geometry::NearestNeighbor(overrides),
            model: CouplingModel::Dipole,
        }
    }

    pub fn explicit(d: DMatrix<f64>) -> Self {
        ChainSpec {
            n_sites: d.nrows(),
            geometry: Geometry::Uniform,
            model: CouplingModel::Explicit(d),
        }
    }

    /// Unit-spaced dipolar matrix with the listed nearest-neighbour entries
    /// replaced in place; long-range couplings stay at `1/|i-j|^3`.
    pub fn direct_overrides(n_sites: usize, overrides: &[(usize, f64)]) -> Self {
        let mut d = dipole_from_positions(&(0..n_sites).map(|i| i as f64).collect::<Vec<_>>());
        for &(i, v) in overrides {
            if i + 1 < n_sites {
                d[(i, i + 1)] = v;
                d[(i + 1, i)] = v;
            }
        }
        Self::explicit(d)
    }

    /// The 42-site chain with two adjusted coupling pairs at each end,
    /// `D_12 = D_41,42 = 0.3005` and `D_23 = D_40,41 = 0.5311`.
    pub fn adjusted_end_pairs(n_sites: usize, d12: f64, d23: f64) -> Vec<(usize, f64)> {
        vec![(0, d12), (1, d23), (n_sites - 3, d23), (n_sites - 2, d12)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(PstError::InvalidSpec(format!(
                "need at least 2 sites, got {}",
                self.n_sites
            )));
        }
        if let CouplingModel::Explicit(d) = &self.model {
            if d.nrows() != self.n_sites || d.ncols() != self.n_sites {
                return Err(PstError::InvalidSpec("explicit matrix shape".into()));
            }
            for i in 0..self.n_sites {
                if d[(i, i)] != 0.0 {
                    return Err(PstError::InvalidSpec("nonzero diagonal coupling".into()));
                }
                for j in 0..self.n_sites {
                    if d[(i, j)] != d[(j, i)] {
                        return Err(PstError::InvalidSpec(
                            "coupling matrix not symmetric".into(),
                        ));
                    }
                    if d[(i, j)] < 0.0 || !d[(i, j)].is_finite() {
                        return Err(PstError::InvalidSpec(format!(
                            "coupling ({}, {}) must be nonnegative",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
            return Ok(());
        }
        match &self.geometry {
            Geometry::Uniform => Ok(()),
            Geometry::Positions(p) => {
                if p.len() != self.n_sites {
                    return Err(PstError::InvalidSpec("position count != n_sites".into()));
                }
                if p.windows(2)
                    .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
                    || p.iter().any(|x| !x.is_finite())
                {
                    return Err(PstError::InvalidSpec(
                        "positions must be finite and strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            Geometry::NearestNeighbor(edges) => {
                for &(i, v) in edges {
                    if i + 1 >= self.n_sites {
                        return Err(PstError::InvalidSpec(format!(
                            "edge {}-{} outside chain",
                            i + 1,
                            i + 2
                        )));
                    }
                    if !v.is_finite() || v <= 0.0 {
                        return Err(PstError::InvalidSpec(format!(
                            "coupling on edge {}-{} must be positive",
                            i + 1,
                            i + 2
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Site positions implied by the geometry (dipole model only).
    pub fn positions(&self) -> Option<Vec<f64>> {
        if matches!(self.model, CouplingModel::Explicit(_)) {
            return None;
        }
        Some(match &self.geometry {
            Geometry::Uniform => (0..self.n_sites).map(|i| i as f64).collect(),
            Geometry::Positions(p) => p.clone(),
            Geometry::NearestNeighbor(edges) => {
                let mut gaps = vec![1.0; self.n_sites - 1];
                for &(i, v) in edges {
                    gaps[i] = v.powf(-1.0 / 3.0);
                }
                let mut pos = Vec::with_capacity(self.n_sites);
                let mut x = 0.0;
                pos.push(x);
                for g in gaps {
                    x += g;
                    pos.push(x);
                }
                pos
            }
        })
    }
}

/// Symmetric coupling constants with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    d: DMatrix<f64>,
}

impl CouplingMatrix {
    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }
}

fn dipole_from_positions(pos: &[f64]) -> DMatrix<f64> {
    let n = pos.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (pos[i] - pos[j]).abs().powi(-3)
        }
    })
}

pub fn build_couplings(spec: &ChainSpec) -> Result<CouplingMatrix> {
    spec.validate()?;
    let d = match &spec.model {
        CouplingModel::Explicit(d) => d.clone(),
        CouplingModel::Dipole => {
            let pos = spec.positions().expect("dipole model has positions");
            dipole_from_positions(&pos)
        }
    };
    Ok(CouplingMatrix { d })
}

/// XX Hamiltonian restricted to one excitation sector.
pub fn hamiltonian_block(couplings: &CouplingMatrix, basis: &SectorBasis) -> Result<CMatrix> {
    let n = couplings.n();
    if basis.n() != n {
        return Err(PstError::DimensionMismatch {
            expected: n,
            got: basis.n(),
            context: "sector basis register size vs coupling matrix",
        });
    }
    let dim = basis.len();
    let mut h = CMatrix::zeros(dim, dim);
    for (col, &mask) in basis.states().iter().enumerate() {
        for i in (0..n).filter(|&i| mask >> i & 1 == 1) {
            for j in (0..n).filter(|&j| mask >> j & 1 == 0) {
                let d = couplings.get(i, j);
                if d == 0.0 {
                    continue;
                }
                let target = mask ^ (1u64 << i) ^ (1u64 << j);
                let row = basis.index_of(target).expect("hop stays in sector");
                h[(row, col)] += C64::new(0.5 * d, 0.0);
            }
        }
    }
    Ok(h)
}

/// Direct sum of all sector blocks, in excitation order.
#[derive(Debug, Clone)]
pub struct BlockDiagonal {
    n: usize,
    blocks: Vec<CMatrix>,
}

impl BlockDiagonal {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block(&self, k: usize) -> &CMatrix {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    /// Dense `2^n x 2^n` matrix in the excitation-ordered basis.
    pub fn to_dense(&self) -> CMatrix {
        let dim = 1usize << self.n;
        let mut out = CMatrix::zeros(dim, dim);
        let mut off = 0;
        for b in &self.blocks {
            let m = b.nrows();
            out.view_mut((off, off), (m, m)).copy_from(b);
            off += m;
        }
        out
    }
}

pub fn hamiltonian_full(couplings: &CouplingMatrix) -> Result<BlockDiagonal> {
    let n = couplings.n();
    if n > FULL_HAMILTONIAN_MAX {
        return Err(PstError::SizeGuard {
            what: "chain length for full Hamiltonian",
            value: n,
            limit: FULL_HAMILTONIAN_MAX,
        });
    }
    let blocks = (0..=n)
        .map(|k| hamiltonian_block(couplings, &basis::k_states(n, k)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockDiagonal { n, blocks })
}

/// Subsystem layout along the chain. All sites are 0-based.
///
/// `S` is the first `n_s` sites, `R` the last `n_r`, `ER` the last `n_er`
/// (so `A = ER \ R` sits right before `R`), and everything strictly between
/// `S` and `R` is the transmission line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n_sites: usize,
    n_s: usize,
    n_r: usize,
    n_er: usize,
    s0: Option<Vec<usize>>,
    r0: Option<Vec<usize>>,
}

impl Partition {
    pub fn new(n_sites: usize, n_s: usize, n_er: usize) -> Result<Self> {
        Self::with_receiver(n_sites, n_s, n_s, n_er)
    }

    pub fn with_receiver(n_sites: usize, n_s: usize, n_r: usize, n_er: usize) -> Result<Self> {
        let bad = |m: String| Err(PstError::InvalidPartition(m));
        if n_s == 0 || n_r == 0 {
            return bad("sender and receiver must be nonempty".into());
        }
        if n_r != n_s {
            return bad(format!("restoring needs n_r = n_s (got {n_r} vs {n_s})"));
        }
        if n_er < n_r {
            return bad(format!("n_er = {n_er} smaller than n_r = {n_r}"));
        }
        if n_s + n_er > n_sites {
            return bad(format!(
                "sender ({n_s}) and extended receiver ({n_er}) overlap on {n_sites} sites"
            ));
        }
        Ok(Partition {
            n_sites,
            n_s,
            n_r,
            n_er,
            s0: None,
            r0: None,
        })
    }

    /// Attaches the encoding register `S0` and decoding register `R0`
    /// (0-based sites, both inside the transmission line and disjoint).
    pub fn with_registers(mut self, s0: Vec<usize>, r0: Vec<usize>) -> Result<Self> {
        let tl = self.transmission_line();
        for (name, reg) in [("s0", &s0), ("r0", &r0)] {
            if reg.is_empty() {
                return Err(PstError::InvalidPartition(format!("{name} is empty")));
            }
            if let Some(&s) = reg.iter().find(|s| !tl.contains(s)) {
                return Err(PstError::InvalidPartition(format!(
                    "{name} site {} is not in the transmission line",
                    s + 1
                )));
            }
        }
        if s0.iter().any(|s| r0.contains(s)) {
            return Err(PstError::InvalidPartition("s0 and r0 overlap".into()));
        }
        if s0.len() != r0.len() {
            return Err(PstError::InvalidPartition("s0 and r0 sizes differ".into()));
        }
        self.s0 = Some(s0);
        self.r0 = Some(r0);
        Ok(self)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
    pub fn n_s(&self) -> usize {
        self.n_s
    }
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_er(&self) -> usize {
        self.n_er
    }

    pub fn sender(&self) -> Vec<usize> {
        (0..self.n_s).collect()
    }

    pub fn receiver(&self) -> Vec<usize> {
        (self.n_sites - self.n_r..self.n_sites).collect()
    }

    pub fn extended_receiver(&self) -> Vec<usize> {
        (self.n_sites - self.n_er..self.n_sites).collect()
    }

    /// `A = ER \ R`.
    pub fn ancilla_sites(&self) -> Vec<usize> {
        (self.n_sites - self.n_er..self.n_sites - self.n_r).collect()
    }

    pub fn transmission_line(&self) -> Vec<usize> {
        (self.n_s..self.n_sites - self.n_r).collect()
    }

    pub fn s0(&self) -> Option<&[usize]> {
        self.s0.as_deref()
    }

    pub fn r0(&self) -> Option<&[usize]> {
        self.r0.as_deref()
    }
}
