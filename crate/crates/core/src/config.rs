//! Flat `key = value` run configuration.
//!
//! ```text
//! # Table 1a, n_ER = 5
//! chain.n = 10
//! partition.n_s = 3
//! partition.n_er = 5
//! excitation.k = 2
//! scan.tau_max = 20
//! ```
//!
//! Sites in the file are 1-based. Unknown keys, duplicate keys and malformed
//! values are rejected before anything is computed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::chain::{ChainSpec, CouplingModel, Geometry, Partition};
use crate::error::{PstError, Result};
use crate::lambda::TauGrid;
use crate::protocol::Variant;
use crate::restore::{RestoreMode, SolverOptions};
use crate::C64;

const KNOWN_KEYS: &[&str] = &[
    "chain.id",
    "chain.n",
    "chain.model",
    "chain.positions",
    "chain.nn_overrides",
    "chain.nn_mode",
    "chain.matrix",
    "partition.n_s",
    "partition.n_r",
    "partition.n_er",
    "partition.s0",
    "partition.r0",
    "excitation.k",
    "scan.tau_min",
    "scan.tau_max",
    "scan.step",
    "scan.refine",
    "solver.mode",
    "solver.restarts",
    "solver.tol",
    "solver.seed",
    "solver.max_iter",
    "solver.q",
    "solver.n_extra_zero_rows",
    "solver.tau0",
    "protocol.variant",
    "protocol.input",
    "protocol.epsilon",
    "output.format",
    "output.path",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(PstError::Config(format!("unknown output format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub grid: TauGrid,
    pub refine: bool,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: RestoreMode,
    pub restarts: Option<usize>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub max_iter: Option<usize>,
    pub n_extra_zero_rows: Option<usize>,
    /// Registration time; found by a scan when absent.
    pub tau0: Option<f64>,
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        let mut o = if self.mode.layers().is_some() {
            SolverOptions::circuit(self.seed)
        } else {
            SolverOptions::general(self.seed)
        };
        if let Some(r) = self.restarts {
            o.restarts = r;
        }
        if let Some(t) = self.tol {
            o.tol = t;
        }
        if let Some(m) = self.max_iter {
            o.max_iter = m;
        }
        o
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub variant: Variant,
    /// Sender amplitudes; drawn from the seed when absent.
    pub input: Option<Vec<C64>>,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub chain: ChainSpec,
    pub chain_id: String,
    pub partition: Partition,
    pub k: usize,
    pub scan: ScanConfig,
    pub solver: SolverConfig,
    pub protocol: ProtocolConfig,
    /// Command default when absent.
    pub format: Option<OutputFormat>,
    pub output: Option<PathBuf>,
    /// Hex SHA-256 of the canonical key/value listing.
    pub hash: String,
}

/// Raw key/value pairs in file order, validated against the known keys.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PstError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = unquote(value.trim());
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(PstError::Config(format!(
                    "line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(PstError::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PstError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Flag override; the key must be known.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(PstError::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Sorted `key = value` lines, leaving out the `output.*` keys so the
    /// hash identifies the computation rather than where it was written.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .filter(|(k, _)| !k.starts_with("output."))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| PstError::Config(format!("`{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| PstError::Config(format!("missing required key `{key}`")))
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let chain = self.chain()?;
        chain
            .validate()
            .map_err(|e| PstError::Config(e.to_string()))?;
        let n = chain.n_sites;
        let n_s: usize = self.required("partition.n_s")?;
        let n_r: usize = self.parsed("partition.n_r")?.unwrap_or(n_s);
        let n_er: usize = self.required("partition.n_er")?;
        let mut partition = Partition::with_receiver(n, n_s, n_r, n_er)
            .map_err(|e| PstError::Config(e.to_string()))?;
        match (self.get("partition.s0"), self.get("partition.r0")) {
            (None, None) => {}
            (Some(s0), Some(r0)) => {
                let s0 = parse_sites(s0, n, "partition.s0")?;
                let r0 = parse_sites(r0, n, "partition.r0")?;
                partition = partition
                    .with_registers(s0, r0)
                    .map_err(|e| PstError::Config(e.to_string()))?;
            }
            _ => {
                return Err(PstError::Config(
                    "partition.s0 and partition.r0 must be given together".into(),
                ))
            }
        }
        let k: usize = self.required("excitation.k")?;
        if k > n_s {
            return Err(PstError::Config(format!(
                "excitation.k = {k} exceeds partition.n_s = {n_s}"
            )));
        }

        let grid = TauGrid::new(
            self.parsed("scan.tau_min")?.unwrap_or(0.0),
            self.parsed("scan.tau_max")?.unwrap_or(20.0),
            self.parsed("scan.step")?.unwrap_or(0.001),
        )
        .map_err(|e| PstError::Config(e.to_string()))?;
        let scan = ScanConfig {
            grid,
            refine: self.parsed("scan.refine")?.unwrap_or(false),
        };

        let layers: Option<usize> = self.parsed("solver.q")?;
        let mode_name = self.get("solver.mode").unwrap_or("preserving-general");
        let mode = RestoreMode::parse(mode_name, layers.unwrap_or(0))?;
        match (mode.layers(), layers) {
            (Some(_), None) | (Some(0), _) => {
                return Err(PstError::Config(format!(
                    "{mode_name} needs a positive solver.q"
                )))
            }
            (None, Some(_)) => {
                return Err(PstError::Config(format!(
                    "solver.q has no meaning for {mode_name}"
                )))
            }
            _ => {}
        }
        let tol: Option<f64> = self.parsed("solver.tol")?;
        if tol.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return Err(PstError::Config("solver.tol must be positive".into()));
        }
        let solver = SolverConfig {
            mode,
            restarts: self.parsed("solver.restarts")?,
            tol,
            seed: self.parsed("solver.seed")?.unwrap_or(0),
            max_iter: self.parsed("solver.max_iter")?,
            n_extra_zero_rows: self.parsed("solver.n_extra_zero_rows")?,
            tau0: self.parsed("solver.tau0")?,
        };
        if solver.restarts == Some(0) {
            return Err(PstError::Config(
                "solver.restarts must be at least 1".into(),
            ));
        }

        let epsilon: f64 = self.parsed("protocol.epsilon")?.unwrap_or(0.01);
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(PstError::Config(
                "protocol.epsilon must lie in (0, 1)".into(),
            ));
        }
        let protocol = ProtocolConfig {
            variant: Variant::parse(self.get("protocol.variant").unwrap_or("k-excitation"))?,
            input: self
                .get("protocol.input")
                .map(parse_complex_list)
                .transpose()?,
            epsilon,
        };

        Ok(RunConfig {
            chain,
            chain_id: self
                .get("chain.id")
                .map(String::from)
                .unwrap_or_else(|| format!("dipole-{n}")),
            partition,
            k,
            scan,
            solver,
            protocol,
            format: self
                .get("output.format")
                .map(OutputFormat::parse)
                .transpose()?,
            output: self.get("output.path").map(PathBuf::from),
            hash: self.hash(),
        })
    }

    fn chain(&self) -> Result<ChainSpec> {
        let model = self.get("chain.model").unwrap_or("dipole");
        let n_key: Option<usize> = self.parsed("chain.n")?;
        match model {
            "explicit" => {
                let text = self.get("chain.matrix").ok_or_else(|| {
                    PstError::Config("chain.model = explicit needs chain.matrix".into())
                })?;
                let d = parse_matrix(text)?;
                if n_key.is_some_and(|n| n != d.nrows()) {
                    return Err(PstError::Config(
                        "chain.n disagrees with chain.matrix".into(),
                    ));
                }
                for key in ["chain.positions", "chain.nn_overrides"] {
                    if self.get(key).is_some() {
                        return Err(PstError::Config(format!(
                            "{key} conflicts with chain.model = explicit"
                        )));
                    }
                }
                Ok(ChainSpec::explicit(d))
            }
            "dipole" => {
                if self.get("chain.matrix").is_some() {
                    return Err(PstError::Config(
                        "chain.matrix needs chain.model = explicit".into(),
                    ));
                }
                if let Some(text) = self.get("chain.positions") {
                    if self.get("chain.nn_overrides").is_some() {
                        return Err(PstError::Config(
                            "chain.positions and chain.nn_overrides are exclusive".into(),
                        ));
                    }
                    let pos = parse_reals(text, "chain.positions")?;
                    if n_key.is_some_and(|n| n != pos.len()) {
                        return Err(PstError::Config(
                            "chain.n disagrees with chain.positions".into(),
                        ));
                    }
                    return Ok(ChainSpec::with_positions(pos));
                }
                let n = n_key
                    .ok_or_else(|| PstError::Config("missing required key `chain.n`".into()))?;
                match self.get("chain.nn_overrides") {
                    None => {
                        if self.get("chain.nn_mode").is_some() {
                            return Err(PstError::Config(
                                "chain.nn_mode without chain.nn_overrides".into(),
                            ));
                        }
                        Ok(ChainSpec::homogeneous(n))
                    }
                    Some(text) => {
                        let overrides = parse_overrides(text, n)?;
                        match self.get("chain.nn_mode").unwrap_or("distance") {
                            "distance" => Ok(ChainSpec::with_nn_overrides(n, overrides)),
                            "direct" => Ok(ChainSpec::direct_overrides(n, &overrides)),
                            other => Err(PstError::Config(format!(
                                "chain.nn_mode must be distance or direct, got `{other}`"
                            ))),
                        }
                    }
                }
            }
            other => Err(PstError::Config(format!(
                "chain.model must be dipole or explicit, got `{other}`"
            ))),
        }
    }
}

fn unquote(v: &str) -> String {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
        .to_string()
}

fn parse_reals(text: &str, key: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| PstError::Config(format!("`{key}`: bad number `{}`", t.trim())))
        })
        .collect()
}

/// Rows separated by `;`, entries by `,`.
fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| parse_reals(r, "chain.matrix"))
        .collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PstError::Config("chain.matrix must be square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// `"1-2:0.3005,2-3:0.5311"` into 0-based left sites.
fn parse_overrides(text: &str, n: usize) -> Result<Vec<(usize, f64)>> {
    text.split(',')
        .map(|item| {
            let bad =
                || PstError::Config(format!("chain.nn_overrides: bad entry `{}`", item.trim()));
            let (edge, value) = item.trim().split_once(':').ok_or_else(bad)?;
            let (a, b) = edge.split_once('-').ok_or_else(bad)?;
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            let d: f64 = value.trim().parse().map_err(|_| bad())?;
            if a == 0 || b != a + 1 || b > n {
                return Err(PstError::Config(format!(
                    "chain.nn_overrides: `{a}-{b}` is not a nearest-neighbour edge of 1..={n}"
                )));
            }
            Ok((a - 1, d))
        })
        .collect()
}

/// `"4"`, `"4,5"` or `"4-6"` (1-based) into 0-based sites.
pub fn parse_sites(text: &str, n: usize, key: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let bad = || PstError::Config(format!("`{key}`: bad site list `{text}`"));
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (
                a.trim().parse::<usize>().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ),
            None => {
                let s = part.parse::<usize>().map_err(|_| bad())?;
                (s, s)
            }
        };
        if lo == 0 || hi < lo || hi > n {
            return Err(PstError::Config(format!(
                "`{key}`: sites must lie in 1..={n}"
            )));
        }
        out.extend(lo - 1..hi);
    }
    Ok(out)
}

/// One complex number: `0.6`, `-0.8i`, `0.3-0.1i`, `1e-3+2e-2i`.
pub fn parse_complex(text: &str) -> Result<C64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || PstError::Config(format!("bad complex number `{text}`"));
    let Some(body) = t.strip_suffix('i') else {
        return Ok(C64::new(t.parse().map_err(|_| bad())?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let imag = |s: &str| -> Result<f64> {
        match s {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            s => s.parse().map_err(|_| bad()),
        }
    };
    match split {
        Some(i) => Ok(C64::new(
            body[..i].parse().map_err(|_| bad())?,
            imag(&body[i..])?,
        )),
        None => Ok(C64::new(0.0, imag(body)?)),
    }
}

pub fn parse_complex_list(text: &str) -> Result<Vec<C64>> {
    text.split(',').map(parse_complex).collect()
}

/// Reads and resolves a config file, applying `overrides` first.
pub fn load_config(path: &Path, overrides: &[(&str, String)]) -> Result<RunConfig> {
    let mut raw = RawConfig::load(path)?;
    for (k, v) in overrides {
        raw.set(k, v.clone())?;
    }
    raw.resolve()
}

impl RunConfig {
    pub fn is_explicit(&self) -> bool {
        matches!(self.chain.model, CouplingModel::Explicit(_))
    }

    pub fn uses_overrides(&self) -> bool {
        matches!(self.chain.geometry, Geometry::NearestNeighbor(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_1A: &str =
        "chain.n = 10\npartition.n_s = 3\npartition.n_er = 5\nexcitation.k = 2\n";

    #[test]
    fn minimal_config() {
        let c = RawConfig::parse(TABLE_1A).unwrap().resolve().unwrap();
        assert_eq!(c.partition.n_er(), 5);
        assert_eq!(c.partition.n_r(), 3);
        assert_eq!(c.scan.grid.len(), 20_001);
        assert_eq!(c.solver.mode, RestoreMode::PreservingGeneral);
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(RawConfig::parse("chain.nn = 3").is_err());
        assert!(RawConfig::parse("chain.n = 3\nchain.n = 4").is_err());
        assert!(RawConfig::parse("chain.n 3").is_err());
    }

    #[test]
    fn empty_scan_range_is_config_error() {
        let text = format!("{TABLE_1A}scan.tau_min = 5\nscan.tau_max = 1\n");
        let err = RawConfig::parse(&text).unwrap().resolve().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overrides_and_registers() {
        let text = "chain.n = 42\nchain.nn_overrides = \"1-2:0.3005,2-3:0.5311,40-41:0.5311,41-42:0.3005\"\n\
                    partition.n_s = 3\npartition.n_er = 5\nexcitation.k = 2\n";
        let c = RawConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(
            c.chain.geometry,
            Geometry::NearestNeighbor(ChainSpec::adjusted_end_pairs(42, 0.3005, 0.5311))
        );
        assert!(RawConfig::parse("chain.n = 5\nchain.nn_overrides = 1-3:0.5\npartition.n_s = 1\npartition.n_er = 1\nexcitation.k = 1")
            .unwrap()
            .resolve()
            .is_err());
        let reg = format!("{TABLE_1A}partition.s0 = 4\npartition.r0 = 7\n");
        let c = RawConfig::parse(&reg).unwrap().resolve().unwrap();
        assert_eq!(c.partition.s0(), Some(&[3usize][..]));
        assert_eq!(c.partition.r0(), Some(&[6usize][..]));
    }

    #[test]
    fn hash_ignores_order_and_comments() {
        let a = RawConfig::parse("chain.n = 10\nexcitation.k = 2").unwrap();
        let b = RawConfig::parse("# c\nexcitation.k=2\n\nchain.n =10").unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.set("output.path", "x.json").unwrap();
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn complex_numbers() {
        assert_eq!(parse_complex("0.6").unwrap(), C64::new(0.6, 0.0));
        assert_eq!(parse_complex("-0.8i").unwrap(), C64::new(0.0, -0.8));
        assert_eq!(parse_complex("0.3 - 0.1i").unwrap(), C64::new(0.3, -0.1));
        assert_eq!(parse_complex("1e-3+2e-2i").unwrap(), C64::new(1e-3, 2e-2));
        assert_eq!(parse_complex("i").unwrap(), C64::new(0.0, 1.0));
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn circuit_modes_need_layers() {
        let bad = format!("{TABLE_1A}solver.mode = circuit-preserving\n");
        assert!(RawConfig::parse(&bad).unwrap().resolve().is_err());
        let good = format!("{TABLE_1A}solver.mode = circuit-preserving\nsolver.q = 3\n");
        let c = RawConfig::parse(&good).unwrap().resolve().unwrap();
        assert_eq!(c.solver.mode, RestoreMode::CircuitPreserving { layers: 3 });
        assert_eq!(c.solver.options().restarts, 1000);
    }
}
