//! Excitation-number sectors of a qubit register.
//!
//! A basis state is an occupation bitmask: bit `i` set means site `i` (0-based)
//! is excited. Inside a sector the states are ordered lexicographically by the
//! sorted tuple of excited positions, so for `n = 3, k = 2` the order is
//! `{0,1} < {0,2} < {1,2}`.

use itertools::Itertools;

use crate::error::{PstError, Result};

/// Largest register for which the full `2^n` basis is materialized.
pub const FULL_BASIS_MAX: usize = 14;

/// Exact binomial coefficient. Returns 0 when `k > n`.
pub fn binom(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Bitmask with the given sites set.
pub fn mask_of(sites: &[usize]) -> u64 {
    sites.iter().fold(0u64, |m, &s| m | (1u64 << s))
}

/// Sorted list of set bits.
pub fn sites_of(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Ordered k-excitation basis of an n-qubit register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    n: usize,
    k: usize,
    states: Vec<u64>,
}

impl SectorBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, ordinal: usize) -> u64 {
        self.states[ordinal]
    }

    /// Ordinal of `mask` inside the sector, computed by lexicographic ranking.
    pub fn index_of(&self, mask: u64) -> Option<usize> {
        if mask.count_ones() as usize != self.k || (self.n < 64 && mask >> self.n != 0) {
            return None;
        }
        let mut rank = 0u64;
        let mut prev: isize = -1;
        for (i, pos) in sites_of(mask).into_iter().enumerate() {
            let remaining = self.k - i - 1;
            for j in (prev + 1) as usize..pos {
                rank += binom(self.n - 1 - j, remaining);
            }
            prev = pos as isize;
        }
        Some(rank as usize)
    }
}

/// Enumerates the `k`-excitation states of an `n`-qubit register.
pub fn k_states(n: usize, k: usize) -> Result<SectorBasis> {
    if k > n {
        return Err(PstError::ExcitationOutOfRange { n, k });
    }
    if n > 64 {
        return Err(PstError::SizeGuard {
            what: "register size",
            value: n,
            limit: 64,
        });
    }
    let states = (0..n).combinations(k).map(|c| mask_of(&c)).collect();
    Ok(SectorBasis { n, k, states })
}

/// Number of states preceding sector `k` in the excitation-ordered full basis.
pub fn sector_offset(n: usize, k: usize) -> usize {
    (0..k).map(|m| binom(n, m) as usize).sum()
}

/// All `2^n` states ordered by excitation number, then lexicographically.
pub fn full_basis(n: usize) -> Result<Vec<u64>> {
    if n > FULL_BASIS_MAX {
        return Err(PstError::SizeGuard {
            what: "full basis register size",
            value: n,
            limit: FULL_BASIS_MAX,
        });
    }
    let mut out = Vec::with_capacity(1 << n);
    for k in 0..=n {
        out.extend_from_slice(k_states(n, k)?.states());
    }
    Ok(out)
}

/// Position of every bitmask inside [`full_basis`]: `inverse[mask] = ordinal`.
pub fn full_basis_inverse(n: usize) -> Result<Vec<usize>> {
    let basis = full_basis(n)?;
    let mut inv = vec![0; basis.len()];
    for (i, &m) in basis.iter().enumerate() {
        inv[m as usize] = i;
    }
    Ok(inv)
}

/// Placement of a subsystem's k-sector inside the chain's k-sector, with every
/// site outside the subsystem in the ground state.
#[derive(Debug, Clone)]
pub struct EmbeddingMap {
    sites: Vec<usize>,
    chain_n: usize,
    k: usize,
    local: SectorBasis,
    chain_masks: Vec<u64>,
    chain_ordinals: Vec<usize>,
}

impl EmbeddingMap {
    /// Subsystem sites (0-based chain positions, ascending).
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn chain_n(&self) -> usize {
        self.chain_n
    }

    pub fn local_basis(&self) -> &SectorBasis {
        &self.local
    }

    pub fn len(&self) -> usize {
        self.chain_ordinals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain_ordinals.is_empty()
    }

    /// Chain-sector ordinal of local state `j`.
    pub fn chain_ordinal(&self, j: usize) -> usize {
        self.chain_ordinals[j]
    }

    pub fn chain_ordinals(&self) -> &[usize] {
        &self.chain_ordinals
    }

    /// Chain bitmask of local state `j`.
    pub fn chain_mask(&self, j: usize) -> u64 {
        self.chain_masks[j]
    }

    pub fn chain_masks(&self) -> &[u64] {
        &self.chain_masks
    }
}

/// Lifts a register-local bitmask onto chain positions.
pub fn lift_mask(local: u64, sites: &[usize]) -> u64 {
    sites
        .iter()
        .enumerate()
        .filter(|(t, _)| local >> t & 1 == 1)
        .fold(0u64, |m, (_, &s)| m | (1u64 << s))
}

/// Restricts a chain bitmask onto a register's local bit positions.
pub fn restrict_mask(chain: u64, sites: &[usize]) -> u64 {
    sites
        .iter()
        .enumerate()
        .filter(|(_, &s)| chain >> s & 1 == 1)
        .fold(0u64, |m, (t, _)| m | (1u64 << t))
}

/// Maps each k-state of the subsystem on `sub_sites` (0-based) into the chain k-sector.
pub fn embed_subsystem(sub_sites: &[usize], chain_n: usize, k: usize) -> Result<EmbeddingMap> {
    for &s in sub_sites {
        if s >= chain_n {
            return Err(PstError::SiteOutOfRange {
                site: s + 1,
                n: chain_n,
            });
        }
    }
    let mut sites = sub_sites.to_vec();
    sites.sort_unstable();
    sites.dedup();
    if sites.len() != sub_sites.len() {
        return Err(PstError::InvalidArgument("duplicate subsystem site".into()));
    }
    let local = k_states(sites.len(), k)?;
    let chain = k_states(chain_n, k)?;
    let chain_masks: Vec<u64> = local
        .states()
        .iter()
        .map(|&m| lift_mask(m, &sites))
        .collect();
    let chain_ordinals = chain_masks
        .iter()
        .map(|&m| chain.index_of(m).expect("lifted mask stays in sector"))
        .collect();
    Ok(EmbeddingMap {
        sites,
        chain_n,
        k,
        local,
        chain_masks,
        chain_ordinals,
    })
}
