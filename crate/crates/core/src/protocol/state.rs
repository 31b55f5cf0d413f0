//! State vectors with named ancilla qubits and ancilla measurement.

use rand::Rng;

use crate::error::{PstError, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ancilla {
    /// Measurement flag.
    B,
    /// Marks k-excitation extended-receiver components.
    D,
}

impl Ancilla {
    pub fn name(&self) -> &'static str {
        match self {
            Ancilla::B => "B",
            Ancilla::D => "D",
        }
    }
}

/// What the base (non-ancilla) part of the index enumerates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaseSpace {
    /// Ordinals of the chain's k-excitation sector.
    Sector { n: usize, k: usize },
    /// All `2^n` chain bitmasks.
    Full { n: usize },
}

impl BaseSpace {
    pub fn dim(&self) -> usize {
        match self {
            BaseSpace::Sector { n, k } => crate::basis::binom(*n, *k) as usize,
            BaseSpace::Full { n } => 1usize << n,
        }
    }
}

/// Amplitudes indexed by `base + base_dim * ancilla_bits`, where ancilla `a`
/// is bit `a` of the high part.
#[derive(Debug, Clone)]
pub struct PureState {
    pub amplitudes: Vec<C64>,
    pub base: BaseSpace,
    pub ancillas: Vec<Ancilla>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, base: BaseSpace, ancillas: Vec<Ancilla>) -> Result<Self> {
        let expected = base.dim() << ancillas.len();
        if amplitudes.len() != expected {
            return Err(PstError::DimensionMismatch {
                expected,
                got: amplitudes.len(),
                context: "state length vs basis descriptor",
            });
        }
        Ok(PureState {
            amplitudes,
            base,
            ancillas,
        })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Bit of ancilla `a` in the full index.
    pub fn ancilla_bit(&self, a: Ancilla) -> Result<usize> {
        let pos = self
            .ancillas
            .iter()
            .position(|&x| x == a)
            .ok_or_else(|| PstError::UnknownAncilla(a.name().into()))?;
        Ok(self.base.dim() << pos)
    }

    /// Appends a fresh ancilla in `|0>`.
    pub fn adjoin(mut self, a: Ancilla) -> Self {
        let len = self.amplitudes.len();
        self.amplitudes.resize(2 * len, C64::new(0.0, 0.0));
        self.ancillas.push(a);
        self
    }
}

/// Probability of `outcome` on ancilla `a` and the renormalized post-state
/// (`None` when the probability vanishes).
pub fn measure_ancilla(
    state: &PureState,
    a: Ancilla,
    outcome: bool,
) -> Result<(f64, Option<PureState>)> {
    let stride = state.ancilla_bit(a)?;
    // strides are not powers of two for sector bases, so test via division
    let bit_of = |i: usize| (i / stride) % 2 == 1;
    let mut post: Vec<C64> = state.amplitudes.clone();
    let mut p = 0.0;
    for (i, z) in post.iter_mut().enumerate() {
        if bit_of(i) == outcome {
            p += z.norm_sqr();
        } else {
            *z = C64::new(0.0, 0.0);
        }
    }
    if p <= 0.0 {
        return Ok((0.0, None));
    }
    let s = p.sqrt();
    post.iter_mut().for_each(|z| *z /= s);
    Ok((
        p,
        Some(PureState {
            amplitudes: post,
            base: state.base.clone(),
            ancillas: state.ancillas.clone(),
        }),
    ))
}

/// Samples a measurement outcome from seeded randomness.
pub fn measure_ancilla_sampled<R: Rng>(
    state: &PureState,
    a: Ancilla,
    rng: &mut R,
) -> Result<(bool, PureState)> {
    let (p1, post1) = measure_ancilla(state, a, true)?;
    let outcome = rng.random::<f64>() < p1;
    let post = if outcome {
        post1
    } else {
        measure_ancilla(state, a, false)?.1
    };
    Ok((
        outcome,
        post.expect("sampled outcome has positive probability"),
    ))
}
