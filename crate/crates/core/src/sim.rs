//! Block simulation of the zero-error scheme on deterministic primitive channels.
//!
//! Each source encoder sends its symbol through a per-symbol map. The relay
//! inverts `Y3` over the source support and forwards, per symbol, the index
//! of the transmitted pair within the reachable part of `theta(yS)`. The
//! destination combines that index with its own `YS` observation.
//!
//! Randomness comes from ChaCha20 seeded by `seed_from_u64(seed)`; block `b`
//! draws from stream `b`, so results do not depend on the thread count.

use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::*;
use crate::prob::{Alphabet, ConditionalKernel, JointTable, PROB_TOL};
use crate::search::Exec;

/// Identifier of the pseudo-random generator and stream layout.
pub const RNG_ID: &str = "chacha20-stream-per-block";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimReport {
    pub blocks_run: u64,
    pub relay_errors: u64,
    pub destination_errors: u64,
    /// Relay-link bits spent per block.
    pub bits_per_block: u64,
    pub blocklength: u64,
    pub seed: u64,
}

impl SimReport {
    pub fn empirical_pe(&self) -> f64 {
        if self.blocks_run == 0 {
            0.0
        } else {
            self.destination_errors as f64 / self.blocks_run as f64
        }
    }
}

impl fmt::Display for SimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rng={RNG_ID}")?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "n={}", self.blocklength)?;
        writeln!(f, "blocks_run={}", self.blocks_run)?;
        writeln!(f, "relay_errors={}", self.relay_errors)?;
        writeln!(f, "destination_errors={}", self.destination_errors)?;
        writeln!(f, "bits_per_block={}", self.bits_per_block)?;
        writeln!(f, "empirical_pe={}", self.empirical_pe())
    }
}

fn det_map(k: &ConditionalKernel, s: usize) -> Result<usize> {
    k.row(&[s])
        .and_then(|row| row.iter().position(|&p| p == 1.0))
        .ok_or_else(|| {
            Error::NonDeterministic(format!("encoder for {} at input {s}", k.out_names()[0]))
        })
}

/// Precomputed encoding and decoding tables of the scheme.
#[derive(Debug, Clone)]
pub struct BlockScheme {
    /// Source pairs with positive mass and their sampling weights.
    support: Vec<(usize, usize)>,
    weights: Vec<f64>,
    enc1: Vec<usize>,
    enc2: Vec<usize>,
    /// For each `Y3` symbol, the support indices mapping to it.
    relay_inverse: Vec<Vec<usize>>,
    /// For each `YS` symbol, the reachable input pairs in lexicographic order.
    theta_reach: Vec<Vec<(usize, usize)>>,
    y3: Vec<Vec<usize>>,
    ys: Vec<Vec<usize>>,
    bits_per_symbol: u32,
}

impl BlockScheme {
    /// Builds the scheme for deterministic per-symbol encoders on a
    /// deterministic primitive channel.
    pub fn new(scenario: &MarcScenario, enc: &EncoderChain) -> Result<Self> {
        let ch = scenario
            .channel
            .as_psomarc()
            .ok_or_else(|| Error::Simulation("the scheme needs a primitive channel".into()))?;
        if !ch.is_deterministic() {
            return Err(Error::NonDeterministic(
                "channel maps must be deterministic".into(),
            ));
        }
        if enc.x3.is_some() || enc.v1.is_some() || enc.v2.is_some() {
            return Err(Error::Simulation(
                "the scheme uses per-symbol encoders only".into(),
            ));
        }
        if enc.x1.given_names() != [S1] || enc.x2.given_names() != [S2] {
            return Err(Error::Simulation(
                "encoders must be X1 | S1 and X2 | S2".into(),
            ));
        }
        let pair = scenario.source_pair();
        let (n1, n2) = (pair.shape()[0], pair.shape()[1]);
        let enc1 = (0..n1)
            .map(|s| det_map(&enc.x1, s))
            .collect::<Result<Vec<_>>>()?;
        let enc2 = (0..n2)
            .map(|s| det_map(&enc.x2, s))
            .collect::<Result<Vec<_>>>()?;
        let (nx1, nx2) = (ch.x1_alphabet().len(), ch.x2_alphabet().len());
        if enc1.iter().any(|&x| x >= nx1) || enc2.iter().any(|&x| x >= nx2) {
            return Err(Error::Simulation(
                "encoder alphabet does not match the channel".into(),
            ));
        }

        let mut support = Vec::new();
        let mut weights = Vec::new();
        for a in 0..n1 {
            for b in 0..n2 {
                let p = pair.get(&[a, b]);
                if p > PROB_TOL {
                    support.push((a, b));
                    weights.push(p);
                }
            }
        }
        let y3 = (0..nx1)
            .map(|a| (0..nx2).map(|b| ch.y3_of(a, b)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let ys = (0..nx1)
            .map(|a| (0..nx2).map(|b| ch.ys_of(a, b)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;

        let mut relay_inverse = vec![Vec::new(); ch.y3_map.out()[0].len()];
        let mut theta_reach: Vec<Vec<(usize, usize)>> = vec![Vec::new(); ch.ys_map.out()[0].len()];
        for (i, &(a, b)) in support.iter().enumerate() {
            let x = (enc1[a], enc2[b]);
            relay_inverse[y3[x.0][x.1]].push(i);
            let set = &mut theta_reach[ys[x.0][x.1]];
            if !set.contains(&x) {
                set.push(x);
            }
        }
        for set in &mut theta_reach {
            set.sort_unstable();
        }
        let widest = theta_reach.iter().map(Vec::len).max().unwrap_or(1).max(1);
        let bits_per_symbol = usize::BITS - (widest - 1).leading_zeros();
        if bits_per_symbol as f64 > ch.c3 + 1e-12 {
            return Err(Error::Simulation(format!(
                "resolving {widest} candidates needs {bits_per_symbol} bits per use, relay link carries {}",
                ch.c3
            )));
        }
        Ok(BlockScheme {
            support,
            weights,
            enc1,
            enc2,
            relay_inverse,
            theta_reach,
            y3,
            ys,
            bits_per_symbol,
        })
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    /// Reachable part of `theta(ys)`.
    pub fn theta_reachable(&self, ys: usize) -> &[(usize, usize)] {
        &self.theta_reach[ys]
    }

    /// Runs one block; returns `(relay_error, destination_error)`.
    fn run_block(
        &self,
        n: usize,
        seed: u64,
        block: u64,
        sampler: &WeightedIndex<f64>,
    ) -> Result<(bool, bool)> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let mut relay_err = false;
        let mut dest_err = false;
        for _ in 0..n {
            let i = sampler.sample(&mut rng);
            let (s1, s2) = *self
                .support
                .get(i)
                .ok_or_else(|| Error::Simulation("sampler left the source support".into()))?;
            let x = (self.enc1[s1], self.enc2[s2]);
            let y3 = self.y3[x.0][x.1];
            let ys = self.ys[x.0][x.1];

            // relay: unique source pair consistent with y3
            let cands = &self.relay_inverse[y3];
            let decoded = cands.first().map(|&j| self.support[j]);
            if cands.len() != 1 || decoded != Some((s1, s2)) {
                relay_err = true;
            }
            let Some((r1, r2)) = decoded else {
                dest_err = true;
                continue;
            };
            let xr = (self.enc1[r1], self.enc2[r2]);
            let bin = self.theta_reach[self.ys[xr.0][xr.1]]
                .iter()
                .position(|&p| p == xr)
                .unwrap_or(0);

            // destination: resolve theta(ys) with the bin, then invert the encoders
            let resolved = self.theta_reach[ys].get(bin).copied();
            let mut matches = self
                .support
                .iter()
                .filter(|&&(a, b)| Some((self.enc1[a], self.enc2[b])) == resolved);
            let est = matches.next();
            if matches.next().is_some() || est != Some(&(s1, s2)) {
                dest_err = true;
            }
        }
        Ok((relay_err, dest_err))
    }

    pub fn run(&self, n: usize, blocks: u64, seed: u64, exec: Exec) -> Result<SimReport> {
        if n == 0 || blocks == 0 {
            return Err(Error::Simulation(
                "blocklength and block count must be >= 1".into(),
            ));
        }
        let sampler = WeightedIndex::new(&self.weights)
            .map_err(|e| Error::Simulation(format!("source sampler: {e}")))?;
        let one = |b: u64| -> Result<(u64, u64)> {
            let (r, d) = self.run_block(n, seed, b, &sampler)?;
            Ok((r as u64, d as u64))
        };
        let add = |a: Result<(u64, u64)>, b: Result<(u64, u64)>| -> Result<(u64, u64)> {
            let (a, b) = (a?, b?);
            Ok((a.0 + b.0, a.1 + b.1))
        };
        let (relay_errors, destination_errors) = match exec {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..blocks)
                .into_par_iter()
                .map(one)
                .reduce(|| Ok((0, 0)), add)?,
            _ => (0..blocks).map(one).fold(Ok((0, 0)), add)?,
        };
        Ok(SimReport {
            blocks_run: blocks,
            relay_errors,
            destination_errors,
            bits_per_block: n as u64 * self.bits_per_symbol as u64,
            blocklength: n as u64,
            seed,
        })
    }
}

/// Runs the scheme with `x_i = s_i` on a deterministic primitive channel.
pub fn run_scheme(
    scenario: &MarcScenario,
    n: usize,
    blocks: u64,
    seed: u64,
    exec: Exec,
) -> Result<SimReport> {
    BlockScheme::new(scenario, &EncoderChain::identity(scenario))?.run(n, blocks, seed, exec)
}

/// The binary adder example with its three-point source.
pub fn run_table1_scheme(n: usize, blocks: u64, seed: u64) -> Result<SimReport> {
    let sc = MarcScenario::named(ChannelName::Table1, SourceName::Table2, None)?;
    run_scheme(&sc, n, blocks, seed, Exec::default())
}

/// I.i.d. draws from the joint induced by per-symbol encoders.
#[derive(Debug, Clone)]
pub struct Samples {
    pub axes: Vec<Alphabet>,
    pub rows: Vec<Vec<usize>>,
}

impl Samples {
    /// Empirical distribution of the draws.
    pub fn empirical(&self) -> Result<JointTable> {
        let shape: Vec<usize> = self.axes.iter().map(Alphabet::len).collect();
        let mut mass = vec![0.0; shape.iter().product()];
        for row in &self.rows {
            let flat = row.iter().zip(&shape).fold(0, |acc, (&i, &n)| acc * n + i);
            mass[flat] += 1.0;
        }
        let total = self.rows.len().max(1) as f64;
        mass.iter_mut().for_each(|m| *m /= total);
        JointTable::new(self.axes.clone(), mass)
    }
}

/// Samples `n` tuples of every variable from the induced joint.
pub fn sample_induced(
    scenario: &MarcScenario,
    enc: &EncoderChain,
    n: usize,
    seed: u64,
) -> Result<Samples> {
    let joint = induced_joint(scenario, enc, Factorization::RelayOnSources)?;
    let shape = joint.shape();
    let sampler = WeightedIndex::new(joint.mass())
        .map_err(|e| Error::Simulation(format!("joint sampler: {e}")))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let mut flat = sampler.sample(&mut rng);
            let mut idx = vec![0; shape.len()];
            for (k, &len) in shape.iter().enumerate().rev() {
                idx[k] = flat % len;
                flat /= len;
            }
            idx
        })
        .collect();
    Ok(Samples {
        axes: joint.axes().to_vec(),
        rows,
    })
}
