//! Depolarizing error-location model and seeded per-trial random streams.
//!
//! Every live qubit in every step is a memory location (`ε`, each Pauli
//! `ε/3`). Every one-qubit gate and every measurement is a gate location
//! (`γ`, each Pauli `γ/3`, applied after the gate or just before readout).
//! Every CNOT is a two-qubit location (`γ`, each of the 15 nontrivial Pauli
//! pairs `γ/15`).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Gate, Network, StepFault};
use crate::error::Error;
use crate::pauli::Pauli;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    /// Memory error probability per qubit per step.
    pub epsilon: f64,
    /// Intrinsic gate error probability.
    pub gamma: f64,
    /// `ε/γ`; infinite when gates are noiseless.
    pub ratio_c: f64,
}

fn check_probability(name: &str, p: f64) -> Result<(), Error> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidInput(format!("{name} = {p} outside [0,1]")));
    }
    Ok(())
}

impl NoiseParams {
    pub fn new(epsilon: f64, gamma: f64) -> Result<Self, Error> {
        check_probability("epsilon", epsilon)?;
        check_probability("gamma", gamma)?;
        let ratio_c = if gamma == 0.0 {
            f64::INFINITY
        } else {
            epsilon / gamma
        };
        Ok(NoiseParams {
            epsilon,
            gamma,
            ratio_c,
        })
    }

    /// `γ = ε / C`; `C = ∞` means noiseless gates.
    pub fn from_ratio(epsilon: f64, ratio_c: f64) -> Result<Self, Error> {
        check_probability("epsilon", epsilon)?;
        if ratio_c.is_nan() || ratio_c <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "ratio C = {ratio_c} must be positive or infinite"
            )));
        }
        let gamma = if ratio_c.is_infinite() {
            0.0
        } else {
            epsilon / ratio_c
        };
        check_probability("gamma", gamma)?;
        Ok(NoiseParams {
            epsilon,
            gamma,
            ratio_c,
        })
    }

    pub fn noiseless() -> Self {
        NoiseParams {
            epsilon: 0.0,
            gamma: 0.0,
            ratio_c: f64::INFINITY,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.epsilon == 0.0 && self.gamma == 0.0
    }
}

/// Random stream of one trial: a ChaCha8 generator keyed by the master seed,
/// with the trial index as its stream number.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
    master_seed: u64,
    trial_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(trial_index);
        RngStream {
            rng,
            master_seed,
            trial_index,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn trial_index(&self) -> u64 {
        self.trial_index
    }

    /// Uniform draw in the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn below(&mut self, n: u32) -> u32 {
        self.rng.gen_range(0..n)
    }
}

#[inline]
fn depolarize_one(u: f64, p: f64) -> Pauli {
    if u < p {
        Pauli::from_index(1 + ((u / p * 3.0) as u8).min(2))
    } else {
        Pauli::I
    }
}

/// Maps `k ∈ 0..15` to the `k+1`-th two-qubit Pauli pair in `(I,X,Y,Z)²` order.
pub fn pair_from_index(k: u8) -> (Pauli, Pauli) {
    let k = k.min(14) + 1;
    (Pauli::from_index(k / 4), Pauli::from_index(k % 4))
}

pub fn sample_memory(rng: &mut RngStream, epsilon: f64) -> Pauli {
    depolarize_one(rng.uniform(), epsilon)
}

pub fn sample_one_qubit_gate(rng: &mut RngStream, gamma: f64) -> Pauli {
    depolarize_one(rng.uniform(), gamma)
}

pub fn sample_two_qubit_gate(rng: &mut RngStream, gamma: f64) -> (Pauli, Pauli) {
    let u = rng.uniform();
    if u < gamma {
        pair_from_index((u / gamma * 15.0) as u8)
    } else {
        (Pauli::I, Pauli::I)
    }
}

/// Pauli applied to a measured qubit just before readout; X and Y flip the
/// recorded outcome.
pub fn sample_measurement(rng: &mut RngStream, gamma: f64) -> Pauli {
    depolarize_one(rng.uniform(), gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteKind {
    Memory,
    OneQubitGate,
    Measurement,
    TwoQubitGate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Site {
    pub kind: SiteKind,
    /// Which network of a composite table the site belongs to.
    pub stage: usize,
    pub step: usize,
    pub qubits: [usize; 2],
}

impl Site {
    /// All nontrivial faults possible at this site.
    pub fn faults(&self) -> Vec<Vec<StepFault>> {
        let one = |q: usize, p: Pauli, step: usize| StepFault {
            step,
            qubit: q,
            pauli: p,
        };
        match self.kind {
            SiteKind::TwoQubitGate => (0..15u8)
                .map(|k| {
                    let (a, b) = pair_from_index(k);
                    [(self.qubits[0], a), (self.qubits[1], b)]
                        .into_iter()
                        .filter(|(_, p)| !p.is_identity())
                        .map(|(q, p)| one(q, p, self.step))
                        .collect()
                })
                .collect(),
            _ => Pauli::NONTRIVIAL
                .iter()
                .map(|&p| vec![one(self.qubits[0], p, self.step)])
                .collect(),
        }
    }
}

/// How faults are drawn for a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Jump between faulty locations with geometric gaps.
    #[default]
    Geometric,
    /// One draw per location.
    PerLocation,
}

/// Fault locations of a network, split by probability class.
#[derive(Clone, Debug, Default)]
pub struct SiteTable {
    pub memory: Vec<Site>,
    pub gates: Vec<Site>,
}

impl SiteTable {
    pub fn of(net: &Network) -> SiteTable {
        let mut table = SiteTable::default();
        for (step, s) in net.steps.iter().enumerate() {
            for g in &s.gates {
                let site = match *g {
                    Gate::H(q) | Gate::Pauli(q, _) => Site {
                        kind: SiteKind::OneQubitGate,
                        stage: 0,
                        step,
                        qubits: [q, q],
                    },
                    Gate::Measure(q) => Site {
                        kind: SiteKind::Measurement,
                        stage: 0,
                        step,
                        qubits: [q, q],
                    },
                    Gate::Cnot { control, target } => Site {
                        kind: SiteKind::TwoQubitGate,
                        stage: 0,
                        step,
                        qubits: [control, target],
                    },
                };
                table.gates.push(site);
            }
            for q in (0..net.qubit_count).filter(|q| (s.live >> q) & 1 == 1) {
                table.memory.push(Site {
                    kind: SiteKind::Memory,
                    stage: 0,
                    step,
                    qubits: [q, q],
                });
            }
        }
        table
    }

    pub fn all(&self) -> impl Iterator<Item = &Site> {
        self.gates.iter().chain(&self.memory)
    }

    pub fn len(&self) -> usize {
        self.memory.len() + self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends `other` with every site relabelled to `stage`.
    pub fn push_stage(&mut self, other: &SiteTable, stage: usize) {
        let relabel = |s: &Site| Site { stage, ..*s };
        self.memory.extend(other.memory.iter().map(relabel));
        self.gates.extend(other.gates.iter().map(relabel));
    }

    /// Calls `hit(site, a, b)` for every faulty location of one pass; `b` is
    /// the Pauli on the second qubit of a CNOT and `I` elsewhere.
    pub fn sample_with(
        &self,
        noise: &NoiseParams,
        sampling: Sampling,
        rng: &mut RngStream,
        mut hit: impl FnMut(&Site, Pauli, Pauli),
    ) {
        match sampling {
            Sampling::Geometric => {
                geometric(&self.gates, noise.gamma, rng, &mut hit);
                geometric(&self.memory, noise.epsilon, rng, &mut hit);
            }
            Sampling::PerLocation => {
                for site in &self.gates {
                    let (a, b) = match site.kind {
                        SiteKind::TwoQubitGate => sample_two_qubit_gate(rng, noise.gamma),
                        SiteKind::Measurement => (sample_measurement(rng, noise.gamma), Pauli::I),
                        _ => (sample_one_qubit_gate(rng, noise.gamma), Pauli::I),
                    };
                    if !(a.is_identity() && b.is_identity()) {
                        hit(site, a, b);
                    }
                }
                for site in &self.memory {
                    let a = sample_memory(rng, noise.epsilon);
                    if !a.is_identity() {
                        hit(site, a, Pauli::I);
                    }
                }
            }
        }
    }

    /// Draws the faults of one pass through the network, sorted by step.
    pub fn sample(
        &self,
        noise: &NoiseParams,
        sampling: Sampling,
        rng: &mut RngStream,
        out: &mut Vec<StepFault>,
    ) {
        out.clear();
        self.sample_with(noise, sampling, rng, |site, a, b| {
            push_pair(site, (a, b), out)
        });
        if out.len() > 1 {
            out.sort_by_key(|f| f.step);
        }
    }
}

pub fn push_pair(site: &Site, (a, b): (Pauli, Pauli), out: &mut Vec<StepFault>) {
    if !a.is_identity() {
        out.push(StepFault {
            step: site.step,
            qubit: site.qubits[0],
            pauli: a,
        });
    }
    if !b.is_identity() {
        out.push(StepFault {
            step: site.step,
            qubit: site.qubits[1],
            pauli: b,
        });
    }
}

fn geometric(
    sites: &[Site],
    p: f64,
    rng: &mut RngStream,
    hit: &mut impl FnMut(&Site, Pauli, Pauli),
) {
    if p <= 0.0 || sites.is_empty() {
        return;
    }
    let log_miss = (1.0 - p).ln();
    let mut i = 0usize;
    loop {
        if p < 1.0 {
            let gap = rng.uniform().ln() / log_miss;
            if gap >= (sites.len() - i) as f64 {
                return;
            }
            i += gap as usize;
        }
        if i >= sites.len() {
            return;
        }
        let site = &sites[i];
        let (a, b) = match site.kind {
            SiteKind::TwoQubitGate => pair_from_index(rng.below(15) as u8),
            _ => (Pauli::from_index(1 + rng.below(3) as u8), Pauli::I),
        };
        hit(site, a, b);
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_ancilla_prep;
    use crate::circuit::AncillaKind;

    fn five_sigma(n: f64, p: f64) -> f64 {
        5.0 * (p * (1.0 - p) / n).sqrt()
    }

    #[test]
    fn params() {
        let p = NoiseParams::from_ratio(1e-3, 2.0).unwrap();
        assert!((p.gamma - 5e-4).abs() < 1e-15);
        let q = NoiseParams::from_ratio(1e-3, f64::INFINITY).unwrap();
        assert_eq!(q.gamma, 0.0);
        let r = NoiseParams::new(1e-3, 0.0).unwrap();
        assert!(r.ratio_c.is_infinite());
        let s = NoiseParams::new(1e-3, 1e-2).unwrap();
        assert!((s.gamma - s.epsilon / s.ratio_c).abs() <= 1e-12 * s.gamma);
        assert!(NoiseParams::new(1.5, 0.0).is_err());
        assert!(NoiseParams::from_ratio(1e-3, 0.0).is_err());
        assert!(NoiseParams::from_ratio(0.5, 0.3).is_err());
    }

    #[test]
    fn degenerate_probabilities() {
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            assert_eq!(sample_memory(&mut rng, 0.0), Pauli::I);
            assert_eq!(sample_one_qubit_gate(&mut rng, 0.0), Pauli::I);
            assert_eq!(sample_two_qubit_gate(&mut rng, 0.0), (Pauli::I, Pauli::I));
            assert_eq!(sample_measurement(&mut rng, 0.0), Pauli::I);
        }
        let mut counts = [0usize; 4];
        let n = 30_000;
        for _ in 0..n {
            counts[sample_memory(&mut rng, 1.0) as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        for c in &counts[1..] {
            let f = *c as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < five_sigma(n as f64, 1.0 / 3.0));
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..8)
            .map({
                let mut r = RngStream::new(42, 7);
                move |_| r.uniform()
            })
            .collect();
        let b: Vec<f64> = (0..8)
            .map({
                let mut r = RngStream::new(42, 7);
                move |_| r.uniform()
            })
            .collect();
        let c: Vec<f64> = (0..8)
            .map({
                let mut r = RngStream::new(42, 8);
                move |_| r.uniform()
            })
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|u| *u > 0.0 && *u < 1.0));
    }

    #[test]
    fn pair_table_covers_fifteen() {
        let mut seen = std::collections::HashSet::new();
        for k in 0..15 {
            let pair = pair_from_index(k);
            assert_ne!(pair, (Pauli::I, Pauli::I));
            seen.insert(pair);
        }
        assert_eq!(seen.len(), 15);
    }

    #[test]
    fn geometric_matches_per_location_rate() {
        // mean fault count per pass must agree between the two samplers
        let net = build_ancilla_prep(AncillaKind::BitSyndrome);
        let table = SiteTable::of(&net);
        let noise = NoiseParams::new(0.02, 0.05).unwrap();
        let n = 40_000;
        let mut out = Vec::new();
        let mut totals = [0usize; 2];
        for (k, sampling) in [Sampling::Geometric, Sampling::PerLocation]
            .into_iter()
            .enumerate()
        {
            for i in 0..n {
                let mut rng = RngStream::new(9, i);
                table.sample(&noise, sampling, &mut rng, &mut out);
                totals[k] += out.len();
            }
        }
        let mean = |t: usize| t as f64 / n as f64;
        let sd = (mean(totals[1]) / n as f64).sqrt();
        assert!((mean(totals[0]) - mean(totals[1])).abs() < 6.0 * sd);
    }

    #[test]
    fn sampled_faults_sorted_by_step() {
        let net = build_ancilla_prep(AncillaKind::PhaseSyndrome);
        let table = SiteTable::of(&net);
        let noise = NoiseParams::new(0.3, 0.3).unwrap();
        let mut out = Vec::new();
        for i in 0..200 {
            let mut rng = RngStream::new(3, i);
            table.sample(&noise, Sampling::Geometric, &mut rng, &mut out);
            assert!(out.windows(2).all(|w| w[0].step <= w[1].step));
        }
        let mut rng = RngStream::new(3, 0);
        table.sample(
            &NoiseParams::new(1.0, 1.0).unwrap(),
            Sampling::Geometric,
            &mut rng,
            &mut out,
        );
        let two_qubit = table
            .gates
            .iter()
            .filter(|s| s.kind == SiteKind::TwoQubitGate)
            .count();
        assert!(out.len() >= table.len() - two_qubit);
    }
}
