//! Monte Carlo experiment driver.
//!
//! A trial is a pure function of `(master_seed, trial_index)`: each index owns
//! its own random stream, so aggregated counts do not depend on how trials are
//! spread over workers.

use crate::analysis::binomial_stderr;
use crate::circuit::{
    build_encoder, build_recovery, AncillaKind, Gate, Network, RecoverySchedule, Step, StepFault,
    SyndromeNetwork, VERIFY_QUBIT,
};
use crate::codebook::{
    self, classify_pair, ideal_recovery, ErrorVector, ResidualClass, SectorClass, BLOCK_LEN,
};
use crate::error::Error;
use crate::noise::{push_pair, NoiseParams, RngStream, Sampling, Site, SiteTable};
use crate::pauli::{Pauli, PauliFrame};

pub use crate::analysis::naked_fidelity;

/// Resynthesis attempts allowed per ancilla before a trial is aborted.
pub const ANCILLA_ATTEMPT_CAP: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    MemoryT20,
    Stabilize,
    Ec1,
    ZGate,
    Fig5,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::MemoryT20,
        Mode::Stabilize,
        Mode::Ec1,
        Mode::ZGate,
        Mode::Fig5,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::MemoryT20 => "memory_t20",
            Mode::Stabilize => "stabilize",
            Mode::Ec1 => "ec1",
            Mode::ZGate => "zgate",
            Mode::Fig5 => "fig5",
        }
    }

    pub fn parse(s: &str) -> Result<Mode, Error> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub noise: NoiseParams,
    pub schedule: RecoverySchedule,
    pub trials: u64,
    pub master_seed: u64,
    pub encoder_noisy: bool,
    /// Number of recoveries in stabilize mode.
    pub t_max: usize,
    pub sampling: Sampling,
    /// Worker threads: 0 uses every core, 1 takes the sequential path.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, noise: NoiseParams) -> Self {
        ExperimentConfig {
            mode,
            noise,
            schedule: RecoverySchedule::default(),
            trials: 10_000,
            master_seed: 1,
            encoder_noisy: mode == Mode::Fig5,
            t_max: 30,
            sampling: Sampling::Geometric,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be at least 1".into()));
        }
        self.schedule.validate()?;
        match self.mode {
            Mode::MemoryT20 if self.encoder_noisy => Err(Error::InvalidInput(
                "memory_t20 starts from an error-free encoded block".into(),
            )),
            Mode::Fig5 if !self.encoder_noisy => {
                Err(Error::InvalidInput("fig5 uses a noisy encoder".into()))
            }
            Mode::Stabilize if self.t_max == 0 => {
                Err(Error::InvalidInput("t_max must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Data-exposure steps before the block is classified (single-block modes).
    pub fn t_steps(&self) -> usize {
        let rec = self.schedule.recovery_steps();
        match self.mode {
            Mode::MemoryT20 | Mode::Fig5 => self.schedule.channel_prefix_steps + rec,
            Mode::Ec1 => rec,
            Mode::ZGate => 2 + rec,
            Mode::Stabilize => self.schedule.time_after(self.t_max),
        }
    }

    fn warn_if_undersampled(&self) {
        let inv = |p: f64| if p > 0.0 { 1.0 / p } else { 0.0 };
        let need = 10.0 * inv(self.noise.epsilon).max(inv(self.noise.gamma));
        if (self.trials as f64) < need {
            log::warn!(
                "{} trials is below 10·max(1/ε, 1/γ) = {need:.0}; estimates will be noisy",
                self.trials
            );
        }
    }
}

/// Residual-class counts of a batch of trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrialStats {
    pub trials: u64,
    /// Joint class of the raw residual, indexed by [`ResidualClass::index`].
    pub raw: [u64; 16],
    /// Joint class after one ideal recovery (only Trivial/Logical occur).
    pub ideal: [u64; 16],
    /// Trials whose raw residual has effective weight 1 in either sector.
    pub ec1: u64,
    /// Ancilla preparations rejected by verification.
    pub rejections: u64,
}

fn idx(x: SectorClass, z: SectorClass) -> usize {
    ResidualClass {
        x_class: x,
        z_class: z,
    }
    .index()
}

impl TrialStats {
    pub fn record(&mut self, x: ErrorVector, z: ErrorVector, rejections: u32) {
        let raw = classify_pair(x, z);
        self.trials += 1;
        self.raw[raw.index()] += 1;
        self.ideal[ideal_recovery(x, z).index()] += 1;
        if raw.x_class == SectorClass::CorrectableW1 || raw.z_class == SectorClass::CorrectableW1 {
            self.ec1 += 1;
        }
        self.rejections += rejections as u64;
    }

    pub fn merge(mut self, o: TrialStats) -> TrialStats {
        self.trials += o.trials;
        for i in 0..16 {
            self.raw[i] += o.raw[i];
            self.ideal[i] += o.ideal[i];
        }
        self.ec1 += o.ec1;
        self.rejections += o.rejections;
        self
    }

    fn frac(&self, k: u64) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            k as f64 / self.trials as f64
        }
    }

    pub fn raw_count(&self, x: SectorClass, z: SectorClass) -> u64 {
        self.raw[idx(x, z)]
    }

    pub fn eta0(&self) -> f64 {
        self.frac(self.raw_count(SectorClass::Trivial, SectorClass::Trivial))
    }

    /// Basis interchange (logical X).
    pub fn eta3_b(&self) -> f64 {
        self.frac(self.raw_count(SectorClass::Logical, SectorClass::Trivial))
    }

    /// Relative phase flip (logical Z).
    pub fn eta3_p(&self) -> f64 {
        self.frac(self.raw_count(SectorClass::Trivial, SectorClass::Logical))
    }

    pub fn eta_y(&self) -> f64 {
        self.frac(self.raw_count(SectorClass::Logical, SectorClass::Logical))
    }

    pub fn delta_eta3(&self) -> f64 {
        self.eta3_b() - self.eta3_p()
    }

    /// Raw residuals a further syndrome check would still see.
    pub fn p_detectable(&self) -> f64 {
        1.0 - self.eta0() - self.eta3_b() - self.eta3_p() - self.eta_y()
    }

    fn strict_failures(&self) -> u64 {
        self.trials - self.ideal[ResidualClass::TRIVIAL.index()]
    }

    fn a1_failures(&self) -> u64 {
        self.ideal[idx(SectorClass::Logical, SectorClass::Trivial)]
            + self.ideal[idx(SectorClass::Logical, SectorClass::Logical)]
    }

    /// Any logical operator left after ideal recovery.
    pub fn p_e_strict(&self) -> f64 {
        self.frac(self.strict_failures())
    }

    pub fn p_e_strict_stderr(&self) -> f64 {
        binomial_stderr(self.strict_failures(), self.trials)
    }

    /// Failures that change `|0_L⟩`: logical X or Y after ideal recovery.
    pub fn p_fail_a1(&self) -> f64 {
        self.frac(self.a1_failures())
    }

    pub fn p_fail_a1_stderr(&self) -> f64 {
        binomial_stderr(self.a1_failures(), self.trials)
    }

    pub fn f_a1(&self) -> f64 {
        self.eta0() + self.eta3_p()
    }

    pub fn p_ec1(&self) -> f64 {
        self.frac(self.ec1)
    }

    pub fn p_ec1_stderr(&self) -> f64 {
        binomial_stderr(self.ec1, self.trials)
    }

    /// Fidelity for input amplitude `a` from the class rates.
    pub fn fidelity(&self, a: f64) -> f64 {
        let a2 = a * a;
        self.eta0() + self.eta3_p() + 4.0 * a2 * (1.0 - a2) * self.delta_eta3()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPoint {
    pub t: usize,
    pub fidelity: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelitySeries {
    pub trials: u64,
    pub points: Vec<SeriesPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig5Table {
    pub stats: TrialStats,
    /// `(a, F(a))` pairs.
    pub rows: Vec<(f64, f64)>,
}

fn idle_network(steps: usize) -> Network {
    let live = (1u128 << BLOCK_LEN) - 1;
    Network {
        qubit_count: BLOCK_LEN,
        steps: vec![
            Step {
                gates: Vec::new(),
                live
            };
            steps
        ],
        data_qubits: (0..BLOCK_LEN).collect(),
    }
}

/// One idle step followed by a transversal Z step.
pub fn zgate_prefix() -> Network {
    let mut net = idle_network(2);
    net.steps[1].gates = (0..BLOCK_LEN).map(|q| Gate::Pauli(q, Pauli::Z)).collect();
    net
}

struct Compiled {
    net: Network,
    table: SiteTable,
}

impl Compiled {
    fn new(net: Network) -> Compiled {
        let table = SiteTable::of(&net);
        Compiled { net, table }
    }
}

/// Per-worker scratch buffers.
pub struct Scratch {
    buckets: Vec<Vec<StepFault>>,
    faults: Vec<StepFault>,
}

/// Networks and fault tables compiled once per experiment.
pub struct Simulator {
    recovery: SyndromeNetwork,
    /// Stages `0..n` are the ancilla preparations, stage `n` the interaction.
    block: SiteTable,
    phase_prep: SiteTable,
    bit_prep: SiteTable,
    encoder: Compiled,
    prefix: Compiled,
    gap: Compiled,
    zgate: Compiled,
    noise: NoiseParams,
    sampling: Sampling,
    ancilla_mask: u128,
}

impl Simulator {
    pub fn new(config: &ExperimentConfig) -> Result<Simulator, Error> {
        config.validate()?;
        Simulator::with_network(
            build_recovery(config.schedule)?,
            config.noise,
            config.sampling,
        )
    }

    /// Uses a caller-built (possibly altered) recovery network.
    pub fn with_network(
        recovery: SyndromeNetwork,
        noise: NoiseParams,
        sampling: Sampling,
    ) -> Result<Simulator, Error> {
        recovery.interaction.validate()?;
        recovery.phase_prep.validate()?;
        recovery.bit_prep.validate()?;
        let phase_prep = SiteTable::of(&recovery.phase_prep);
        let bit_prep = SiteTable::of(&recovery.bit_prep);
        let mut block = SiteTable::default();
        for (k, slot) in recovery.ancillas.iter().enumerate() {
            let t = match slot.kind {
                AncillaKind::PhaseSyndrome => &phase_prep,
                AncillaKind::BitSyndrome => &bit_prep,
            };
            block.push_stage(t, k);
        }
        block.push_stage(
            &SiteTable::of(&recovery.interaction),
            recovery.ancillas.len(),
        );
        let schedule = recovery.schedule;
        Ok(Simulator {
            ancilla_mask: recovery.ancilla_mask(),
            block,
            phase_prep,
            bit_prep,
            encoder: Compiled::new(build_encoder()),
            prefix: Compiled::new(idle_network(schedule.channel_prefix_steps)),
            gap: Compiled::new(idle_network(schedule.inter_recovery_gap)),
            zgate: Compiled::new(zgate_prefix()),
            recovery,
            noise,
            sampling,
        })
    }

    pub fn recovery(&self) -> &SyndromeNetwork {
        &self.recovery
    }

    /// Fault locations of one recovery block.
    pub fn block_sites(&self) -> impl Iterator<Item = &Site> {
        self.block.all()
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            buckets: vec![Vec::new(); self.recovery.ancillas.len() + 1],
            faults: Vec::new(),
        }
    }

    fn frame(&self) -> PauliFrame {
        PauliFrame::new(self.recovery.interaction.qubit_count).expect("recovery fits a frame")
    }

    fn run_noisy(
        &self,
        c: &Compiled,
        frame: &mut PauliFrame,
        rng: &mut RngStream,
        sc: &mut Scratch,
    ) {
        c.table
            .sample(&self.noise, self.sampling, rng, &mut sc.faults);
        c.net.execute(frame, &sc.faults);
    }

    /// One noisy recovery; returns the number of rejected preparations.
    fn recover(
        &self,
        frame: &mut PauliFrame,
        rng: &mut RngStream,
        sc: &mut Scratch,
    ) -> Result<u32, Error> {
        for b in &mut sc.buckets {
            b.clear();
        }
        let buckets = &mut sc.buckets;
        self.block
            .sample_with(&self.noise, self.sampling, rng, |site, a, b| {
                push_pair(site, (a, b), &mut buckets[site.stage])
            });
        let trial = rng.trial_index();
        self.run_block(frame, &mut sc.buckets, Some(rng), trial)
    }

    /// Runs the recovery with preset faults per stage. Rejected preparations
    /// are redrawn from `rng`, or rerun noiselessly when there is none.
    fn run_block(
        &self,
        frame: &mut PauliFrame,
        buckets: &mut [Vec<StepFault>],
        mut rng: Option<&mut RngStream>,
        trial: u64,
    ) -> Result<u32, Error> {
        let mut rejections = 0;
        let n = self.recovery.ancillas.len();
        for (k, slot) in self.recovery.ancillas.iter().enumerate() {
            let faults = &mut buckets[k];
            if faults.is_empty() {
                continue;
            }
            faults.sort_by_key(|f| f.step);
            let (prep, table) = match slot.kind {
                AncillaKind::PhaseSyndrome => (&self.recovery.phase_prep, &self.phase_prep),
                AncillaKind::BitSyndrome => (&self.recovery.bit_prep, &self.bit_prep),
            };
            let mut attempts = 1;
            loop {
                let mut local = PauliFrame::new(prep.qubit_count)?;
                let flips = prep.execute(&mut local, faults);
                if (flips >> VERIFY_QUBIT) & 1 == 0 {
                    for (i, &q) in slot.qubits.iter().enumerate() {
                        frame.pauli_unchecked(q, local.get(i));
                    }
                    break;
                }
                rejections += 1;
                attempts += 1;
                if attempts > ANCILLA_ATTEMPT_CAP {
                    return Err(Error::AncillaRejectionCap {
                        attempts: ANCILLA_ATTEMPT_CAP,
                        trial,
                    });
                }
                match rng.as_deref_mut() {
                    Some(r) => table.sample(&self.noise, self.sampling, r, faults),
                    None => faults.clear(),
                }
                if faults.is_empty() {
                    break;
                }
            }
        }
        let faults = &mut buckets[n];
        faults.sort_by_key(|f| f.step);
        let flips = self.recovery.interaction.execute(frame, faults);
        let (cx, cz) = self.recovery.correction(flips);
        frame.xor_block(0, cx, cz);
        frame.clear(self.ancilla_mask);
        Ok(rejections)
    }

    /// One trial of a single-block mode; returns the data residual.
    pub fn single_block_trial(
        &self,
        config: &ExperimentConfig,
        trial_index: u64,
        sc: &mut Scratch,
    ) -> Result<(ErrorVector, ErrorVector, u32), Error> {
        let mut rng = RngStream::new(config.master_seed, trial_index);
        let mut frame = self.frame();
        if config.encoder_noisy {
            self.run_noisy(&self.encoder, &mut frame, &mut rng, sc);
        }
        match config.mode {
            Mode::MemoryT20 | Mode::Fig5 => self.run_noisy(&self.prefix, &mut frame, &mut rng, sc),
            Mode::ZGate => self.run_noisy(&self.zgate, &mut frame, &mut rng, sc),
            Mode::Ec1 => {}
            Mode::Stabilize => {
                return Err(Error::InvalidInput(
                    "stabilize runs a series of blocks".into(),
                ))
            }
        }
        let rejections = self.recover(&mut frame, &mut rng, sc)?;
        let (x, z) = frame.block(0);
        Ok((x, z, rejections))
    }

    /// Repeated recoveries of one trial; `hit(k)` is called for each
    /// recovery `k` (0-based) after which the block still holds `|0_L⟩`.
    fn stabilize_trial(
        &self,
        config: &ExperimentConfig,
        trial_index: u64,
        sc: &mut Scratch,
        mut hit: impl FnMut(usize),
    ) -> Result<(), Error> {
        let mut rng = RngStream::new(config.master_seed, trial_index);
        let mut frame = self.frame();
        if config.encoder_noisy {
            self.run_noisy(&self.encoder, &mut frame, &mut rng, sc);
        }
        for k in 0..config.t_max {
            let channel = if k == 0 { &self.prefix } else { &self.gap };
            self.run_noisy(channel, &mut frame, &mut rng, sc);
            self.recover(&mut frame, &mut rng, sc)?;
            let (x, z) = frame.block(0);
            if codebook::is_in_cperp(x) && codebook::is_in_c(z) {
                hit(k);
            }
        }
        Ok(())
    }

    /// Data residual after one noiseless recovery with `faults` placed in
    /// block stage `stage` (see [`Site::stage`]).
    pub fn block_with_faults(
        &self,
        stage: usize,
        faults: &[StepFault],
    ) -> Result<(ErrorVector, ErrorVector), Error> {
        let mut sc = self.scratch();
        sc.buckets[stage].extend_from_slice(faults);
        let mut frame = self.frame();
        self.run_block(&mut frame, &mut sc.buckets, None, 0)?;
        Ok(frame.block(0))
    }

    /// Data residual after a noiseless recovery of a block carrying `x`, `z`.
    pub fn recover_noiseless(
        &self,
        x: ErrorVector,
        z: ErrorVector,
    ) -> Result<(ErrorVector, ErrorVector), Error> {
        let mut sc = self.scratch();
        let mut frame = self.frame();
        frame.xor_block(0, x, z);
        self.run_block(&mut frame, &mut sc.buckets, None, 0)?;
        Ok(frame.block(0))
    }

    /// Folds `step` over trial indices `0..n`, on rayon workers unless
    /// `threads == 1` (or the `parallel` feature is off).
    pub fn aggregate<A, I, S, M>(
        &self,
        threads: usize,
        n: u64,
        identity: I,
        step: S,
        merge: M,
    ) -> Result<A, Error>
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        S: Fn(&mut A, &mut Scratch, u64) -> Result<(), Error> + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if threads != 1 {
            use rayon::prelude::*;
            let run = || {
                (0..n)
                    .into_par_iter()
                    .try_fold(
                        || (identity(), self.scratch()),
                        |(mut acc, mut sc), i| {
                            step(&mut acc, &mut sc, i)?;
                            Ok::<_, Error>((acc, sc))
                        },
                    )
                    .map(|r| r.map(|(acc, _)| acc))
                    .try_reduce(&identity, |a, b| Ok(merge(a, b)))
            };
            if threads == 0 {
                return run();
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            return pool.install(run);
        }
        let _ = (threads, &merge);
        let mut acc = identity();
        let mut sc = self.scratch();
        for i in 0..n {
            step(&mut acc, &mut sc, i)?;
        }
        Ok(acc)
    }

    fn batch(&self, config: &ExperimentConfig) -> Result<TrialStats, Error> {
        self.aggregate(
            config.threads,
            config.trials,
            TrialStats::default,
            |acc, sc, i| {
                let (x, z, rej) = self.single_block_trial(config, i, sc)?;
                acc.record(x, z, rej);
                Ok(())
            },
            TrialStats::merge,
        )
    }
}

fn expect_mode(config: &ExperimentConfig, mode: Mode) -> Result<(), Error> {
    if config.mode != mode {
        return Err(Error::InvalidInput(format!(
            "expected mode {}, got {}",
            mode.name(),
            config.mode.name()
        )));
    }
    Ok(())
}

fn run_batch(config: &ExperimentConfig, mode: Mode) -> Result<TrialStats, Error> {
    expect_mode(config, mode)?;
    config.warn_if_undersampled();
    Simulator::new(config)?.batch(config)
}

/// Joint raw residual class of one trial.
pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> Result<ResidualClass, Error> {
    let sim = Simulator::new(config)?;
    let (x, z, _) = sim.single_block_trial(config, trial_index, &mut sim.scratch())?;
    Ok(classify_pair(x, z))
}

pub fn run_memory_experiment(config: &ExperimentConfig) -> Result<TrialStats, Error> {
    run_batch(config, Mode::MemoryT20)
}

pub fn run_ec1_experiment(config: &ExperimentConfig) -> Result<TrialStats, Error> {
    run_batch(config, Mode::Ec1)
}

pub fn run_zgate_experiment(config: &ExperimentConfig) -> Result<TrialStats, Error> {
    run_batch(config, Mode::ZGate)
}

/// Class rates from noisy-encoder trials, then `F(a)` over `a_grid`.
pub fn run_fig5_experiment(config: &ExperimentConfig, a_grid: &[f64]) -> Result<Fig5Table, Error> {
    if let Some(a) = a_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::InvalidInput(format!("amplitude {a} outside [0,1]")));
    }
    let stats = run_batch(config, Mode::Fig5)?;
    Ok(Fig5Table {
        stats,
        rows: a_grid.iter().map(|&a| (a, stats.fidelity(a))).collect(),
    })
}

pub fn run_stabilization_experiment(config: &ExperimentConfig) -> Result<FidelitySeries, Error> {
    expect_mode(config, Mode::Stabilize)?;
    config.warn_if_undersampled();
    let sim = Simulator::new(config)?;
    let t_max = config.t_max;
    let counts = sim.aggregate(
        config.threads,
        config.trials,
        || vec![0u64; t_max],
        |acc, sc, i| sim.stabilize_trial(config, i, sc, |k| acc[k] += 1),
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )?;
    let n = config.trials;
    Ok(FidelitySeries {
        trials: n,
        points: counts
            .iter()
            .enumerate()
            .map(|(k, &c)| SeriesPoint {
                t: config.schedule.time_after(k + 1),
                fidelity: c as f64 / n as f64,
                stderr: binomial_stderr(c, n),
            })
            .collect(),
    })
}

/// A single injected fault that left a logical error behind.
#[derive(Clone, Debug, PartialEq)]
pub struct FaultFailure {
    pub site: Site,
    pub faults: Vec<StepFault>,
    pub outcome: ResidualClass,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Certification {
    pub checked: usize,
    pub failures: Vec<FaultFailure>,
}

impl Certification {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Injects every Pauli at every location of one recovery block, one at a
/// time, and checks that ideal recovery of the output is trivial.
pub fn certify_single_faults(recovery: &SyndromeNetwork) -> Result<Certification, Error> {
    let sim = Simulator::with_network(
        recovery.clone(),
        NoiseParams::noiseless(),
        Sampling::Geometric,
    )?;
    let mut cert = Certification::default();
    for site in sim.block.all() {
        for faults in site.faults() {
            cert.checked += 1;
            let (x, z) = sim.block_with_faults(site.stage, &faults)?;
            let outcome = ideal_recovery(x, z);
            if outcome != ResidualClass::TRIVIAL {
                cert.failures.push(FaultFailure {
                    site: *site,
                    faults,
                    outcome,
                });
            }
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{RecoverySchedule, VoteRule};

    fn config(mode: Mode, eps: f64, c: f64, trials: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(mode, NoiseParams::from_ratio(eps, c).unwrap());
        cfg.trials = trials;
        cfg.threads = 1;
        cfg
    }

    #[test]
    fn noiseless_runs_are_certain() {
        for mode in [Mode::MemoryT20, Mode::Ec1, Mode::ZGate] {
            let cfg = config(mode, 0.0, 1.0, 200);
            for i in 0..20 {
                assert_eq!(run_trial(&cfg, i).unwrap(), ResidualClass::TRIVIAL);
            }
            let s = run_batch(&cfg, mode).unwrap();
            assert_eq!(s.p_e_strict(), 0.0);
            assert_eq!(s.p_ec1(), 0.0);
            assert_eq!(s.f_a1(), 1.0);
        }
        let mut cfg = config(Mode::Stabilize, 0.0, f64::INFINITY, 50);
        cfg.t_max = 5;
        let series = run_stabilization_experiment(&cfg).unwrap();
        assert!(series.points.iter().all(|p| p.fidelity == 1.0));
        let ts: Vec<usize> = series.points.iter().map(|p| p.t).collect();
        assert_eq!(ts, vec![20, 40, 60, 80, 100]);
    }

    #[test]
    fn channel_errors_are_corrected_or_become_logical() {
        let sim = Simulator::new(&config(Mode::MemoryT20, 0.0, 1.0, 1)).unwrap();
        for j in 1..=7 {
            let e = ErrorVector::unit(j).unwrap();
            for (x, z) in [(e, ErrorVector::ZERO), (ErrorVector::ZERO, e), (e, e)] {
                let (rx, rz) = sim.recover_noiseless(x, z).unwrap();
                assert_eq!(classify_pair(rx, rz), ResidualClass::TRIVIAL);
            }
        }
        for i in 1..=7 {
            for j in i + 1..=7 {
                let e = ErrorVector::unit(i).unwrap() ^ ErrorVector::unit(j).unwrap();
                let (rx, _) = sim.recover_noiseless(e, ErrorVector::ZERO).unwrap();
                assert_eq!(codebook::classify(rx), SectorClass::Logical);
            }
        }
    }

    #[test]
    fn single_faults_are_tolerated() {
        let net = build_recovery(RecoverySchedule::default()).unwrap();
        let cert = certify_single_faults(&net).unwrap();
        assert!(cert.checked > 3000, "{}", cert.checked);
        assert!(
            cert.passed(),
            "{:?}",
            &cert.failures[..cert.failures.len().min(3)]
        );
    }

    #[test]
    fn bitwise_majority_is_not_single_fault_tolerant() {
        let schedule = RecoverySchedule {
            vote: VoteRule::BitwiseMajority,
            ..RecoverySchedule::default()
        };
        let cert = certify_single_faults(&build_recovery(schedule).unwrap()).unwrap();
        assert!(!cert.passed());
    }

    #[test]
    fn dropping_the_verification_cnot_breaks_tolerance() {
        let mut net = build_recovery(RecoverySchedule::default()).unwrap();
        net.phase_prep.steps[4].gates.clear();
        net.bit_prep.steps[4].gates.clear();
        let cert = certify_single_faults(&net).unwrap();
        assert!(!cert.passed());
    }

    #[test]
    fn stats_identities() {
        let cfg = config(Mode::MemoryT20, 0.01, 1.0, 2000);
        let s = run_memory_experiment(&cfg).unwrap();
        assert_eq!(s.raw.iter().sum::<u64>(), s.trials);
        assert_eq!(s.ideal.iter().sum::<u64>(), s.trials);
        let total = s.eta0() + s.eta3_b() + s.eta3_p() + s.eta_y() + s.p_detectable();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(s.p_fail_a1() <= s.p_e_strict());
        assert!(s.p_e_strict() > 0.0);
        assert_eq!(s.fidelity(0.0), s.fidelity(1.0));
    }

    #[test]
    fn samplers_agree_statistically() {
        let mut a = config(Mode::Ec1, 2e-3, 1.0, 20_000);
        let mut b = a.clone();
        a.sampling = Sampling::Geometric;
        b.sampling = Sampling::PerLocation;
        let (sa, sb) = (
            run_ec1_experiment(&a).unwrap(),
            run_ec1_experiment(&b).unwrap(),
        );
        let diff = (sa.p_ec1() - sb.p_ec1()).abs();
        let sd = (sa.p_ec1_stderr().powi(2) + sb.p_ec1_stderr().powi(2)).sqrt();
        assert!(diff < 5.0 * sd, "{} vs {}", sa.p_ec1(), sb.p_ec1());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn worker_count_does_not_change_counts() {
        let mut cfg = config(Mode::MemoryT20, 5e-3, 2.0, 3000);
        let one = run_memory_experiment(&cfg).unwrap();
        cfg.threads = 3;
        let three = run_memory_experiment(&cfg).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn mode_preconditions() {
        let mut cfg = config(Mode::MemoryT20, 1e-3, 1.0, 10);
        cfg.encoder_noisy = true;
        assert!(run_memory_experiment(&cfg).is_err());
        let cfg = config(Mode::Ec1, 1e-3, 1.0, 10);
        assert!(run_memory_experiment(&cfg).is_err());
        let mut cfg = config(Mode::Fig5, 1e-3, 1.0, 10);
        assert!(run_fig5_experiment(&cfg, &[1.5]).is_err());
        cfg.trials = 0;
        assert!(run_fig5_experiment(&cfg, &[0.5]).is_err());
        assert_eq!(Mode::parse("zgate").unwrap(), Mode::ZGate);
        assert!(Mode::parse("nope").is_err());
    }

    #[test]
    fn exposure_counts() {
        assert_eq!(config(Mode::MemoryT20, 0.0, 1.0, 1).t_steps(), 20);
        assert_eq!(config(Mode::Ec1, 0.0, 1.0, 1).t_steps(), 19);
    }

    #[test]
    fn naked() {
        assert_eq!(naked_fidelity(0.3, 0), 1.0);
        assert!((naked_fidelity(0.3, 1) - 0.8).abs() < 1e-15);
    }
}
