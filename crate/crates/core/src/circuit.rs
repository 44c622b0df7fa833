//! Time-stepped networks: the encoder, cat/Shor ancilla preparation with
//! verification, the six-bit syndrome round and the three-round recovery.
//!
//! A [`Network`] is a list of time steps. Each step holds the gates applied
//! in it and the set of qubits alive during it; a live qubit with no gate in
//! a step is an idle location. Within a step the order of events is: gates,
//! then every fault of the step, then readouts of the measured qubits.

use std::fmt::{self, Write as _};

use sha2::{Digest, Sha256};

use crate::codebook::{self, ErrorVector, BLOCK_LEN, H_ROWS};
use crate::error::Error;
use crate::pauli::{Pauli, PauliFrame, MAX_QUBITS};

pub type Qubit = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    H(Qubit),
    Pauli(Qubit, Pauli),
    Cnot { control: Qubit, target: Qubit },
    Measure(Qubit),
}

impl Gate {
    pub fn qubits(&self) -> impl Iterator<Item = Qubit> {
        let (a, b) = match *self {
            Gate::H(q) | Gate::Pauli(q, _) | Gate::Measure(q) => (q, None),
            Gate::Cnot { control, target } => (control, Some(target)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn kind(&self) -> LocationKind {
        match self {
            Gate::H(_) => LocationKind::OneQubitGate(OneQubitGate::H),
            Gate::Pauli(_, p) => LocationKind::OneQubitGate(OneQubitGate::Pauli(*p)),
            Gate::Cnot { .. } => LocationKind::TwoQubitGate,
            Gate::Measure(_) => LocationKind::Measure,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OneQubitGate {
    H,
    Pauli(Pauli),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LocationKind {
    OneQubitGate(OneQubitGate),
    TwoQubitGate,
    Measure,
    Idle,
}

impl fmt::Display for LocationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocationKind::OneQubitGate(OneQubitGate::H) => f.write_str("H"),
            LocationKind::OneQubitGate(OneQubitGate::Pauli(p)) => write!(f, "{p}"),
            LocationKind::TwoQubitGate => f.write_str("CNOT"),
            LocationKind::Measure => f.write_str("MEASURE"),
            LocationKind::Idle => f.write_str("IDLE"),
        }
    }
}

/// A point in a network where a fault may occur.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Location {
    pub kind: LocationKind,
    pub qubits: Vec<Qubit>,
    pub step: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Step {
    pub gates: Vec<Gate>,
    /// Qubits alive (and therefore exposed to memory noise) during the step.
    pub live: u128,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    pub qubit_count: usize,
    pub steps: Vec<Step>,
    pub data_qubits: Vec<Qubit>,
}

fn bit(q: Qubit) -> u128 {
    1u128 << q
}

fn mask_of(qubits: impl IntoIterator<Item = Qubit>) -> u128 {
    qubits.into_iter().fold(0, |m, q| m | bit(q))
}

fn qubits_of(mask: u128) -> impl Iterator<Item = Qubit> {
    (0..MAX_QUBITS).filter(move |q| (mask >> q) & 1 == 1)
}

impl Network {
    pub fn empty(qubit_count: usize) -> Network {
        Network {
            qubit_count,
            steps: Vec::new(),
            data_qubits: Vec::new(),
        }
    }

    /// Checks that every gate acts on live, in-range, distinct qubits and that
    /// no qubit takes part in two gates of one step.
    pub fn validate(&self) -> Result<(), Error> {
        if self.qubit_count > MAX_QUBITS {
            return Err(Error::InvalidInput(format!(
                "{} qubits exceed {MAX_QUBITS}",
                self.qubit_count
            )));
        }
        for (s, step) in self.steps.iter().enumerate() {
            let mut used = 0u128;
            for gate in &step.gates {
                if let Gate::Cnot { control, target } = gate {
                    if control == target {
                        return Err(Error::InvalidInput(format!(
                            "step {s}: CNOT on a single qubit {control}"
                        )));
                    }
                }
                for q in gate.qubits() {
                    if q >= self.qubit_count {
                        return Err(Error::QubitOutOfRange {
                            index: q,
                            qubit_count: self.qubit_count,
                        });
                    }
                    if used & bit(q) != 0 {
                        return Err(Error::InvalidInput(format!(
                            "step {s}: qubit {q} appears in two locations"
                        )));
                    }
                    if step.live & bit(q) == 0 {
                        return Err(Error::InvalidInput(format!(
                            "step {s}: gate on qubit {q} which is not live"
                        )));
                    }
                    used |= bit(q);
                }
            }
        }
        Ok(())
    }

    /// Every location, idle ones included, in step order.
    pub fn locations(&self) -> Vec<Location> {
        let mut out = Vec::new();
        for (s, step) in self.steps.iter().enumerate() {
            let mut busy = 0u128;
            for g in &step.gates {
                let qubits: Vec<Qubit> = g.qubits().collect();
                busy |= mask_of(qubits.iter().copied());
                out.push(Location {
                    kind: g.kind(),
                    qubits,
                    step: s,
                });
            }
            for q in qubits_of(step.live & !busy) {
                out.push(Location {
                    kind: LocationKind::Idle,
                    qubits: vec![q],
                    step: s,
                });
            }
        }
        out
    }

    /// Number of steps in which any data qubit is live.
    pub fn data_exposure_steps(&self) -> usize {
        let data = mask_of(self.data_qubits.iter().copied());
        self.steps.iter().filter(|s| s.live & data != 0).count()
    }

    /// One line per location: `step kind qubits...`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for loc in self.locations() {
            let _ = write!(out, "{} {}", loc.step, loc.kind);
            for q in &loc.qubits {
                let _ = write!(out, " {q}");
            }
            out.push('\n');
        }
        out
    }

    /// Propagates `frame` through the ideal gates and records readout flips.
    /// `faults` must be sorted by step; each is applied after the gates of
    /// its step and before that step's readouts.
    pub fn execute(&self, frame: &mut PauliFrame, faults: &[StepFault]) -> u128 {
        let mut flips = 0u128;
        let mut next = 0;
        for (s, step) in self.steps.iter().enumerate() {
            let mut measured = 0u128;
            for g in &step.gates {
                match *g {
                    Gate::H(q) => frame.h_unchecked(q),
                    Gate::Pauli(_, _) => {}
                    Gate::Cnot { control, target } => frame.cnot_unchecked(control, target),
                    Gate::Measure(q) => measured |= bit(q),
                }
            }
            while next < faults.len() && faults[next].step == s {
                let f = &faults[next];
                frame.pauli_unchecked(f.qubit, f.pauli);
                next += 1;
            }
            flips |= frame.x_mask() & measured;
        }
        flips
    }
}

/// A Pauli fault placed on one qubit at the end of a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepFault {
    pub step: usize,
    pub qubit: Qubit,
    pub pauli: Pauli,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Census {
    pub cnot_count: usize,
    /// CNOTs with one data and one ancilla qubit.
    pub data_cnot_count: usize,
    pub h_count: usize,
    pub measure_count: usize,
    pub step_count: usize,
    pub data_exposure_steps: usize,
}

impl std::ops::Add for Census {
    type Output = Census;
    fn add(self, o: Census) -> Census {
        Census {
            cnot_count: self.cnot_count + o.cnot_count,
            data_cnot_count: self.data_cnot_count + o.data_cnot_count,
            h_count: self.h_count + o.h_count,
            measure_count: self.measure_count + o.measure_count,
            step_count: self.step_count + o.step_count,
            data_exposure_steps: self.data_exposure_steps + o.data_exposure_steps,
        }
    }
}

pub fn census(net: &Network) -> Census {
    let data = mask_of(net.data_qubits.iter().copied());
    let mut c = Census {
        step_count: net.steps.len(),
        data_exposure_steps: net.data_exposure_steps(),
        ..Census::default()
    };
    for g in net.steps.iter().flat_map(|s| &s.gates) {
        match *g {
            Gate::H(_) => c.h_count += 1,
            Gate::Pauli(..) => {}
            Gate::Cnot { control, target } => {
                c.cnot_count += 1;
                if (data & bit(control) != 0) != (data & bit(target) != 0) {
                    c.data_cnot_count += 1;
                }
            }
            Gate::Measure(_) => c.measure_count += 1,
        }
    }
    c
}

// ---------------------------------------------------------------------------
// Encoder

/// Position (0-based) of the unencoded input qubit.
pub const ENCODER_INPUT: Qubit = 2;

/// Encoder for `a|0⟩ + b|1⟩` at qubit index 2 into `a|0_L⟩ + b|1_L⟩`.
///
/// The input is first copied onto positions 5 and 6 (the odd word
/// `0010110`), then the pivot qubits 1, 2, 4 of the three check rows are put
/// in `|+⟩` and fanned out over their rows.
pub fn build_encoder() -> Network {
    let c = |control: usize, target: usize| Gate::Cnot {
        control: control - 1,
        target: target - 1,
    };
    let layers: Vec<Vec<Gate>> = vec![
        vec![Gate::H(0), Gate::H(1), Gate::H(3), c(3, 5)],
        vec![c(3, 6), c(1, 7), c(4, 5)],
        vec![c(1, 3), c(2, 6), c(4, 7)],
        vec![c(1, 5), c(2, 3), c(4, 6)],
        vec![c(2, 7)],
    ];
    let live = mask_of(0..BLOCK_LEN);
    Network {
        qubit_count: BLOCK_LEN,
        steps: layers
            .into_iter()
            .map(|gates| Step { gates, live })
            .collect(),
        data_qubits: (0..BLOCK_LEN).collect(),
    }
}

fn propagate(net: &Network, q: Qubit, p: Pauli) -> (ErrorVector, ErrorVector) {
    let mut frame = PauliFrame::new(net.qubit_count.max(BLOCK_LEN)).expect("block fits");
    frame.pauli_unchecked(q, p);
    net.execute(&mut frame, &[]);
    frame.block(0)
}

fn rank_f2(mut rows: Vec<u16>) -> usize {
    let mut rank = 0;
    for b in (0..16).rev() {
        if let Some(i) = (rank..rows.len()).find(|&i| (rows[i] >> b) & 1 == 1) {
            rows.swap(rank, i);
            let pivot = rows[rank];
            for (j, r) in rows.iter_mut().enumerate() {
                if j != rank && (*r >> b) & 1 == 1 {
                    *r ^= pivot;
                }
            }
            rank += 1;
        }
    }
    rank
}

/// Heisenberg check of an encoder: the six initial `Z`s on the `|0⟩` qubits
/// must become independent stabilizers and the input's `Z`/`X` must become
/// logical `Z`/`X` up to stabilizers.
pub fn verify_encoder(net: &Network) -> bool {
    if net.qubit_count != BLOCK_LEN || net.validate().is_err() {
        return false;
    }
    let is_logical = |e: ErrorVector| codebook::is_in_c(e) && !codebook::is_in_cperp(e);
    let mut rows = Vec::new();
    for q in (0..BLOCK_LEN).filter(|&q| q != ENCODER_INPUT) {
        let (x, z) = propagate(net, q, Pauli::Z);
        if !(codebook::is_in_cperp(x) && codebook::is_in_cperp(z)) {
            return false;
        }
        rows.push(((x.mask() as u16) << 7) | z.mask() as u16);
    }
    if rank_f2(rows) != 6 {
        return false;
    }
    let (zx, zz) = propagate(net, ENCODER_INPUT, Pauli::Z);
    let (xx, xz) = propagate(net, ENCODER_INPUT, Pauli::X);
    codebook::is_in_cperp(zx) && is_logical(zz) && is_logical(xx) && codebook::is_in_cperp(xz)
}

// ---------------------------------------------------------------------------
// Ancillas

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AncillaKind {
    /// Cat state in the computational basis, used as CNOT control.
    PhaseSyndrome,
    /// Shor state (Hadamard-rotated cat), used as CNOT target.
    BitSyndrome,
}

/// Local qubit index of the verification qubit in a prep network.
pub const VERIFY_QUBIT: Qubit = 4;

/// Five-qubit cat preparation with a parity check of cat qubits 0 and 3.
///
/// ```text
/// step 0: H 0
/// step 1: CNOT 0→1
/// step 2: CNOT 0→2, CNOT 1→3
/// step 3: CNOT 0→4
/// step 4: CNOT 3→4
/// step 5: MEASURE 4   (+ H 0..3 for the Shor state)
/// ```
///
/// Every single X fault before the check that leaves two or more cat qubits
/// flipped (up to `XXXX`) flips the verification readout.
pub fn build_ancilla_prep(kind: AncillaKind) -> Network {
    let cnot = |control, target| Gate::Cnot { control, target };
    let mut last = vec![Gate::Measure(VERIFY_QUBIT)];
    if kind == AncillaKind::BitSyndrome {
        last.extend((0..4).map(Gate::H));
    }
    let gates = vec![
        vec![Gate::H(0)],
        vec![cnot(0, 1)],
        vec![cnot(0, 2), cnot(1, 3)],
        vec![cnot(0, VERIFY_QUBIT)],
        vec![cnot(3, VERIFY_QUBIT)],
        last,
    ];
    // all five qubits exist from the first step
    let live = [mask_of(0..5); 6];
    Network {
        qubit_count: 5,
        steps: gates
            .into_iter()
            .zip(live)
            .map(|(gates, live)| Step { gates, live })
            .collect(),
        data_qubits: Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// Syndrome extraction

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sector {
    /// Detects X errors (bit-type ancilla).
    Bit,
    /// Detects Z errors (phase-type ancilla).
    Phase,
}

/// Which of the six data-facing layers of a round each ancilla uses.
///
/// Each ancilla couples to its four data qubits transversally in one layer.
/// When it is rotated and read is set by [`AncillaReadout`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RoundLayout {
    pub phase_layers: [usize; 3],
    pub bit_layers: [usize; 3],
}

impl Default for RoundLayout {
    fn default() -> Self {
        RoundLayout {
            phase_layers: [0, 1, 2],
            bit_layers: [3, 4, 5],
        }
    }
}

impl RoundLayout {
    fn validate(&self, steps_per_round: usize) -> Result<(), Error> {
        let mut seen = [false; 6];
        for &l in self.phase_layers.iter().chain(&self.bit_layers) {
            if l >= steps_per_round || seen[l] {
                return Err(Error::InvalidInput(format!(
                    "round layout {self:?} must be a permutation of 0..{steps_per_round}"
                )));
            }
            seen[l] = true;
        }
        if self.phase_layers.iter().any(|&l| l + 2 > steps_per_round) {
            return Err(Error::InvalidInput(
                "phase ancilla must be read out by the first step after its round".into(),
            ));
        }
        Ok(())
    }
}

/// How the three per-round syndromes of a sector become one correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VoteRule {
    /// Majority of each syndrome bit separately.
    BitwiseMajority,
    /// The syndrome shared by at least two rounds; if all rounds disagree,
    /// the last round.
    AgreeOrLatest,
}

impl VoteRule {
    pub fn decide(&self, rounds: &[u8]) -> u8 {
        match self {
            VoteRule::BitwiseMajority => {
                let mut out = 0u8;
                for b in 0..3 {
                    let ones = rounds.iter().filter(|s| (*s >> b) & 1 == 1).count();
                    if 2 * ones > rounds.len() {
                        out |= 1 << b;
                    }
                }
                out
            }
            VoteRule::AgreeOrLatest => {
                for (i, s) in rounds.iter().enumerate() {
                    if rounds[i + 1..].contains(s) {
                        return *s;
                    }
                }
                rounds.last().copied().unwrap_or(0)
            }
        }
    }
}

/// When a prepared ancilla starts taking memory noise in the interaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AncillaWait {
    /// All six ancillas of a round are present from its first step.
    RoundStart,
    /// An ancilla appears in the step of its first CNOT.
    OnDemand,
}

/// When an ancilla is read out after its CNOT layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AncillaReadout {
    /// As soon as possible (phase ancillas need one extra step for H).
    Prompt,
    /// All six together in the step after the round.
    RoundEnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RecoverySchedule {
    pub rounds: usize,
    pub steps_per_round: usize,
    pub correction_steps: usize,
    /// Channel steps before the first recovery.
    pub channel_prefix_steps: usize,
    /// Channel steps between consecutive recoveries.
    pub inter_recovery_gap: usize,
    pub layout: RoundLayout,
    pub vote: VoteRule,
    pub wait: AncillaWait,
    pub readout: AncillaReadout,
}

impl Default for RecoverySchedule {
    fn default() -> Self {
        RecoverySchedule {
            rounds: 3,
            steps_per_round: 6,
            correction_steps: 1,
            channel_prefix_steps: 1,
            inter_recovery_gap: 1,
            layout: RoundLayout::default(),
            vote: VoteRule::AgreeOrLatest,
            wait: AncillaWait::RoundStart,
            readout: AncillaReadout::RoundEnd,
        }
    }
}

impl RecoverySchedule {
    pub fn validate(&self) -> Result<(), Error> {
        if self.rounds != 3 || self.steps_per_round != 6 || self.correction_steps != 1 {
            return Err(Error::InvalidInput(format!(
                "recovery requires 3 rounds of 6 steps and 1 correction step, got {}×{} + {}",
                self.rounds, self.steps_per_round, self.correction_steps
            )));
        }
        self.layout.validate(self.steps_per_round)
    }

    /// Data-exposure steps of one recovery block.
    pub fn recovery_steps(&self) -> usize {
        self.rounds * self.steps_per_round + self.correction_steps
    }

    /// Step count at the end of the first recovery, channel prefix included.
    pub fn first_recovery_time(&self) -> usize {
        self.channel_prefix_steps + self.recovery_steps()
    }

    /// Time step at the end of recovery `k` (1-based).
    pub fn time_after(&self, k: usize) -> usize {
        self.first_recovery_time()
            + (k.saturating_sub(1)) * (self.inter_recovery_gap + self.recovery_steps())
    }
}

/// One ancilla of a syndrome network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AncillaSlot {
    pub kind: AncillaKind,
    pub round: usize,
    /// Check row 0..3.
    pub row: usize,
    /// Global indices of the four cat qubits.
    pub qubits: [Qubit; 4],
}

impl AncillaSlot {
    pub fn sector(&self) -> Sector {
        match self.kind {
            AncillaKind::PhaseSyndrome => Sector::Phase,
            AncillaKind::BitSyndrome => Sector::Bit,
        }
    }

    pub fn mask(&self) -> u128 {
        mask_of(self.qubits)
    }
}

/// Syndrome-extraction network: ancilla preparations run off-line and feed
/// the data-facing timeline in `interaction`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyndromeNetwork {
    pub schedule: RecoverySchedule,
    pub rounds: usize,
    pub interaction: Network,
    pub ancillas: Vec<AncillaSlot>,
    pub phase_prep: Network,
    pub bit_prep: Network,
    /// Step at whose end the correction is applied, if any.
    pub correction_step: Option<usize>,
}

/// Data positions (0-based) in the support of check row `row`.
pub fn row_support(row: usize) -> [Qubit; 4] {
    let mut out = [0; 4];
    let mut k = 0;
    for p in 0..BLOCK_LEN {
        if (H_ROWS[row].mask() >> p) & 1 == 1 {
            out[k] = p;
            k += 1;
        }
    }
    out
}

fn build_syndrome_network(
    schedule: RecoverySchedule,
    rounds: usize,
    with_correction: bool,
) -> Result<SyndromeNetwork, Error> {
    schedule.layout.validate(schedule.steps_per_round)?;
    let spr = schedule.steps_per_round;
    let total_steps = rounds * spr + 1;
    let qubit_count = BLOCK_LEN + rounds * 6 * 4;
    let mut steps = vec![Step::default(); total_steps];
    let data = mask_of(0..BLOCK_LEN);
    let data_steps = if with_correction {
        total_steps
    } else {
        rounds * spr
    };
    for step in steps.iter_mut().take(data_steps) {
        step.live |= data;
    }

    let mut ancillas = Vec::new();
    for round in 0..rounds {
        for (sector, layers) in [
            (Sector::Phase, schedule.layout.phase_layers),
            (Sector::Bit, schedule.layout.bit_layers),
        ] {
            for (row, &layer) in layers.iter().enumerate() {
                let base = BLOCK_LEN + 4 * ancillas.len();
                let qubits = [base, base + 1, base + 2, base + 3];
                let kind = match sector {
                    Sector::Phase => AncillaKind::PhaseSyndrome,
                    Sector::Bit => AncillaKind::BitSyndrome,
                };
                let slot = AncillaSlot {
                    kind,
                    round,
                    row,
                    qubits,
                };
                let couple = round * spr + layer;
                let support = row_support(row);
                for (a, d) in qubits.iter().zip(support) {
                    steps[couple].gates.push(match sector {
                        Sector::Phase => Gate::Cnot {
                            control: *a,
                            target: d,
                        },
                        Sector::Bit => Gate::Cnot {
                            control: d,
                            target: *a,
                        },
                    });
                }
                let end = (round + 1) * spr;
                let readout = match (sector, schedule.readout) {
                    (Sector::Phase, AncillaReadout::Prompt) => {
                        steps[couple + 1]
                            .gates
                            .extend(qubits.iter().map(|&a| Gate::H(a)));
                        couple + 2
                    }
                    (Sector::Phase, AncillaReadout::RoundEnd) => {
                        steps[end - 1]
                            .gates
                            .extend(qubits.iter().map(|&a| Gate::H(a)));
                        end
                    }
                    (Sector::Bit, AncillaReadout::Prompt) => couple + 1,
                    (Sector::Bit, AncillaReadout::RoundEnd) => end,
                };
                steps[readout]
                    .gates
                    .extend(qubits.iter().map(|&a| Gate::Measure(a)));
                let arrive = match schedule.wait {
                    AncillaWait::RoundStart => round * spr,
                    AncillaWait::OnDemand => couple,
                };
                for step in &mut steps[arrive..=readout] {
                    step.live |= slot.mask();
                }
                ancillas.push(slot);
            }
        }
    }
    let interaction = Network {
        qubit_count,
        steps,
        data_qubits: (0..BLOCK_LEN).collect(),
    };
    interaction.validate()?;
    Ok(SyndromeNetwork {
        schedule,
        rounds,
        interaction,
        ancillas,
        phase_prep: build_ancilla_prep(AncillaKind::PhaseSyndrome),
        bit_prep: build_ancilla_prep(AncillaKind::BitSyndrome),
        correction_step: with_correction.then_some(total_steps - 1),
    })
}

/// One six-bit syndrome round (no correction) with the default layout.
pub fn build_syndrome_round() -> SyndromeNetwork {
    build_syndrome_network(RecoverySchedule::default(), 1, false).expect("default layout is valid")
}

/// Three syndrome rounds followed by the correction step.
pub fn build_recovery(schedule: RecoverySchedule) -> Result<SyndromeNetwork, Error> {
    schedule.validate()?;
    build_syndrome_network(schedule, schedule.rounds, true)
}

impl SyndromeNetwork {
    pub fn prep(&self, kind: AncillaKind) -> &Network {
        match kind {
            AncillaKind::PhaseSyndrome => &self.phase_prep,
            AncillaKind::BitSyndrome => &self.bit_prep,
        }
    }

    pub fn ancilla_mask(&self) -> u128 {
        self.ancillas.iter().fold(0, |m, a| m | a.mask())
    }

    /// Census with one nominal (accepted first time) preparation per ancilla.
    pub fn census(&self) -> Census {
        let mut c = census(&self.interaction);
        for a in &self.ancillas {
            let p = census(self.prep(a.kind));
            c.cnot_count += p.cnot_count;
            c.h_count += p.h_count;
            c.measure_count += p.measure_count;
        }
        c
    }

    /// Per-round 3-bit syndromes of `sector` from readout flips.
    pub fn round_syndromes(&self, flips: u128, sector: Sector) -> Vec<u8> {
        let mut out = vec![0u8; self.rounds];
        for a in self.ancillas.iter().filter(|a| a.sector() == sector) {
            if (flips & a.mask()).count_ones() % 2 == 1 {
                out[a.round] |= 1 << a.row;
            }
        }
        out
    }

    /// The `(x, z)` correction chosen from readout flips.
    pub fn correction(&self, flips: u128) -> (ErrorVector, ErrorVector) {
        let vote = self.schedule.vote;
        let bit = vote.decide(&self.round_syndromes(flips, Sector::Bit));
        let phase = vote.decide(&self.round_syndromes(flips, Sector::Phase));
        (
            codebook::correction_for(bit),
            codebook::correction_for(phase),
        )
    }

    /// Text dump of the preparation networks and the interaction timeline.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("[phase_prep]\n");
        out.push_str(&self.phase_prep.dump());
        out.push_str("[bit_prep]\n");
        out.push_str(&self.bit_prep.dump());
        out.push_str("[ancillas]\n");
        for a in &self.ancillas {
            let _ = writeln!(
                out,
                "{:?} round={} row={} qubits={:?}",
                a.kind, a.round, a.row, a.qubits
            );
        }
        out.push_str("[interaction]\n");
        out.push_str(&self.interaction.dump());
        if let Some(s) = self.correction_step {
            let _ = writeln!(out, "[correction]\n{s} {:?}", self.schedule.vote);
        }
        out
    }

    /// Short hex digest of [`SyndromeNetwork::dump`].
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.dump().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_is_valid() {
        let enc = build_encoder();
        enc.validate().unwrap();
        assert!(verify_encoder(&enc));
        assert!(enc.steps.len() <= 6);
        assert_eq!(census(&enc).h_count, 3);
    }

    #[test]
    fn broken_encoders_fail() {
        assert!(!verify_encoder(&Network::empty(7)));
        let enc = build_encoder();
        for s in 0..enc.steps.len() {
            for g in 0..enc.steps[s].gates.len() {
                if matches!(enc.steps[s].gates[g], Gate::Cnot { .. }) {
                    let mut broken = enc.clone();
                    broken.steps[s].gates.remove(g);
                    assert!(!verify_encoder(&broken), "step {s} gate {g}");
                }
            }
        }
    }

    fn run_prep(kind: AncillaKind, faults: &[StepFault]) -> (bool, PauliFrame) {
        let net = build_ancilla_prep(kind);
        let mut frame = PauliFrame::new(5).unwrap();
        let flips = net.execute(&mut frame, faults);
        ((flips >> VERIFY_QUBIT) & 1 == 1, frame)
    }

    #[test]
    fn prep_verification_examples() {
        for kind in [AncillaKind::PhaseSyndrome, AncillaKind::BitSyndrome] {
            let net = build_ancilla_prep(kind);
            net.validate().unwrap();
            assert_eq!(census(&net).cnot_count, 5);
            assert!(!run_prep(kind, &[]).0);
        }
        // X on qubit 1 after the first fan-out CNOT reaches qubits 1 and 3
        let fault = StepFault {
            step: 1,
            qubit: 1,
            pauli: Pauli::X,
        };
        assert!(run_prep(AncillaKind::BitSyndrome, &[fault]).0);
        // Z faults before the final rotation pass the check
        for step in 0..5 {
            for qubit in 0..4 {
                let z = StepFault {
                    step,
                    qubit,
                    pauli: Pauli::Z,
                };
                assert!(!run_prep(AncillaKind::BitSyndrome, &[z]).0);
            }
        }
    }

    #[test]
    fn verification_catches_spreading_x_faults() {
        let cat = mask_of(0..4);
        for step in 0..3 {
            for qubit in 0..4 {
                let fault = StepFault {
                    step,
                    qubit,
                    pauli: Pauli::X,
                };
                let (rejected, frame) = run_prep(AncillaKind::PhaseSyndrome, &[fault]);
                let x = frame.x_mask() & cat;
                let weight = x.count_ones().min((x ^ cat).count_ones());
                if weight >= 2 {
                    assert!(rejected, "step {step} qubit {qubit}");
                }
            }
        }
    }

    #[test]
    fn round_structure() {
        let round = build_syndrome_round();
        let c = round.census();
        assert_eq!(c.data_cnot_count, 24);
        assert_eq!(c.cnot_count, 24 + 6 * 5);
        assert_eq!(c.data_exposure_steps, 6);
        round.interaction.validate().unwrap();
    }

    #[test]
    fn recovery_structure() {
        let rec = build_recovery(RecoverySchedule::default()).unwrap();
        let c = rec.census();
        assert_eq!(c.data_cnot_count, 72);
        assert_eq!(c.data_exposure_steps, 19);
        assert_eq!(rec.correction_step, Some(18));
        assert_eq!(RecoverySchedule::default().first_recovery_time(), 20);
        assert_eq!(RecoverySchedule::default().time_after(3), 60);
    }

    fn single_error_syndromes(p: Pauli) -> Vec<(usize, Vec<u8>, Vec<u8>)> {
        let round = build_syndrome_round();
        (0..7)
            .map(|j| {
                let mut frame = PauliFrame::new(round.interaction.qubit_count).unwrap();
                frame.pauli_unchecked(j, p);
                let flips = round.interaction.execute(&mut frame, &[]);
                (
                    j,
                    round.round_syndromes(flips, Sector::Bit),
                    round.round_syndromes(flips, Sector::Phase),
                )
            })
            .collect()
    }

    #[test]
    fn single_errors_are_located() {
        for (j, bit, phase) in single_error_syndromes(Pauli::X) {
            assert_eq!(bit, vec![(j + 1) as u8]);
            assert_eq!(phase, vec![0]);
        }
        for (j, bit, phase) in single_error_syndromes(Pauli::Z) {
            assert_eq!(bit, vec![0]);
            assert_eq!(phase, vec![(j + 1) as u8]);
        }
    }

    #[test]
    fn noiseless_recovery_fixes_one_error() {
        let rec = build_recovery(RecoverySchedule::default()).unwrap();
        for j in 0..7 {
            for p in Pauli::NONTRIVIAL {
                let mut frame = PauliFrame::new(rec.interaction.qubit_count).unwrap();
                frame.pauli_unchecked(j, p);
                let flips = rec.interaction.execute(&mut frame, &[]);
                for sector in [Sector::Bit, Sector::Phase] {
                    let s = rec.round_syndromes(flips, sector);
                    assert!(s.iter().all(|v| *v == s[0]));
                }
                let (cx, cz) = rec.correction(flips);
                let (x, z) = frame.block(0);
                assert_eq!(
                    codebook::ideal_recovery(x, z),
                    codebook::ResidualClass::TRIVIAL
                );
                assert!((x ^ cx).weight() == 0 && (z ^ cz).weight() == 0);
            }
        }
    }

    #[test]
    fn votes() {
        for rule in [VoteRule::BitwiseMajority, VoteRule::AgreeOrLatest] {
            assert_eq!(rule.decide(&[5, 5, 5]), 5);
            assert_eq!(rule.decide(&[3, 5, 5]), 5);
            assert_eq!(rule.decide(&[5, 0, 5]), 5);
        }
        assert_eq!(VoteRule::BitwiseMajority.decide(&[0, 6, 7]), 6);
        assert_eq!(VoteRule::AgreeOrLatest.decide(&[0, 6, 7]), 7);
    }

    #[test]
    fn zero_frame_stays_zero() {
        let rec = build_recovery(RecoverySchedule::default()).unwrap();
        let mut frame = PauliFrame::new(rec.interaction.qubit_count).unwrap();
        let flips = rec.interaction.execute(&mut frame, &[]);
        assert_eq!(flips, 0);
        assert!(frame.is_identity());
    }

    #[test]
    fn layouts_are_checked() {
        let mut s = RecoverySchedule::default();
        s.layout.phase_layers = [0, 1, 1];
        assert!(build_recovery(s).is_err());
        s.layout = RoundLayout {
            phase_layers: [3, 4, 5],
            bit_layers: [0, 1, 2],
        };
        assert!(build_recovery(s).is_err());
        s.layout = RoundLayout {
            phase_layers: [2, 3, 4],
            bit_layers: [0, 1, 5],
        };
        let rec = build_recovery(s).unwrap();
        assert_eq!(rec.census().data_cnot_count, 72);
        s.rounds = 2;
        assert!(build_recovery(s).is_err());
    }

    #[test]
    fn dump_lists_every_location() {
        let round = build_syndrome_round();
        let dump = round.interaction.dump();
        assert_eq!(dump.lines().count(), round.interaction.locations().len());
        assert!(dump.contains("CNOT"));
        assert_eq!(round.fingerprint().len(), 16);
    }
}
