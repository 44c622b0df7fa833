//! Classical coset algebra of the Hamming pair `C = [7,4,3] ⊃ C⊥ = [7,3,4]`.
//!
//! Error patterns on the seven data qubits are stored as 7-bit masks: bit `i`
//! of the mask is data position `i + 1`. The parity-check matrix is chosen so
//! that column `j` is the binary representation of `j`; decoding a weight-one
//! error is then "syndrome = position".

use std::fmt;
use std::sync::OnceLock;

use crate::error::Error;

/// Number of physical qubits in a code block.
pub const BLOCK_LEN: usize = 7;

const FULL_MASK: u8 = 0x7f;

/// Rows of the parity-check matrix. Row `k` covers the positions whose
/// binary index has bit `k` set.
pub const H_ROWS: [ErrorVector; 3] = [
    ErrorVector(0b101_0101), // positions 1,3,5,7
    ErrorVector(0b110_0110), // positions 2,3,6,7
    ErrorVector(0b111_1000), // positions 4,5,6,7
];

/// A bit-flip or phase-flip pattern on the data block.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ErrorVector(u8);

impl ErrorVector {
    pub const ZERO: ErrorVector = ErrorVector(0);
    pub const ONES: ErrorVector = ErrorVector(FULL_MASK);

    /// Builds a vector from the low seven bits of `mask`.
    pub fn new(mask: u8) -> Result<Self, Error> {
        if mask & !FULL_MASK != 0 {
            return Err(Error::InvalidInput(format!(
                "error vector mask {mask:#x} has bits beyond position 7"
            )));
        }
        Ok(ErrorVector(mask))
    }

    /// Keeps only the low seven bits.
    pub const fn from_mask_truncated(mask: u8) -> Self {
        ErrorVector(mask & FULL_MASK)
    }

    /// Unit vector at 1-based `position`.
    pub fn unit(position: usize) -> Result<Self, Error> {
        if !(1..=BLOCK_LEN).contains(&position) {
            return Err(Error::InvalidInput(format!(
                "position {position} outside 1..=7"
            )));
        }
        Ok(ErrorVector(1 << (position - 1)))
    }

    /// Parses a string of seven `0`/`1` characters, position 1 first.
    pub fn parse(s: &str) -> Result<Self, Error> {
        let bytes = s.as_bytes();
        if bytes.len() != BLOCK_LEN {
            return Err(Error::InvalidInput(format!(
                "expected 7 binary digits, got {s:?}"
            )));
        }
        let mut mask = 0u8;
        for (i, b) in bytes.iter().enumerate() {
            match b {
                b'0' => {}
                b'1' => mask |= 1 << i,
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "expected 7 binary digits, got {s:?}"
                    )))
                }
            }
        }
        Ok(ErrorVector(mask))
    }

    pub const fn mask(self) -> u8 {
        self.0
    }

    pub const fn weight(self) -> u32 {
        self.0.count_ones()
    }

    /// Component at 1-based `position`.
    pub fn bit(self, position: usize) -> bool {
        (1..=BLOCK_LEN).contains(&position) && (self.0 >> (position - 1)) & 1 == 1
    }

    pub const fn xor(self, other: ErrorVector) -> ErrorVector {
        ErrorVector(self.0 ^ other.0)
    }

    /// Inner product over F₂.
    pub const fn dot(self, other: ErrorVector) -> bool {
        (self.0 & other.0).count_ones() % 2 == 1
    }

    /// All 128 vectors of F₂⁷ in mask order.
    pub fn all() -> impl Iterator<Item = ErrorVector> {
        (0u8..=FULL_MASK).map(ErrorVector)
    }
}

impl std::ops::BitXor for ErrorVector {
    type Output = ErrorVector;
    fn bitxor(self, rhs: ErrorVector) -> ErrorVector {
        self.xor(rhs)
    }
}

impl std::ops::BitXorAssign for ErrorVector {
    fn bitxor_assign(&mut self, rhs: ErrorVector) {
        self.0 ^= rhs.0;
    }
}

impl fmt::Display for ErrorVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..BLOCK_LEN {
            f.write_str(if (self.0 >> i) & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for ErrorVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ErrorVector({self})")
    }
}

/// `(s1, s2, s3)` is the C-syndrome; `s4` completes the C⊥ syndrome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Syndrome {
    /// `s1 | s2 << 1 | s3 << 2`.
    pub bits: u8,
    pub parity: bool,
}

impl Syndrome {
    pub fn s(&self, k: usize) -> bool {
        (self.bits >> k) & 1 == 1
    }

    pub fn xor(self, other: Syndrome) -> Syndrome {
        Syndrome {
            bits: self.bits ^ other.bits,
            parity: self.parity ^ other.parity,
        }
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{};{})",
            self.s(0) as u8,
            self.s(1) as u8,
            self.s(2) as u8,
            self.parity as u8
        )
    }
}

/// Residual error class of one sector, by effective weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SectorClass {
    Trivial,
    CorrectableW1,
    MiscorrectW2,
    Logical,
}

impl SectorClass {
    pub const ALL: [SectorClass; 4] = [
        SectorClass::Trivial,
        SectorClass::CorrectableW1,
        SectorClass::MiscorrectW2,
        SectorClass::Logical,
    ];

    pub fn from_effective_weight(w: u32) -> SectorClass {
        match w {
            0 => SectorClass::Trivial,
            1 => SectorClass::CorrectableW1,
            2 => SectorClass::MiscorrectW2,
            _ => SectorClass::Logical,
        }
    }

    pub const fn index(self) -> usize {
        self as usize
    }
}

/// Joint class of the bit-flip (`x`) and phase-flip (`z`) sectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ResidualClass {
    pub x_class: SectorClass,
    pub z_class: SectorClass,
}

impl ResidualClass {
    pub const TRIVIAL: ResidualClass = ResidualClass {
        x_class: SectorClass::Trivial,
        z_class: SectorClass::Trivial,
    };

    /// Index into a 4×4 joint-count table (`x * 4 + z`).
    pub const fn index(self) -> usize {
        self.x_class.index() * 4 + self.z_class.index()
    }

    pub fn from_index(i: usize) -> ResidualClass {
        ResidualClass {
            x_class: SectorClass::ALL[(i / 4) % 4],
            z_class: SectorClass::ALL[i % 4],
        }
    }
}

/// Word lists and the syndrome decoder for the Hamming pair.
#[derive(Clone, Debug)]
pub struct CodeTables {
    pub cperp_words: Vec<ErrorVector>,
    pub c_words: Vec<ErrorVector>,
    pub h_rows: [ErrorVector; 3],
    /// Indexed by the 3-bit C-syndrome.
    pub syndrome_to_leader: [ErrorVector; 8],
    effective_weight: [u8; 128],
}

fn span(generators: &[ErrorVector]) -> Vec<ErrorVector> {
    let mut words = Vec::with_capacity(1 << generators.len());
    for combo in 0u32..(1 << generators.len()) {
        let mut w = ErrorVector::ZERO;
        for (k, g) in generators.iter().enumerate() {
            if (combo >> k) & 1 == 1 {
                w ^= *g;
            }
        }
        words.push(w);
    }
    words.sort();
    words.dedup();
    words
}

/// Builds the code tables from the fixed parity-check matrix.
pub fn build_tables() -> CodeTables {
    let cperp_words = span(&H_ROWS);
    let mut c_generators = H_ROWS.to_vec();
    c_generators.push(ErrorVector::ONES);
    let c_words = span(&c_generators);

    let mut syndrome_to_leader = [ErrorVector::ZERO; 8];
    for position in 1..=BLOCK_LEN {
        let e = ErrorVector(1 << (position - 1));
        syndrome_to_leader[c_syndrome(e) as usize] = e;
    }

    let mut effective_weight = [0u8; 128];
    for e in ErrorVector::all() {
        effective_weight[e.mask() as usize] = cperp_words
            .iter()
            .map(|u| (e ^ *u).weight())
            .min()
            .unwrap_or(0) as u8;
    }

    CodeTables {
        cperp_words,
        c_words,
        h_rows: H_ROWS,
        syndrome_to_leader,
        effective_weight,
    }
}

/// Shared tables, built once.
pub fn tables() -> &'static CodeTables {
    static TABLES: OnceLock<CodeTables> = OnceLock::new();
    TABLES.get_or_init(build_tables)
}

fn c_syndrome(e: ErrorVector) -> u8 {
    H_ROWS
        .iter()
        .enumerate()
        .fold(0u8, |acc, (k, row)| acc | ((e.dot(*row) as u8) << k))
}

pub fn syndrome_of(e: ErrorVector) -> Syndrome {
    Syndrome {
        bits: c_syndrome(e),
        parity: e.weight() % 2 == 1,
    }
}

pub fn effective_weight(e: ErrorVector) -> u32 {
    tables().effective_weight[e.mask() as usize] as u32
}

pub fn classify(e: ErrorVector) -> SectorClass {
    SectorClass::from_effective_weight(effective_weight(e))
}

/// Hamming decoding: the weight ≤ 1 vector carrying C-syndrome `s`.
pub fn correction_for(s: u8) -> ErrorVector {
    tables().syndrome_to_leader[(s & 0b111) as usize]
}

pub fn is_in_cperp(e: ErrorVector) -> bool {
    effective_weight(e) == 0
}

pub fn is_in_c(e: ErrorVector) -> bool {
    c_syndrome(e) == 0
}

fn ideal_sector(e: ErrorVector) -> SectorClass {
    let corrected = e ^ correction_for(c_syndrome(e));
    if is_in_cperp(corrected) {
        SectorClass::Trivial
    } else {
        SectorClass::Logical
    }
}

/// Noise-free syndrome extraction and correction of both sectors.
pub fn ideal_recovery(x_residual: ErrorVector, z_residual: ErrorVector) -> ResidualClass {
    ResidualClass {
        x_class: ideal_sector(x_residual),
        z_class: ideal_sector(z_residual),
    }
}

/// Raw classification of both sectors.
pub fn classify_pair(x_residual: ErrorVector, z_residual: ErrorVector) -> ResidualClass {
    ResidualClass {
        x_class: classify(x_residual),
        z_class: classify(z_residual),
    }
}

/// Squared overlap `|⟨Q|E|Q⟩|²` for `|Q⟩ = a|0_L⟩ + b|1_L⟩` with real
/// amplitudes and `b = sqrt(1 - a²)`.
///
/// Residuals with a correctable or miscorrectable component give zero overlap.
/// A simultaneous logical X and Z acts as logical Y, whose overlap with a real
/// state is zero.
pub fn overlap_factor(class: ResidualClass, a: f64) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&a) || a.is_nan() {
        return Err(Error::InvalidInput(format!("amplitude {a} outside [0,1]")));
    }
    let b = (1.0 - a * a).max(0.0).sqrt();
    use SectorClass::*;
    let f = match (class.x_class, class.z_class) {
        (Trivial, Trivial) => 1.0,
        (Logical, Trivial) => (2.0 * a * b).powi(2),
        (Trivial, Logical) => (a * a - b * b).powi(2),
        (Logical, Logical) => 0.0,
        _ => 0.0,
    };
    Ok(f)
}
