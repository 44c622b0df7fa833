//! Binary symplectic Pauli frames.
//!
//! A frame records the Pauli error accumulated on each qubit relative to the
//! ideal circuit, as an X mask and a Z mask. Signs are dropped. Up to 128
//! qubits fit in one frame, which covers a data block plus every ancilla of a
//! three-round recovery.

use std::fmt;

use crate::codebook::ErrorVector;
use crate::error::Error;

pub const MAX_QUBITS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const NONTRIVIAL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    /// `(x, z)` components with `Y = XZ`.
    pub const fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub const fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// `0 → I, 1 → X, 2 → Y, 3 → Z`.
    pub const fn from_index(i: u8) -> Pauli {
        match i & 3 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub const fn is_identity(self) -> bool {
        matches!(self, Pauli::I)
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(c)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PauliFrame {
    x: u128,
    z: u128,
    qubit_count: usize,
}

impl PauliFrame {
    pub fn new(qubit_count: usize) -> Result<Self, Error> {
        if qubit_count > MAX_QUBITS {
            return Err(Error::InvalidInput(format!(
                "{qubit_count} qubits exceed the frame capacity of {MAX_QUBITS}"
            )));
        }
        Ok(PauliFrame {
            x: 0,
            z: 0,
            qubit_count,
        })
    }

    pub fn from_masks(qubit_count: usize, x: u128, z: u128) -> Result<Self, Error> {
        let mut frame = PauliFrame::new(qubit_count)?;
        let valid = frame.valid_mask();
        if x & !valid != 0 || z & !valid != 0 {
            return Err(Error::InvalidInput(
                "frame mask has bits beyond qubit_count".into(),
            ));
        }
        frame.x = x;
        frame.z = z;
        Ok(frame)
    }

    fn valid_mask(&self) -> u128 {
        if self.qubit_count == MAX_QUBITS {
            u128::MAX
        } else {
            (1u128 << self.qubit_count) - 1
        }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn x_mask(&self) -> u128 {
        self.x
    }

    pub fn z_mask(&self) -> u128 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    fn check(&self, q: usize) -> Result<(), Error> {
        if q >= self.qubit_count {
            Err(Error::QubitOutOfRange {
                index: q,
                qubit_count: self.qubit_count,
            })
        } else {
            Ok(())
        }
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits((self.x >> q) & 1 == 1, (self.z >> q) & 1 == 1)
    }

    /// Conjugation by a Hadamard: swaps the X and Z bits of `q`.
    pub fn apply_h(&mut self, q: usize) -> Result<(), Error> {
        self.check(q)?;
        self.h_unchecked(q);
        Ok(())
    }

    /// Conjugation by a CNOT: X copies control → target, Z copies target → control.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<(), Error> {
        self.check(control)?;
        self.check(target)?;
        if control == target {
            return Err(Error::InvalidInput(format!(
                "CNOT control and target are both {control}"
            )));
        }
        self.cnot_unchecked(control, target);
        Ok(())
    }

    /// Multiplies a Pauli into the frame at `q`.
    pub fn apply_pauli(&mut self, q: usize, p: Pauli) -> Result<(), Error> {
        self.check(q)?;
        self.pauli_unchecked(q, p);
        Ok(())
    }

    /// Flip of a computational-basis parity readout over `qubits`: the XOR
    /// of their X bits.
    pub fn measure_flip(&self, qubits: &[usize]) -> Result<bool, Error> {
        if qubits.is_empty() {
            return Err(Error::InvalidInput("empty measurement set".into()));
        }
        let mut mask = 0u128;
        for &q in qubits {
            self.check(q)?;
            mask ^= 1u128 << q;
        }
        Ok(self.parity_flip(mask))
    }

    /// Clears both bits of every qubit in `mask` (retired qubits).
    pub fn clear(&mut self, mask: u128) {
        self.x &= !mask;
        self.z &= !mask;
    }

    #[inline]
    pub(crate) fn h_unchecked(&mut self, q: usize) {
        let bit = 1u128 << q;
        let differ = (self.x ^ self.z) & bit;
        self.x ^= differ;
        self.z ^= differ;
    }

    #[inline]
    pub(crate) fn cnot_unchecked(&mut self, control: usize, target: usize) {
        self.x ^= ((self.x >> control) & 1) << target;
        self.z ^= ((self.z >> target) & 1) << control;
    }

    #[inline]
    pub(crate) fn pauli_unchecked(&mut self, q: usize, p: Pauli) {
        let (px, pz) = p.bits();
        self.x ^= (px as u128) << q;
        self.z ^= (pz as u128) << q;
    }

    /// Parity of X bits under `mask`.
    #[inline]
    pub fn parity_flip(&self, mask: u128) -> bool {
        (self.x & mask).count_ones() % 2 == 1
    }

    /// X and Z components restricted to seven consecutive qubits starting at `first`.
    pub fn block(&self, first: usize) -> (ErrorVector, ErrorVector) {
        (
            ErrorVector::from_mask_truncated((self.x >> first) as u8),
            ErrorVector::from_mask_truncated((self.z >> first) as u8),
        )
    }

    /// XORs `x` into the X bits and `z` into the Z bits of the block at `first`.
    pub fn xor_block(&mut self, first: usize, x: ErrorVector, z: ErrorVector) {
        self.x ^= (x.mask() as u128) << first;
        self.z ^= (z.mask() as u128) << first;
    }

    /// Swaps the X and Z masks wholesale.
    pub fn swapped(&self) -> PauliFrame {
        PauliFrame {
            x: self.z,
            z: self.x,
            qubit_count: self.qubit_count,
        }
    }
}

impl std::ops::BitXor for PauliFrame {
    type Output = PauliFrame;
    fn bitxor(self, rhs: PauliFrame) -> PauliFrame {
        PauliFrame {
            x: self.x ^ rhs.x,
            z: self.z ^ rhs.z,
            qubit_count: self.qubit_count.max(rhs.qubit_count),
        }
    }
}

impl fmt::Debug for PauliFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.qubit_count)
            .map(|q| self.get(q).to_string())
            .collect();
        write!(f, "PauliFrame({s})")
    }
}
