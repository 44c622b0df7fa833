//! Built-in structural checks run by the `selftest` command.

use crate::circuit::{
    build_encoder, build_syndrome_round, verify_encoder, AncillaKind, Network, SyndromeNetwork,
    VERIFY_QUBIT,
};
use crate::codebook::{self, ideal_recovery, ErrorVector, SectorClass};
use crate::engine::certify_single_faults;
use crate::noise::SiteTable;
use crate::pauli::PauliFrame;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

fn codebook_partition() -> Check {
    let mut sizes = [0usize; 4];
    for e in ErrorVector::all() {
        sizes[codebook::classify(e).index()] += 1;
    }
    check(
        "codebook-partition",
        sizes == [8, 56, 56, 8],
        format!("class sizes {sizes:?}"),
    )
}

fn codebook_recovery() -> Check {
    let mut bad = Vec::new();
    for e in ErrorVector::all() {
        let w = e.weight();
        let out = ideal_recovery(e, ErrorVector::ZERO);
        let expect_logical = match w {
            0 | 1 => false,
            2 => true,
            3 => codebook::is_in_c(e),
            _ => continue,
        };
        let logical = out.x_class == SectorClass::Logical;
        if logical != expect_logical {
            bad.push(e.to_string());
        }
    }
    check(
        "codebook-recovery",
        bad.is_empty(),
        if bad.is_empty() {
            "weight ≤ 3 outcomes as expected".to_string()
        } else {
            format!("wrong outcome for {}", bad.join(","))
        },
    )
}

fn encoder() -> Check {
    let enc = build_encoder();
    let ok = enc.validate().is_ok() && verify_encoder(&enc);
    check("encoder", ok, format!("{} steps", enc.steps.len()))
}

fn census(recovery: &SyndromeNetwork) -> [Check; 2] {
    let round = build_syndrome_round().census();
    let full = recovery.census();
    [
        check(
            "round-census",
            round.data_cnot_count == 24,
            format!("{} data CNOTs per round", round.data_cnot_count),
        ),
        check(
            "recovery-census",
            full.data_cnot_count == 72 && full.data_exposure_steps == 19,
            format!(
                "{} data CNOTs, {} exposure steps",
                full.data_cnot_count, full.data_exposure_steps
            ),
        ),
    ]
}

/// Every single fault in a preparation either trips the verification or
/// leaves at most one spreading error on the cat (up to the all-ones word).
pub fn prep_spreads_at_most_one(prep: &Network, kind: AncillaKind) -> Result<(), String> {
    for site in SiteTable::of(prep).all() {
        for faults in site.faults() {
            let mut frame = PauliFrame::new(prep.qubit_count).map_err(|e| e.to_string())?;
            let flips = prep.execute(&mut frame, &faults);
            if (flips >> VERIFY_QUBIT) & 1 == 1 {
                continue;
            }
            // X on a phase cat and Z on a Shor state are the errors that reach the data
            let mask = match kind {
                AncillaKind::PhaseSyndrome => frame.x_mask(),
                AncillaKind::BitSyndrome => frame.z_mask(),
            } & 0b1111;
            let w = mask.count_ones();
            if w.min(4 - w) > 1 {
                return Err(format!(
                    "{kind:?}: fault {faults:?} at step {} passes with {w} spreading errors",
                    site.step
                ));
            }
        }
    }
    Ok(())
}

fn ancilla_verification(recovery: &SyndromeNetwork) -> Check {
    let result = prep_spreads_at_most_one(&recovery.phase_prep, AncillaKind::PhaseSyndrome)
        .and_then(|_| prep_spreads_at_most_one(&recovery.bit_prep, AncillaKind::BitSyndrome));
    match result {
        Ok(()) => check("ancilla-verification", true, "no single fault spreads"),
        Err(e) => check("ancilla-verification", false, e),
    }
}

fn certification(recovery: &SyndromeNetwork) -> Check {
    match certify_single_faults(recovery) {
        Ok(c) => {
            let detail = match c.failures.first() {
                None => format!("{} single faults, none fatal", c.checked),
                Some(f) => format!(
                    "{} of {} single faults fatal, first {:?} at stage {} step {}",
                    c.failures.len(),
                    c.checked,
                    f.faults,
                    f.site.stage,
                    f.site.step
                ),
            };
            check("single-fault-certification", c.passed(), detail)
        }
        Err(e) => check("single-fault-certification", false, e.to_string()),
    }
}

/// Runs every check against `recovery`.
pub fn run_selftest(recovery: &SyndromeNetwork) -> Vec<Check> {
    let mut out = vec![codebook_partition(), codebook_recovery(), encoder()];
    out.extend(census(recovery));
    out.push(ancilla_verification(recovery));
    out.push(certification(recovery));
    out
}
