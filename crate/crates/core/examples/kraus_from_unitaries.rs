//! The bidiagonal Kraus pair against operators built from the full
//! atom-field unitaries.
//!
//! cargo run --example kraus_from_unitaries

use cqed_tomo::measurement::{build_kraus, kraus_from_unitaries, InteractionParams, Outcome};

fn main() -> cqed_tomo::Result<()> {
    for (lt, phi, dim) in [(0.04, -2.356, 8), (0.3, 1.0, 16), (1.2, 0.0, 24)] {
        let p = InteractionParams::new(lt, phi, dim)?;
        let fast = build_kraus(p);
        let full = kraus_from_unitaries(p);
        // Kraus operators are fixed only up to a phase; POVM elements are not.
        let diff = [Outcome::Lower, Outcome::Upper]
            .iter()
            .map(|&o| (fast.povm_element(o) - full.povm_element(o)).camax())
            .fold(0.0, f64::max);
        println!(
            "lambda_tau={lt} phi={phi} D={dim}: max |E - E_unitary| = {diff:.2e}, completeness defect {:.2e}",
            fast.completeness_defect()
        );
    }
    Ok(())
}
