//! Verify every autodiff primitive and the composed objective against
//! central finite differences.
//!
//! ```bash
//! cargo run --release -p cgib --example gradient_check
//! ```

use cgib::gradcheck::{full_suite, TOLERANCE};

fn main() -> cgib::Result<()> {
    let results = full_suite(0, 25, 5)?;
    println!("{:<22} {:>12}  status", "check", "max_rel_err");
    let mut all = true;
    for r in &results {
        all &= r.passed();
        println!(
            "{:<22} {:>12.3e}  {}",
            r.name,
            r.max_rel_err,
            if r.passed() { "pass" } else { "FAIL" }
        );
    }
    println!(
        "\n{} checks, tolerance {TOLERANCE:.0e}: {}",
        results.len(),
        if all { "all passed" } else { "FAILURES" }
    );
    Ok(())
}
