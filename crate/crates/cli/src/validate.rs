//! The `validate` command: runs the library self-checks.

use std::io::Write;

use anyhow::Result;
use berkcal::checks::{run_all, CheckOutcome};

use crate::ChecksFailed;

pub fn write_outcomes(outcomes: &[CheckOutcome], out: &mut dyn Write) -> Result<()> {
    for c in outcomes {
        writeln!(out, "{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    let failed = outcomes.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} of {} checks passed", outcomes.len() - failed, outcomes.len())?;
    Ok(())
}

pub fn validate_command(fast: bool, out: &mut dyn Write) -> Result<()> {
    let outcomes = run_all(fast);
    write_outcomes(&outcomes, out)?;
    match outcomes.iter().filter(|c| !c.passed).count() {
        0 => Ok(()),
        n => Err(ChecksFailed(n).into()),
    }
}
