//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails. Positional arguments select
//! criteria by number or by a substring of their test name.

use std::process::ExitCode;

use conslaw_entropy::lab::acceptance::{Outcome, CHECKS};
use conslaw_entropy::lab::ExperimentConfig;

const NAMES: [&str; 11] = [
    "criterion_01_scheme_structure",
    "criterion_02_discrete_oslc",
    "criterion_03_linf_chain",
    "criterion_04_convergence_rate",
    "criterion_05_upper_bound",
    "criterion_06_separated_targets",
    "criterion_07_lower_bound",
    "criterion_08_lax_inequality",
    "criterion_09_monotone_entropy",
    "criterion_10_resolution",
    "criterion_11_closed_forms",
];

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for n in NAMES {
            println!("{n}: test");
        }
        return ExitCode::SUCCESS;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let selected = |i: usize| {
        filters.is_empty()
            || filters.iter().any(|f| {
                f.parse::<usize>()
                    .map_or(NAMES[i].contains(f.as_str()), |k| k == i + 1)
            })
    };
    let cfg = ExperimentConfig::default();
    let mut outcomes: Vec<Outcome> = Vec::new();
    for (i, check) in CHECKS.iter().enumerate() {
        if selected(i) {
            let o = check(&cfg);
            println!("{o}");
            outcomes.push(o);
        }
    }
    let failed: Vec<u8> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id)
        .collect();
    println!(
        "\nacceptance: {} passed, {} failed{}",
        outcomes.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" (criteria {failed:?})")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
