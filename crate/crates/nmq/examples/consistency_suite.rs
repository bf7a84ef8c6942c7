//! Run the full cross-engine consistency suite on the reference model over a
//! step-size sweep and print one verdict line per check.

use nmq::harness::{consistency_suite, has_failures, SuiteConfig, Tolerances};
use nmq::models::{reference_init, reference_model};

fn main() -> nmq::Result<()> {
    let spec = reference_model();
    let init = reference_init();
    let config = SuiteConfig {
        master_seed: 12,
        dt_list: vec![4e-3, 2e-3, 1e-3],
        horizon: 1.0,
        n_traj: 100,
        fault: None,
    };
    let reports = consistency_suite(&spec, &init, &config, &Tolerances::default())?;
    for r in &reports {
        println!("{}", r.one_line());
    }
    println!("{}", if has_failures(&reports) { "suite FAILED" } else { "suite passed" });
    Ok(())
}
