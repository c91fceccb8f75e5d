//! Parameter sweep through the scenario front end, written as CSV to stdout.

use sldkit::cli::{run_sweep, write_sweep_csv, Scenario};

fn main() -> sldkit::Result<()> {
    let scenario = Scenario::from_json(
        r#"{
            "family": {"kind": "single_mode_gaussian", "r": 0.5, "parameter": "rotation"},
            "method": "moments",
            "sweep": {"from": 0.0, "to": 1.0, "steps": 11, "variable": "r"}
        }"#,
    )?;
    let rows = run_sweep(&scenario).map_err(|f| f.error)?;
    write_sweep_csv(std::io::stdout().lock(), &scenario, &rows)
}
