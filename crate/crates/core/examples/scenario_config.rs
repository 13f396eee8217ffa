// Scenario files: defaults, a partial TOML override, and the error for an
// out-of-range value.

use gmphd_sat::config::{InitialEstimate, ScenarioConfig};

pub fn run_example() -> gmphd_sat::Result<()> {
    let text = r#"
name = "under-estimate"
clutter_rate = 0.2
estimate = "under"

[planner]
strategy = "largest_gaussian"
"#;
    let cfg = ScenarioConfig::from_toml(text)?;
    assert_eq!(cfg.estimate, InitialEstimate::Under);
    println!("{}", cfg.to_toml()?);

    match ScenarioConfig::from_toml("clutter_rate = -0.1") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("config example failed");
}
