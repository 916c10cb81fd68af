//! One JSON scenario fully determines a run. The same file drives the
//! `chainrec` binary; this example parses it through the library and shows
//! what the subcommands would execute.
//!
//!   chainrec classes --config scenario.json --out reports/
//!   chainrec all     --config scenario.json --out reports/ --workers 4

use chainrec::scenario::{RunSystem, Scenario};

fn main() {
    let text = r#"{
        "schema": 1,
        "system": {"name": "north_south"},
        "grid": {"depth": 7, "delta_boxes": 2.0},
        "sampling": {"n_samples": 40, "orbit_length": 20000, "seed": 23},
        "family": {"truncation_level": 20},
        "verify": {"mass_threshold": 0.01}
    }"#;
    let path = std::env::temp_dir().join("chainrec_scenario_example.json");
    std::fs::write(&path, text).unwrap();

    let scenario = Scenario::from_path(&path).unwrap();
    match scenario.build_system().unwrap() {
        RunSystem::Map(f) => println!(
            "system: {} (dimension {}, expansion factor {:?})",
            f.name(),
            f.dimension(),
            f.expansion_factor()
        ),
        RunSystem::Shift(s) => println!("system: {} on {} symbols", s.name(), s.alphabet()),
    }
    let family = scenario.build_family(1);
    println!(
        "observable family: {} functions, modulus(0.05) = {:.3e}",
        family.len(),
        family.modulus(0.05)
    );
    println!(
        "effective seed: {} (--seed 9 would give {})",
        scenario.effective_seed(None),
        scenario.effective_seed(Some(9))
    );

    // Unknown fields fail loudly with a position instead of being ignored.
    let bad = std::env::temp_dir().join("chainrec_scenario_bad.json");
    std::fs::write(&bad, r#"{"schema": 1, "system": {"name": "doubling"}, "grd": {}}"#).unwrap();
    match Scenario::from_path(&bad) {
        Err(e) => println!("typo rejected: {e}"),
        Ok(_) => unreachable!(),
    }

    let _ = std::fs::remove_file(&path);
    let _ = std::fs::remove_file(&bad);
}
