#![no_main]
use libfuzzer_sys::fuzz_target;
use ququart::config::{parse_override, ExperimentConfig};

const BASE: &str = "model = \"tV\"\nmapping = \"spinless_local\"\nn_steps = 1\n[parameters]\nt = 1.0\nv = 0.5\n[lattice]\nlx = 2\nly = 2\n";

// each line is one `key=value` override
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let overrides: Vec<String> = text.lines().map(str::to_string).collect();
        for o in &overrides {
            let _ = parse_override(o);
        }
        let _ = ExperimentConfig::from_toml_with_overrides(BASE, &overrides);
    }
});
