#![no_main]
use libfuzzer_sys::fuzz_target;
use ququart::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::from_toml(text) {
            let _ = cfg.validate();
            let _ = cfg.to_toml();
        }
    }
});
