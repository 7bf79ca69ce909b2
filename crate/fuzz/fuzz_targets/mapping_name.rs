#![no_main]
use libfuzzer_sys::fuzz_target;
use ququart::fermion_oracle::ModelCase;
use ququart::mappings::MappingKind;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = MappingKind::parse(text);
        let _ = ModelCase::parse(text);
    }
});
