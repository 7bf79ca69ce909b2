#![no_main]
use libfuzzer_sys::fuzz_target;
use ququart::gamma_algebra::SiteFactor;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = SiteFactor::from_label(text);
    }
});
