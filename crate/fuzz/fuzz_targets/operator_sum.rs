#![no_main]
use libfuzzer_sys::fuzz_target;
use ququart::gamma_algebra::OperatorSum;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = OperatorSum::from_json(text) {
            let _ = s.to_json();
        }
    }
});
