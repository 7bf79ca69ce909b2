#![no_main]
use libfuzzer_sys::fuzz_target;
use ququart::mappings::MappedModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = MappedModel::from_json(text);
    }
});
