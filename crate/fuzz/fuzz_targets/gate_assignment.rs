#![no_main]
use libfuzzer_sys::fuzz_target;
use ququart::constraint_toric::GateAssignment;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(a) = GateAssignment::parse(text) {
            let round = GateAssignment::parse(&a.to_text()).expect("canonical text parses");
            assert_eq!(round, a);
        }
    }
});
