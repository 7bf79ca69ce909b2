#![no_main]
use libfuzzer_sys::fuzz_target;
use ququart::constraint_toric::StabilizerOperator;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(op) = StabilizerOperator::parse(text) {
            let round = StabilizerOperator::parse(&op.to_string()).expect("display output parses");
            assert_eq!(round, op);
        }
    }
});
