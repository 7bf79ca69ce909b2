#![no_main]
use libfuzzer_sys::fuzz_target;
use ququart::statevector::QuditState;

// sidecar JSON up to the first NUL, amplitude bytes after it
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let Ok(sidecar) = std::str::from_utf8(&data[..split]) else {
        return;
    };
    let bytes = data.get(split + 1..).unwrap_or(&[]);
    let _ = QuditState::decode_snapshot(bytes, sidecar);
});
