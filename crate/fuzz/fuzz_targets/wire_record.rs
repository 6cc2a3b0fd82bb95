//! Wire-record decoder: must never panic, accepted records must round-trip
//! through their canonical line, and percept decoding must stay total.

#![no_main]

use brickmind::wire::{decode_percept, WireRecord};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(record) = WireRecord::parse_line(line) {
        let canonical = record.to_line();
        let again = WireRecord::parse_line(&canonical).expect("canonical line re-parses");
        assert_eq!(record, again, "round trip changed the record");
        let _ = decode_percept(&record);
    }
});
