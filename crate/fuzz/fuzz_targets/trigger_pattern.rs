//! Trigger-pattern parser (the quoted argument of `.wait`): must never
//! panic, and accepted patterns must survive a print/re-parse round trip.

#![no_main]

use brickmind::parser::parse_trigger_pattern;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(trigger) = parse_trigger_pattern(src) {
        let printed = trigger.to_string();
        let again = parse_trigger_pattern(&printed).expect("canonical pattern re-parses");
        assert_eq!(trigger, again, "round trip changed the trigger");
    }
});
