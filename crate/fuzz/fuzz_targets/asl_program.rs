//! Agent-program parser: must never panic, and every accepted program must
//! survive a print/re-parse round trip unchanged.

#![no_main]

use brickmind::parser::parse_agent_program;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(program) = parse_agent_program(src) {
        let printed = program.to_source();
        let again = parse_agent_program(&printed).expect("canonical source re-parses");
        assert_eq!(program, again, "round trip changed the program");
    }
});
