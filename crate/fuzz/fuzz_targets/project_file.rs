//! Project-file parser: arbitrary input must produce a config or an error,
//! never a panic.

#![no_main]

use brickmind::parser::parse_project_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let _ = parse_project_str(src);
});
