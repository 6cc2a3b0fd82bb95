//! World-spec parser: arbitrary input must produce a world or an error,
//! never a panic.

#![no_main]

use brickmind::sim::world::World;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let _ = World::parse_str(src);
});
