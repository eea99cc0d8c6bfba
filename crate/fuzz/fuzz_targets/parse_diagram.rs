#![no_main]

use atom_diode::sweep::{format_diagram, parse_diagram};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = parse_diagram(text) {
        if let Ok(out) = format_diagram(&d) {
            let again = parse_diagram(&out).expect("formatted diagram parses");
            assert_eq!(format_diagram(&again).unwrap(), out);
        }
    }
});
