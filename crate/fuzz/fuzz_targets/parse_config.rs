#![no_main]

use atom_diode::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::parse(text) {
        // anything accepted must survive a round trip
        let again = RunConfig::parse(&cfg.emit()).expect("emitted config parses");
        assert_eq!(again.emit(), cfg.emit());
        let _ = cfg.scheme_config();
    }
});
