//! Fuzz the JSON experiment-config parser.
//!
//! Parsing must never panic, and any accepted scenario must hash stably
//! and honour the basic validation contract.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(scenario) = noma_link::harness::parse_scenario(text) {
        assert!(scenario.trials() >= 1);
        // the canonical hash is a pure function of the parsed form
        assert_eq!(scenario.hash_hex(), scenario.hash_hex());
        assert_eq!(scenario.hash_hex().len(), 64);
    }
});
