#![no_main]

use libfuzzer_sys::fuzz_target;
use regimes_core::parse_scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_scenario(text, "fuzz.json") {
        let round = serde_json::to_string(&s.file).unwrap();
        parse_scenario(&round, "fuzz.json").expect("serialized scenario must re-parse");
    }
});
