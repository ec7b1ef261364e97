#![no_main]

use libfuzzer_sys::fuzz_target;
use regimes_core::AnalysisReport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = AnalysisReport::from_json(text) {
        let json = r.to_json();
        let back = AnalysisReport::from_json(&json).expect("emitted report must re-parse");
        assert_eq!(back.to_json(), json);
    }
});
