#![no_main]

use libfuzzer_sys::fuzz_target;
use regimes_core::expr::parse_expression;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(e) = parse_expression(text, 8) {
        let printed = e.to_string();
        let again = parse_expression(&printed, 8).expect("printed expression must re-parse");
        assert_eq!(again.to_string(), printed);
        let _ = e.eval(&[0.5; 8]);
    }
});
