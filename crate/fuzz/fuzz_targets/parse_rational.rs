#![no_main]

use libfuzzer_sys::fuzz_target;
use semistatic::rational::{format_rational, parse_rational};

fuzz_target!(|data: &str| {
    if let Ok(v1) = parse_rational(data) {
        let v2 = parse_rational(&format_rational(&v1)).unwrap();
        assert_eq!(v1, v2);
    }
});
