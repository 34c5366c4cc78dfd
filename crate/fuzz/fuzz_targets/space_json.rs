#![no_main]

use libfuzzer_sys::fuzz_target;
use semistatic::probspace::FiniteFilteredSpace;

fuzz_target!(|data: &str| {
    if let Ok(s1) = FiniteFilteredSpace::from_json_str(data) {
        let s2 = FiniteFilteredSpace::from_json_str(&s1.to_json_string()).unwrap();
        assert_eq!(s1, s2);
    }
});
