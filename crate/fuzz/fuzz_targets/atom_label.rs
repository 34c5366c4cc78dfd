#![no_main]

use libfuzzer_sys::fuzz_target;
use semistatic::probspace::AtomLabel;

fuzz_target!(|data: &str| {
    if let Ok(l1) = data.parse::<AtomLabel>() {
        let l2: AtomLabel = l1.to_string().parse().unwrap();
        assert_eq!(l1, l2);
    }
});
