#![no_main]

use libfuzzer_sys::fuzz_target;
use semistatic::lp::text::{dump, parse};

fuzz_target!(|data: &str| {
    if let Ok(lp1) = parse(data) {
        let lp2 = parse(&dump(&lp1)).unwrap();
        assert_eq!(lp1, lp2);
    }
});
