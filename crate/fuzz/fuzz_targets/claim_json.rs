#![no_main]

use libfuzzer_sys::fuzz_target;
use semistatic::market::{ClaimJson, StaticClaim};

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = serde_json::from_slice::<ClaimJson>(data) else { return };
    if let Ok(c1) = StaticClaim::from_json(&doc) {
        let c2 = StaticClaim::from_json(&c1.to_json()).unwrap();
        assert_eq!(c1, c2);
    }
});
