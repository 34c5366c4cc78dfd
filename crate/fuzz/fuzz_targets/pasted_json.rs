#![no_main]

use libfuzzer_sys::fuzz_target;
use semistatic::pasting::{PastedJson, PastedModel};

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = serde_json::from_slice::<PastedJson>(data) else { return };
    // Deep models are valid but slow to rebuild; keep iterations fast.
    if doc.depth > 6 {
        return;
    }
    if let Ok(m1) = PastedModel::from_json(&doc) {
        let m2 = PastedModel::from_json(&m1.to_json()).unwrap();
        assert_eq!(m1, m2);
    }
});
