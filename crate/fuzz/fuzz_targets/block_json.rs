#![no_main]

use libfuzzer_sys::fuzz_target;
use semistatic::blocks::{BlockJson, BlockModel};

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = serde_json::from_slice::<BlockJson>(data) else { return };
    if let Ok(m1) = BlockModel::from_json(&doc) {
        let m2 = BlockModel::from_json(&m1.to_json()).unwrap();
        assert_eq!(m1, m2);
    }
});
