#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use semistatic::blocks::{build_block, BlockModel, BlockParams};
use semistatic::market::{PredictableStrategy, StrategyJson};
use semistatic::rational::rat;

fn block() -> &'static BlockModel {
    static BLOCK: OnceLock<BlockModel> = OnceLock::new();
    BLOCK.get_or_init(|| {
        let params = BlockParams::new(rat(1, 4), rat(2, 1), rat(9, 4), rat(11, 4)).unwrap();
        build_block(&params).unwrap()
    })
}

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = serde_json::from_slice::<StrategyJson>(data) else { return };
    let space = &block().space;
    if let Ok(h1) = PredictableStrategy::from_json(space, &doc) {
        let h2 = PredictableStrategy::from_json(space, &h1.to_json()).unwrap();
        assert_eq!(h1, h2);
    }
});
