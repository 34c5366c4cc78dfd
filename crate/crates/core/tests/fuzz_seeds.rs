//! Replays the checked-in fuzz corpus seeds through the same round trips the
//! fuzz targets assert, so they stay valid inputs on the stable toolchain.

use std::fs;
use std::path::PathBuf;

use semistatic::blocks::{build_block, BlockJson, BlockModel, BlockParams};
use semistatic::lp::text::{dump, parse};
use semistatic::market::{ClaimJson, PredictableStrategy, StaticClaim, StrategyJson};
use semistatic::pasting::{PastedJson, PastedModel};
use semistatic::probspace::{AtomLabel, FiniteFilteredSpace};
use semistatic::rational::{format_rational, parse_rational, rat};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            let text = fs::read_to_string(&path).unwrap();
            (path, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn rational_seeds() {
    for (path, text) in seeds("parse_rational") {
        let v = parse_rational(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_rational(&format_rational(&v)).unwrap(), v);
    }
}

#[test]
fn atom_label_seeds() {
    for (path, text) in seeds("atom_label") {
        let l: AtomLabel = text.parse().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(l.to_string().parse::<AtomLabel>().unwrap(), l);
    }
}

#[test]
fn space_seeds() {
    for (path, text) in seeds("space_json") {
        let s = FiniteFilteredSpace::from_json_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(FiniteFilteredSpace::from_json_str(&s.to_json_string()).unwrap(), s);
    }
}

#[test]
fn strategy_seeds() {
    let params = BlockParams::new(rat(1, 4), rat(2, 1), rat(9, 4), rat(11, 4)).unwrap();
    let block = build_block(&params).unwrap();
    for (path, text) in seeds("strategy_json") {
        let doc: StrategyJson = serde_json::from_str(&text).unwrap();
        let h =
            PredictableStrategy::from_json(&block.space, &doc).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(PredictableStrategy::from_json(&block.space, &h.to_json()).unwrap(), h);
    }
}

#[test]
fn claim_seeds() {
    for (path, text) in seeds("claim_json") {
        let doc: ClaimJson = serde_json::from_str(&text).unwrap();
        let c = StaticClaim::from_json(&doc).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(StaticClaim::from_json(&c.to_json()).unwrap(), c);
    }
}

#[test]
fn block_seeds() {
    for (path, text) in seeds("block_json") {
        let doc: BlockJson = serde_json::from_str(&text).unwrap();
        let m = BlockModel::from_json(&doc).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(BlockModel::from_json(&m.to_json()).unwrap(), m);
    }
}

#[test]
fn pasted_seeds() {
    for (path, text) in seeds("pasted_json") {
        let doc: PastedJson = serde_json::from_str(&text).unwrap();
        let m = PastedModel::from_json(&doc).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(PastedModel::from_json(&m.to_json()).unwrap(), m);
    }
}

#[test]
fn lp_text_seeds() {
    for (path, text) in seeds("lp_text") {
        let lp = parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse(&dump(&lp)).unwrap(), lp);
    }
}
