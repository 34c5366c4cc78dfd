pub mod blocks;
pub mod continuous;
pub mod decompose;
pub mod lp;
pub mod market;
pub mod pasting;
pub mod probspace;
pub mod rational;
