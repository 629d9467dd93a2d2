pub mod compact;
pub mod model;
pub mod kkt;
pub mod parallel;
pub mod alm;
pub mod bench;
