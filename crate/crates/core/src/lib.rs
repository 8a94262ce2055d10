pub mod ratlin;
pub mod liedata;
pub mod pbw;
pub mod walg;
pub mod trans;
pub mod hw;
pub mod brst;
