#![allow(dead_code)]

pub mod rs_oracle;
pub mod oracles;
