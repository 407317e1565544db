#![allow(dead_code, clippy::needless_range_loop)]

pub mod oracle;
