//! Script driver, workload generator, fuzzer and benchmark harness for
//! the `treematch` library.

pub mod bench;
pub mod fuzz;
pub mod script;
pub mod workload;
