pub mod bdd;
pub mod engine;
pub mod instrument;
pub mod ir;
pub mod netlist;
pub mod propgen;
pub mod psl;
pub mod report;
pub mod syntax;
pub mod verilog;
