pub mod grammar;
pub mod presets;
pub mod tree;
pub mod treebank;

pub use grammar::{Lpcfg, Pcfg, StateAssignment, SymbolTable};
pub use tree::{BinTree, Tree};
