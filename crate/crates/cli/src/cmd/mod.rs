pub mod compare;
pub mod diagnose;
pub mod gen;
pub mod precond;
pub mod solve;
pub mod validate;
