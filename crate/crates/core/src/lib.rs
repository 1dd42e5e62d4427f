pub mod bbp;
pub mod catalog;
pub mod expr;
pub mod fixed;
pub mod golden;
pub mod phinary;
pub mod scalar;
