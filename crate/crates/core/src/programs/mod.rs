//! Built-in SPMD programs. Each file holds one program whose source is the
//! same for every rank count.

pub mod ghz;
pub mod hello;
