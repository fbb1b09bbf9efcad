pub mod splines;
pub mod screening;
pub mod datagen;
pub mod solver;
pub mod harness;
pub mod io;
