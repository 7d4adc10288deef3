pub mod combinatorics;
pub mod enumeration;
pub mod error;
pub mod gf2;
pub mod maxent;
pub mod moments;
pub mod params;
mod solve;
pub mod subspace;
