#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod comb;
pub mod cps;
pub mod error;
pub mod geom;
pub mod lattice;
pub mod piecewise;
pub mod posdef;
pub mod quad;
pub mod spectra;

pub use comb::{Atom, WeightedComb};
pub use cps::{CutProjectScheme, LatticePointRef, PairingReport, Window};
pub use error::{Error, Result};
pub use geom::BoxN;
pub use lattice::{Lattice, LatticePoint, DEFAULT_BUDGET};

/// The golden ratio `(1 + √5) / 2`.
pub const GOLDEN: f64 = 1.618_033_988_749_895;
