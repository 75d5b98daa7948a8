//! Positive maps, lattice states and exact PPT certificates for N+N qubit systems.
//!
//! The crate has two independent layers:
//!
//! - an exact combinatorial layer ([`lattice`], [`states`], [`enumerate`]) that decides
//!   positivity under partial transposition for Bell-diagonal *lattice states* with
//!   integer arithmetic, and evaluates map witnesses as exact rationals;
//! - a dense layer ([`dense`], [`maps`]) built on complex matrices that acts as a
//!   brute-force oracle for everything the exact layer claims.
//!
//! [`certificate`] ties both together: a certificate records that a state is PPT and that
//! a positive map takes a negative value on it, which proves the state bound entangled and
//! the map non-decomposable.
//!
//! ```
//! use latppt::{lattice::{LatticeShape, MultiIndex}, maps, states, certificate};
//!
//! let shape = LatticeShape::new(1, 1).unwrap();
//! let beta0 = MultiIndex::new(vec![2]).unwrap();
//! let set = states::build_ibe(shape, &beta0).unwrap();
//! let state = states::LatticeState::from_set(&set).unwrap();
//! let map = maps::lambda_beta0(shape, &beta0).unwrap();
//! let cert = certificate::certify_pptes(&state, &map, &Default::default()).unwrap();
//! assert_eq!(cert.verdict, certificate::Verdict::Pptes);
//! assert_eq!(cert.witness.to_string(), "-1/40");
//! ```

pub mod certificate;
pub mod dense;
pub mod enumerate;
pub mod error;
pub mod lattice;
pub mod maps;
pub mod scalar;
pub mod states;

pub use error::{Error, Result};
pub use scalar::{Coefficient, Real};

/// Exact rational used for J-spectra, witnesses and exact map coefficients.
pub type Rational = num_rational::Ratio<i64>;

/// Double-precision complex scalar.
pub type Complex64 = num_complex::Complex<f64>;

/// Double-precision dense complex matrix.
pub type ComplexMatrix = dense::CMatrix<f64>;
/// Single-precision dense complex matrix.
pub type ComplexMatrix32 = dense::CMatrix<f32>;
/// Double-precision state vector.
pub type StateVector = dense::CVector<f64>;

/// Map with exact rational coefficients (the kind certificates are built from).
pub type ExactMap = maps::MapRep<Rational>;
/// Map with floating coefficients.
pub type FloatMap = maps::MapRep<f64>;

/// Version string embedded in certificates.
pub const TOOL_VERSION: &str = concat!("latppt ", env!("CARGO_PKG_VERSION"));
