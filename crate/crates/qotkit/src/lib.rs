//! Optimal transport of quantum states, with classical baselines.
//!
//! The crate computes two transport costs between density operators and the
//! machinery they need:
//!
//! - a quadratic channel-cost distance: the cheapest quantum coupling of two
//!   states under a cost operator built from a list of observables
//!   ([`quadratic`]);
//! - the order-1 Wasserstein norm on states of `n` qubits, together with its
//!   dual Lipschitz-constant formulation ([`w1`]);
//! - classical Kantorovich transport, total variation, Hellinger, and
//!   relative entropy on finite probability spaces ([`classical`]);
//! - density operators, Kraus channels, quantum couplings, purification, and
//!   seeded random ensembles ([`quantum`]);
//! - randomized verification suites for the transport inequalities the
//!   toolkit is built around ([`verify`]).
//!
//! Everything runs on a self-contained dense stack: complex Hermitian
//! eigendecomposition ([`linalg`]) and a primal-dual interior-point solver
//! for semidefinite and linear conic programs ([`conic`]). No external BLAS,
//! LAPACK, or solver library is used, and every computation is deterministic
//! given its inputs and seeds.

pub mod classical;
pub mod conic;
pub mod error;
pub mod linalg;
pub mod quadratic;
pub mod quantum;
pub mod verify;
pub mod w1;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, FactorShape, HermitianEig};
