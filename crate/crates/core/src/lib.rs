//! Privacy-preserving polynomial computation over distributed data with
//! Lagrange coded computing.
//!
//! `S` sources hold column slabs of `W`, a user holds `U`, and `N` workers
//! evaluate a polynomial `h` on Lagrange-encoded shares. Any `M` responses,
//! up to `A` of them wrong, recover `h(W^(j), U^(j))` for every block `j`,
//! and no coalition of `X` workers learns anything about `W` or `U`.
//!
//! - [`field`]: prime-field scalars, matrices and seeded sampling.
//! - [`poly`]: Lagrange bases, interpolation, Cauchy matrices.
//! - [`funcs`]: polynomial functions `h` and bilinear (Strassen) jobs.
//! - [`codec`]: encoders, worker evaluation, Reed-Solomon reconstruction.
//! - [`sim`]: deterministic protocol runs with stragglers and byzantine workers.
//! - [`audit`]: exhaustive and statistical privacy checks.

pub mod audit;
pub mod codec;
pub mod field;
pub mod funcs;
pub mod poly;
pub mod sim;
