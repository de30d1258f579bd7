//! Normal-form reduction of time-dependent Schrödinger-type equations
//! `u_t = s i (V(t,x)|D|^M + W(t)) u` on the circle (`s = -1` by default, see
//! [`normal_form::EvolutionSign`]), built on a discrete pseudo-differential
//! calculus in the truncated Fourier basis.

pub mod diffeo_transport;
pub mod error;
pub mod harness;
pub mod normal_form;
pub mod pdo_calculus;
pub mod propagator;
pub mod torus_fourier;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Sets the number of worker threads used for independent time samples.
/// Dense linear algebra always runs sequentially so that results do not
/// depend on the thread count.
pub fn set_parallelism(threads: usize) {
    faer::set_global_parallelism(faer::Par::Seq);
    // fails only if the pool was already built, which is harmless
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build_global();
}
