//! Problem generators: the shifted positive-semidefinite factorization
//! benchmark and small analytic problems used as test oracles.

mod analytic;
mod psf;

pub use analytic::{
    analytic_scalar_problem, AffineProblem, CorruptedGradient, CurvedProblem, ScalarProblem,
};
pub use psf::{
    generate_psf, psf_as_nsdp, psf_initial_point, read_instance, write_instance, PsfConfig,
    PsfInstance, PsfProblem,
};

/// Seeded generator used for every random quantity in this crate.
///
/// ChaCha8 is counter-based and specified bit-for-bit, so streams are
/// reproducible across platforms.
pub type BenchRng = rand_chacha::ChaCha8Rng;

pub fn rng_for(seed: u64, stream: u64) -> BenchRng {
    use rand::SeedableRng;
    let mut rng = BenchRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
