//! Seeded random draws used by the property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{unitarize, ComplexMatrix, HermitianOperator, UnitaryMatrix, C64};

pub type TestRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn entry(rng: &mut impl Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| entry(rng))
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> HermitianOperator {
    HermitianOperator::hermitize(&random_matrix(rng, n, n))
}

pub fn random_antihermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    random_matrix(rng, n, n).antihermitian_part()
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> UnitaryMatrix {
    loop {
        if let Ok(u) = unitarize(&random_matrix(rng, n, n)) {
            return u;
        }
    }
}

/// Uniform direction on the unit sphere.
pub fn random_direction(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}
