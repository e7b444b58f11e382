#![allow(dead_code)]

use covpath_core::linalg::Mat;
use covpath_core::{SpdMatrix, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `B B' + floor·I` with entries of `B` uniform in `[-1, 1]`.
pub fn random_spd(rng: &mut impl Rng, n: usize, floor: f64) -> SpdMatrix {
    let b = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let m = &b * b.transpose() + Mat::identity(n, n) * floor;
    SpdMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

pub fn random_sym(rng: &mut impl Rng, n: usize, scale: f64) -> SymMatrix {
    let b = Mat::from_fn(n, n, |_, _| rng.random_range(-scale..scale));
    SymMatrix::from_symmetric_part(&b)
}

pub fn endpoints() -> (SpdMatrix, SpdMatrix) {
    (SpdMatrix::from_diagonal(&[1.0, 0.3]).unwrap(), SpdMatrix::from_diagonal(&[0.3, 1.0]).unwrap())
}

pub fn sup_frobenius(a: &[Mat], b: &[Mat]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
