//! Per-path random streams.
//!
//! Every path owns three ChaCha8 streams derived from `(master, index)`: Gaussian
//! increments, jump arrivals/sizes and initial-segment draws. Jump streams do not
//! depend on the step size, so refining `h` keeps the jump times of a path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PathSeed {
    pub master: u64,
    pub index: u64,
}

impl PathSeed {
    pub fn new(master: u64, index: u64) -> Self {
        PathSeed { master, index }
    }

    fn stream(&self, which: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index.wrapping_mul(3).wrapping_add(which));
        rng
    }

    pub fn gaussian(&self) -> ChaCha8Rng {
        self.stream(0)
    }

    pub fn jumps(&self) -> ChaCha8Rng {
        self.stream(1)
    }

    pub fn initial(&self) -> ChaCha8Rng {
        self.stream(2)
    }
}

impl From<u64> for PathSeed {
    fn from(master: u64) -> Self {
        PathSeed { master, index: 0 }
    }
}
