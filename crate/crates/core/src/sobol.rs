//! Two-dimensional Sobol sequence for low-discrepancy truth sampling.
//!
//! Gray-code construction with the standard direction numbers: dimension one
//! is the van der Corput sequence in base 2, dimension two uses the
//! primitive polynomial x² + x + 1 with initial values m = (1, 3).

const BITS: usize = 52;

/// Iterator over 2-D Sobol points in [0, 1)².
pub struct Sobol2 {
    index: u64,
    state: [u64; 2],
    dirs: [[u64; BITS]; 2],
}

impl Sobol2 {
    pub fn new() -> Self {
        let mut dirs = [[0u64; BITS]; 2];
        for (j, d) in dirs[0].iter_mut().enumerate() {
            *d = 1u64 << (BITS - 1 - j);
        }
        let mut m = [0u64; BITS];
        m[0] = 1;
        m[1] = 3;
        for j in 2..BITS {
            m[j] = (2 * m[j - 1]) ^ (4 * m[j - 2]) ^ m[j - 2];
        }
        for j in 0..BITS {
            dirs[1][j] = m[j] << (BITS - 1 - j);
        }
        Sobol2 {
            index: 0,
            state: [0, 0],
            dirs,
        }
    }
}

impl Default for Sobol2 {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for Sobol2 {
    type Item = [f64; 2];

    fn next(&mut self) -> Option<[f64; 2]> {
        let point = [
            self.state[0] as f64 / (1u64 << BITS) as f64,
            self.state[1] as f64 / (1u64 << BITS) as f64,
        ];
        let c = self.index.trailing_ones() as usize;
        self.state[0] ^= self.dirs[0][c];
        self.state[1] ^= self.dirs[1][c];
        self.index += 1;
        Some(point)
    }
}
