//! In-place fast Walsh–Hadamard transform.
//!
//! `out[y] = sum_x in[x] * (-1)^{popcount(x & y)}`, unnormalised.

use core::ops::{Add, Sub};

pub fn fwht<T>(data: &mut [T])
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    let n = data.len();
    assert!(n.is_power_of_two(), "transform length must be a power of two");
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}
