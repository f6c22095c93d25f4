//! Radical-inverse (Halton) sequences.

/// Radical inverse of `index` in `base`: the base-`b` digits of `index`
/// mirrored across the radix point. `index ≥ 1` yields a value in (0, 1).
pub fn halton_value(index: u64, base: u64) -> f64 {
    assert!(base >= 2, "halton base must be at least 2");
    let b = base as f64;
    let mut i = index;
    let mut f = 1.0 / b;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f /= b;
    }
    r
}

/// The first `n` primes, used as Halton bases per dimension.
pub fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut candidate = 2u64;
    while primes.len() < n {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}
