//! Sparse two-tone Fourier series graded by perturbative order.
//!
//! A real signal is stored two-sided: the entry at `(m, n, k)` is the complex
//! amplitude of `e^{-i (m w_s + n w_p) t}` at order `k`, and the entry at
//! `(-m, -n, k)` holds its conjugate.

use std::collections::BTreeMap;

use num_complex::Complex64;

pub type Key = (i32, i32, u8);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Series(pub BTreeMap<Key, Complex64>);

impl Series {
    pub fn one() -> Self {
        let mut s = Series::default();
        s.0.insert((0, 0, 0), Complex64::new(1.0, 0.0));
        s
    }

    /// Adds `v e^{-i w t} + c.c.` at tone `(m, n)` and order `k`.
    pub fn add_real(&mut self, m: i32, n: i32, k: u8, v: Complex64) {
        if m == 0 && n == 0 {
            *self.0.entry((0, 0, k)).or_default() += 2.0 * v.re;
            return;
        }
        *self.0.entry((m, n, k)).or_default() += v;
        *self.0.entry((-m, -n, k)).or_default() += v.conj();
    }

    pub fn get(&self, m: i32, n: i32, k: u8) -> Complex64 {
        self.0.get(&(m, n, k)).copied().unwrap_or_default()
    }

    /// Product truncated to orders `<= max_order`.
    pub fn mul(&self, o: &Series, max_order: u8) -> Series {
        let mut out = BTreeMap::new();
        for (&(m1, n1, k1), &x) in &self.0 {
            for (&(m2, n2, k2), &y) in &o.0 {
                if k1 + k2 > max_order {
                    continue;
                }
                *out.entry((m1 + m2, n1 + n2, k1 + k2)).or_insert(Complex64::default()) += x * y;
            }
        }
        Series(out)
    }

    /// Single coefficient of `self * o` without forming the product.
    pub fn project(&self, o: &Series, m: i32, n: i32, k: u8) -> Complex64 {
        let mut acc = Complex64::default();
        for (&(m1, n1, k1), &x) in &self.0 {
            if k1 > k {
                continue;
            }
            if let Some(y) = o.0.get(&(m - m1, n - n1, k - k1)) {
                acc += x * y;
            }
        }
        acc
    }

    /// `[1, s, s^2, ..., s^deg]`.
    pub fn powers(&self, deg: usize, max_order: u8) -> Vec<Series> {
        let mut p = vec![Series::one()];
        for i in 1..=deg {
            let next = p[i - 1].mul(self, max_order);
            p.push(next);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_cosines() {
        // (2 cos x)^2 = 2 + 2 cos 2x
        let mut s = Series::default();
        s.add_real(1, 0, 1, Complex64::new(1.0, 0.0));
        let sq = s.mul(&s, 4);
        assert_eq!(sq.get(0, 0, 2), Complex64::new(2.0, 0.0));
        assert_eq!(sq.get(2, 0, 2), Complex64::new(1.0, 0.0));
        assert_eq!(sq.project(&s, 1, 0, 3), s.powers(3, 4)[3].get(1, 0, 3));
        assert!(s.mul(&s, 1).0.is_empty());
    }
}
