//! Truncated power series in the three mode coordinates, dense up to total
//! degree `MAX_DEGREE`. Used to expand the circuit energy symbolically-free.

use std::sync::OnceLock;

pub const MAX_DEGREE: usize = 8;

struct Table {
    monos: Vec<[u8; 3]>,
    // index[i][j][k] for i + j + k <= MAX_DEGREE
    index: Vec<usize>,
    // (p, q, r): coefficient r += c[p] * c[q]
    products: Vec<(u16, u16, u16)>,
}

const D1: usize = MAX_DEGREE + 1;

fn slot(i: usize, j: usize, k: usize) -> usize {
    (i * D1 + j) * D1 + k
}

fn table() -> &'static Table {
    static T: OnceLock<Table> = OnceLock::new();
    T.get_or_init(|| {
        let mut monos = Vec::new();
        for d in 0..=MAX_DEGREE {
            for i in (0..=d).rev() {
                for j in (0..=d - i).rev() {
                    monos.push([i as u8, j as u8, (d - i - j) as u8]);
                }
            }
        }
        let mut index = vec![usize::MAX; D1 * D1 * D1];
        for (n, m) in monos.iter().enumerate() {
            index[slot(m[0] as usize, m[1] as usize, m[2] as usize)] = n;
        }
        let mut products = Vec::new();
        for (p, a) in monos.iter().enumerate() {
            for (q, b) in monos.iter().enumerate() {
                let d = (a[0] + a[1] + a[2] + b[0] + b[1] + b[2]) as usize;
                if d <= MAX_DEGREE {
                    let r = index[slot(
                        (a[0] + b[0]) as usize,
                        (a[1] + b[1]) as usize,
                        (a[2] + b[2]) as usize,
                    )];
                    products.push((p as u16, q as u16, r as u16));
                }
            }
        }
        Table { monos, index, products }
    })
}

pub fn n_terms() -> usize {
    table().monos.len()
}

pub fn monomials() -> &'static [[u8; 3]] {
    &table().monos
}

pub fn index_of(i: usize, j: usize, k: usize) -> Option<usize> {
    if i + j + k > MAX_DEGREE {
        return None;
    }
    Some(table().index[slot(i, j, k)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub c: Vec<f64>,
}

impl Jet {
    pub fn zero() -> Self {
        Self { c: vec![0.0; n_terms()] }
    }

    pub fn constant(v: f64) -> Self {
        let mut j = Self::zero();
        j.c[0] = v;
        j
    }

    /// The coordinate `x_k` itself.
    pub fn var(k: usize) -> Self {
        let mut e = [0usize; 3];
        e[k] = 1;
        let mut j = Self::zero();
        j.c[index_of(e[0], e[1], e[2]).unwrap()] = 1.0;
        j
    }

    pub fn coeff(&self, i: usize, j: usize, k: usize) -> f64 {
        index_of(i, j, k).map_or(0.0, |n| self.c[n])
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { c: self.c.iter().map(|a| a * s).collect() }
    }

    pub fn axpy(&mut self, s: f64, o: &Jet) {
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            *a += s * b;
        }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let mut out = vec![0.0; self.c.len()];
        for &(p, q, r) in &table().products {
            let a = self.c[p as usize];
            if a != 0.0 {
                out[r as usize] += a * o.c[q as usize];
            }
        }
        Jet { c: out }
    }

    /// `sum_k s[k] * self^k` by Horner. `self` should have zero constant term
    /// for the truncation to be exact.
    pub fn compose(&self, s: &[f64]) -> Jet {
        let mut acc = Jet::constant(*s.last().unwrap_or(&0.0));
        for &sk in s.iter().rev().skip(1) {
            acc = acc.mul(self);
            acc.c[0] += sk;
        }
        acc
    }

    /// Drops all terms above total degree `n`.
    pub fn truncate(&self, n: usize) -> Jet {
        let mut out = self.clone();
        for (v, m) in out.c.iter_mut().zip(monomials()) {
            if (m[0] + m[1] + m[2]) as usize > n {
                *v = 0.0;
            }
        }
        out
    }

    /// Partial derivative in coordinate `k` (degree drops by one).
    pub fn partial(&self, k: usize) -> Jet {
        let mut out = Jet::zero();
        for (n, m) in monomials().iter().enumerate() {
            let e = m[k] as usize;
            if e == 0 || self.c[n] == 0.0 {
                continue;
            }
            let mut d = [m[0] as usize, m[1] as usize, m[2] as usize];
            d[k] -= 1;
            out.c[index_of(d[0], d[1], d[2]).unwrap()] += e as f64 * self.c[n];
        }
        out
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let mut pw = [[1.0; D1]; 3];
        for v in 0..3 {
            for d in 1..D1 {
                pw[v][d] = pw[v][d - 1] * x[v];
            }
        }
        self.c
            .iter()
            .zip(monomials())
            .map(|(c, m)| c * pw[0][m[0] as usize] * pw[1][m[1] as usize] * pw[2][m[2] as usize])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn term_count() {
        // binomial(8 + 3, 3)
        assert_eq!(n_terms(), 165);
    }

    #[test]
    fn product_and_eval_agree() {
        let x = Jet::var(0).add(&Jet::var(1).scale(2.0)).add(&Jet::constant(0.5));
        let y = Jet::var(2).sub(&Jet::var(0).scale(0.3));
        let p = x.mul(&y);
        let pt = [0.3, -0.2, 0.7];
        assert!((p.eval(pt) - x.eval(pt) * y.eval(pt)).abs() < 1e-14);
    }

    #[test]
    fn compose_exp_series() {
        // exp(t) with t = 0.1 x0 + 0.2 x1; eval well inside radius, truncated at 8
        let t = Jet::var(0).scale(0.1).add(&Jet::var(1).scale(0.2));
        let mut s = vec![1.0];
        for k in 1..=MAX_DEGREE {
            let prev = s[k - 1];
            s.push(prev / k as f64);
        }
        let e = t.compose(&s);
        let pt = [0.5, 0.5, 0.0];
        // remainder of the degree-8 truncation is 0.15^9 / 9!
        assert!((e.eval(pt) - (0.15f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn partial_of_monomial() {
        let x = Jet::var(0);
        let y = Jet::var(1);
        let m = x.mul(&x).mul(&x).mul(&y); // x^3 y
        let d = m.partial(0);
        assert_eq!(d.coeff(2, 1, 0), 3.0);
        assert_eq!(m.truncate(3), Jet::zero());
    }
}
