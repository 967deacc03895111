//! Compensated (twice working precision) dot products.
//!
//! Used where an `f64` sum cancels too much to be trusted, e.g. the Riccati
//! defect `A^T P + P A - P S P + Q` when `P` is large.

/// `a + b = s + e` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Accumulates products with an error term carried alongside the sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dot2 {
    sum: f64,
    err: f64,
}

impl Dot2 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.sum, x);
        self.sum = s;
        self.err += e;
    }

    pub fn add_product(&mut self, x: f64, y: f64) {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let (s, e) = two_sum(self.sum, p);
        self.sum = s;
        self.err += e + pe;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.err
    }

    /// The accumulated value as an unevaluated pair `hi + lo`.
    pub fn split(&self) -> (f64, f64) {
        two_sum(self.sum, self.err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let mut d = Dot2::new();
        d.add(1e16);
        d.add(1.0);
        d.add(-1e16);
        assert_eq!(d.value(), 1.0);

        let x = 1.0 + f64::EPSILON;
        let mut d = Dot2::new();
        d.add_product(x, x);
        d.add(-1.0);
        d.add(-2.0 * f64::EPSILON);
        assert_eq!(d.value(), f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn split_is_exact_sum() {
        let mut d = Dot2::new();
        d.add(1.0);
        d.add(1e-20);
        let (hi, lo) = d.split();
        assert_eq!(hi, 1.0);
        assert_eq!(lo, 1e-20);
    }
}
