//! Compensated accumulators so that chunked parallel reductions agree with
//! the sequential order to round-off.

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// A scalar and its gradient with respect to (beta_low, beta_up).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Acc2 {
    pub v: Neumaier,
    pub d0: Neumaier,
    pub d1: Neumaier,
}

impl Acc2 {
    #[inline]
    pub fn add(&mut self, v: f64, g: [f64; 2]) {
        self.v.add(v);
        self.d0.add(g[0]);
        self.d1.add(g[1]);
    }

    pub fn merge(&mut self, o: &Acc2) {
        self.v.merge(&o.v);
        self.d0.merge(&o.d0);
        self.d1.merge(&o.d1);
    }

    pub fn value(&self) -> f64 {
        self.v.value()
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.d0.value(), self.d1.value()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensates_cancellation() {
        let mut s = Neumaier::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }
}
