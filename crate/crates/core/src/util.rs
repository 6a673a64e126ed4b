//! Summation and lattice-enumeration helpers shared by the series modules.

use crate::scalar::Real;

/// Kahan compensated accumulator.
///
/// Keeps the long alternating lattice sums accurate to O(eps * sum|terms|)
/// independent of the term count, and is deterministic for a fixed
/// summation order.
#[derive(Clone, Copy, Debug)]
pub struct KahanSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> KahanSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum
    }
}

impl<T: Real> Default for KahanSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Visits every integer point of the box `lo[j] ..= hi[j]` in odometer
/// order (last coordinate fastest). The slice passed to the callback is a
/// reused buffer.
pub fn for_each_lattice_point(lo: &[i64], hi: &[i64], mut visit: impl FnMut(&[i64])) {
    assert_eq!(lo.len(), hi.len());
    let n = lo.len();
    if n == 0 || lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut m: Vec<i64> = lo.to_vec();
    loop {
        visit(&m);
        let mut j = n;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if m[j] < hi[j] {
                m[j] += 1;
                break;
            }
            m[j] = lo[j];
        }
    }
}

/// Minimal complex scalar over the generic real type; just enough for the
/// double-lattice Hirota sums in [`crate::field`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cplx<T> {
    pub re: T,
    pub im: T,
}

impl<T: Real> Cplx<T> {
    #[inline]
    pub fn new(re: T, im: T) -> Self {
        Self { re, im }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn one() -> Self {
        Self::new(T::one(), T::zero())
    }

    #[inline]
    pub fn from_re(re: T) -> Self {
        Self::new(re, T::zero())
    }

    /// `i * d` for real `d`.
    #[inline]
    pub fn i_times(d: T) -> Self {
        Self::new(T::zero(), d)
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Self::new(self.re * s, self.im * s)
    }

    #[inline]
    pub fn exp(self) -> Self {
        let r = self.re.exp();
        Self::new(r * self.im.cos(), r * self.im.sin())
    }

    /// Integer power by repeated multiplication (exponents here are <= 6).
    #[inline]
    pub fn powu(self, e: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc * self;
        }
        acc
    }

    #[inline]
    pub fn abs(self) -> T {
        self.re.hypot(self.im)
    }
}

impl<T: Real> std::ops::Add for Cplx<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl<T: Real> std::ops::Mul for Cplx<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}
