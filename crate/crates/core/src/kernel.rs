//! Smoothing kernels supported on `[-1, 1]`.

use std::fmt;
use std::sync::Arc;

/// A nonnegative kernel with support in `[-1, 1]` together with the two
/// constants the plug-in bandwidth needs.
pub trait Kernel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn evaluate(&self, u: f64) -> f64;
    /// `∫ K(v)^2 dv`.
    fn l2_norm_sq(&self) -> f64;
    /// `∫ |K(v)| |v|^s dv`.
    fn abs_moment(&self, s: f64) -> f64;
}

/// `K(u) = 3/4 (1 - u^2)` on `[-1, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Epanechnikov;

impl Kernel for Epanechnikov {
    fn name(&self) -> &str {
        "epanechnikov"
    }

    #[inline]
    fn evaluate(&self, u: f64) -> f64 {
        if u.abs() <= 1.0 {
            0.75 * (1.0 - u * u)
        } else {
            0.0
        }
    }

    fn l2_norm_sq(&self) -> f64 {
        0.6
    }

    fn abs_moment(&self, s: f64) -> f64 {
        3.0 / ((s + 1.0) * (s + 3.0))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied kernel. Values outside `[-1, 1]` are forced to zero and
/// negative values are rejected at evaluation time by clamping to zero.
#[derive(Clone)]
pub struct CustomKernel {
    name: String,
    eval: ScalarFn,
    l2_norm_sq: f64,
    abs_moment: ScalarFn,
}

impl CustomKernel {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        l2_norm_sq: f64,
        abs_moment: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), eval: Arc::new(eval), l2_norm_sq, abs_moment: Arc::new(abs_moment) }
    }
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel").field("name", &self.name).finish_non_exhaustive()
    }
}

impl Kernel for CustomKernel {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            return 0.0;
        }
        (self.eval)(u).max(0.0)
    }

    fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    fn abs_moment(&self, s: f64) -> f64 {
        (self.abs_moment)(s)
    }
}

/// Kernel resolved from its name; only `epanechnikov` is built in.
pub fn kernel_by_name(name: &str) -> Option<Arc<dyn Kernel>> {
    match name {
        "epanechnikov" => Some(Arc::new(Epanechnikov)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn epanechnikov_constants_match_quadrature() {
        let k = Epanechnikov;
        assert!((simpson(|u| k.evaluate(u), -1.0, 1.0, 2000) - 1.0).abs() < 1e-10);
        let l2 = simpson(|u| k.evaluate(u).powi(2), -1.0, 1.0, 2000);
        assert!((l2 - k.l2_norm_sq()).abs() < 1e-10);
        for s in [0.5, 1.0, 1.7, 2.3] {
            let m = simpson(|u| k.evaluate(u) * u.abs().powf(s), -1.0, 1.0, 20000);
            assert!((m - k.abs_moment(s)).abs() < 1e-5, "s = {s}");
        }
    }

    #[test]
    fn epanechnikov_support() {
        let k = Epanechnikov;
        assert_eq!(k.evaluate(1.0001), 0.0);
        assert_eq!(k.evaluate(-3.0), 0.0);
        assert_eq!(k.evaluate(0.0), 0.75);
        assert!((k.abs_moment(0.5) - 4.0 / 7.0).abs() < 1e-15);
        assert!((k.abs_moment(1.0) - 3.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn custom_kernel_is_truncated() {
        let k = CustomKernel::new("box", |_| 0.5, 0.5, |s| 1.0 / (s + 1.0));
        assert_eq!(k.evaluate(0.3), 0.5);
        assert_eq!(k.evaluate(1.5), 0.0);
        assert_eq!(k.name(), "box");
        assert!(kernel_by_name("box").is_none());
        assert!(kernel_by_name("epanechnikov").is_some());
    }
}
