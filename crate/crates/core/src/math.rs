//! Thin wrappers over `libm` so the numerical code reads like ordinary `f64` math.

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

/// `(1 - x)^p` for `x ∈ [0, 1]`, accurate when `x` is tiny.
#[inline]
pub fn one_minus_pow(x: f64, p: f64) -> f64 {
    if x >= 1.0 {
        if p == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        exp(p * log1p(-x))
    }
}

/// `1 - (1 - x)^p` without cancellation for small `x`.
#[inline]
pub fn one_minus_one_minus_pow(x: f64, p: f64) -> f64 {
    if x >= 1.0 {
        if p == 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        -expm1(p * log1p(-x))
    }
}

/// Solve `cdf(x) = u` for a nondecreasing `cdf` on `[lo, hi]` with density
/// `pdf`, using Newton steps safeguarded by bisection.
pub fn invert_monotone<F, P>(cdf: F, pdf: P, u: f64, mut lo: f64, mut hi: f64, x0: f64) -> f64
where
    F: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let mut x = x0.clamp(lo, hi);
    for _ in 0..200 {
        let fx = cdf(x) - u;
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1e-300) {
            break;
        }
        let d = pdf(x);
        if d > 0.0 {
            let step = fx / d;
            if step.abs() <= 1e-15 * (1.0 + x.abs()) {
                return (x - step).clamp(lo, hi);
            }
            let newton = x - step;
            if newton > lo && newton < hi {
                x = newton;
                continue;
            }
        }
        x = 0.5 * (lo + hi);
    }
    x
}

/// Find a sign change of `f` on `[lo, hi]` by bisection (at most `iters` halvings).
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}
