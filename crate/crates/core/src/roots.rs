//! Scalar root finding and minimisation.

/// Root of `f` in a bracket `[a, b]` with `f(a) f(b) ≤ 0`, by the Illinois
/// variant of regula falsi with a bisection fallback. `None` without a
/// sign change.
pub fn bracketed_root<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return None;
    }
    let mut side = 0i8;
    for _ in 0..max_iter {
        let mut x = (a * fb - b * fa) / (fb - fa);
        let width = (b - a).abs();
        if !x.is_finite() || (x - a).abs() < 0.01 * width || (b - x).abs() < 0.01 * width {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx == 0.0 || width < xtol {
            return Some(x);
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Some(0.5 * (a + b))
}

/// Plain bisection, `iterations` halvings of `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iterations: usize) -> Option<f64> {
    let fa = f(a);
    if fa.signum() == f(b).signum() {
        return None;
    }
    for _ in 0..iterations {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`,
/// returning `(x, f(x))`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() < xtol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
