//! Bessel functions of the first kind of integer order by Miller's backward recurrence.

/// J_0(x), …, J_nmax(x).
pub fn bessel_j_sequence(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = nmax.max(ax as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut jp1 = 0.0f64;
    let mut j = 1e-300f64;
    let mut norm = 0.0f64;
    let mut vals = vec![0.0; nmax + 1];
    for k in (1..=start).rev() {
        let jm1 = 2.0 * k as f64 / ax * j - jp1;
        jp1 = j;
        j = jm1;
        let order = k - 1;
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * j;
        }
        if order <= nmax {
            vals[order] = j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            vals.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    norm += j;
    for (n, v) in vals.iter().enumerate() {
        let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
        out[n] = sign * v / norm;
    }
    out
}

/// J_n(x) for any integer n.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_sequence(m, x)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}
