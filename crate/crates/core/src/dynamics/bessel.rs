//! Integer-order Bessel functions `J_0 … J_n` by Miller's downward recurrence.

/// `[J_0(x), …, J_n(x)]` for `x ≥ 0`.
pub fn bessel_j_upto(n: usize, x: f64) -> Vec<f64> {
    assert!(
        x >= 0.0 && x.is_finite(),
        "argument must be finite and non-negative"
    );
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    // Start well above both n and x so the minimal solution dominates.
    let start = {
        let m = (n as f64).max(x) + 30.0 + 10.0 * x.cbrt();
        let m = m.ceil() as usize;
        m + (m % 2)
    };
    let mut next = 0.0f64; // J_{k+1}
    let mut cur = 1e-300f64; // J_k
    let mut norm = 0.0f64;
    let mut vals = vec![0.0; n + 1];
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k−1}.
        let idx = k - 1;
        if idx <= n {
            vals[idx] = cur;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for v in vals.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += cur;
    for (o, v) in out.iter_mut().zip(vals) {
        *o = v / norm;
    }
    out
}
