//! Orthonormal 8x8 type-II DCT and its inverse, in double precision.

use std::sync::OnceLock;

fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut c = [[0.0; 8]; 8];
        for (u, row) in c.iter_mut().enumerate() {
            let cu = if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = 0.5 * cu * (((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI) / 16.0).cos();
            }
        }
        c
    })
}

/// Forward DCT of a level-shifted block in natural order.
pub fn fdct(block: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    // rows: tmp[y][u] = sum_x c[u][x] * f[y][x]
    for y in 0..8 {
        for u in 0..8 {
            let mut s = 0.0;
            for x in 0..8 {
                s += c[u][x] * block[y * 8 + x];
            }
            tmp[y * 8 + u] = s;
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            let mut s = 0.0;
            for y in 0..8 {
                s += c[v][y] * tmp[y * 8 + u];
            }
            out[v * 8 + u] = s;
        }
    }
    out
}

/// Inverse DCT, natural order in and out.
pub fn idct(coeffs: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            let mut s = 0.0;
            for u in 0..8 {
                s += c[u][x] * coeffs[v * 8 + u];
            }
            tmp[v * 8 + x] = s;
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut s = 0.0;
            for v in 0..8 {
                s += c[v][y] * tmp[v * 8 + x];
            }
            out[y * 8 + x] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct quadruple-sum definition of the JPEG FDCT.
    fn fdct_reference(f: &[f64; 64]) -> [f64; 64] {
        let pi = std::f64::consts::PI;
        let cc = |k: usize| if k == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
        let mut out = [0.0; 64];
        for v in 0..8 {
            for u in 0..8 {
                let mut s = 0.0;
                for y in 0..8 {
                    for x in 0..8 {
                        s += f[y * 8 + x]
                            * (((2 * x + 1) as f64 * u as f64 * pi) / 16.0).cos()
                            * (((2 * y + 1) as f64 * v as f64 * pi) / 16.0).cos();
                    }
                }
                out[v * 8 + u] = 0.25 * cc(u) * cc(v) * s;
            }
        }
        out
    }

    #[test]
    fn matches_definition() {
        let mut f = [0.0; 64];
        for (i, v) in f.iter_mut().enumerate() {
            *v = ((i * 37 + 11) % 255) as f64 - 128.0;
        }
        let a = fdct(&f);
        let b = fdct_reference(&f);
        for i in 0..64 {
            assert!((a[i] - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_block_has_only_dc() {
        let f = [10.0; 64];
        let c = fdct(&f);
        assert!((c[0] - 80.0).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn inverse_round_trips() {
        let mut f = [0.0; 64];
        for (i, v) in f.iter_mut().enumerate() {
            *v = (i as f64 * 1.7).sin() * 100.0;
        }
        let back = idct(&fdct(&f));
        for i in 0..64 {
            assert!((back[i] - f[i]).abs() < 1e-9);
        }
    }
}
