use quadlab::branches::g_kernel_exact;
use quadlab::spine::sojourn_exact;
use std::time::Instant;

fn main() {
    // independent kernel validation: row sums = expected branch vertex count
    let g = g_kernel_exact(64, 4096).unwrap();
    for k in [1u32, 2, 5, 10, 50] {
        let sum: f64 = (1..=4096).map(|j| g.value(k, j as u32)).sum();
        let expect = (3.0 * (k as f64).powi(2) + 9.0 * k as f64 - 2.0) / 10.0 + 1.0;
        println!("row sum G({k},.) = {sum:.6}, mean branch vertices = {expect:.6}");
    }

    // large-j behaviour of E[N_j]/j^3
    let t0 = Instant::now();
    let jmax = 512usize;
    let kcut = 16384usize;
    let g = g_kernel_exact(jmax, kcut + 512).unwrap();
    let mut soj = vec![0.0f64; kcut + 1];
    for k in 1..=kcut { soj[k] = sojourn_exact(k as u32, 1e-10).unwrap().value; }
    println!("tables: {:?}", t0.elapsed());
    let enj = |j: usize| -> f64 {
        let s: f64 = (1..=kcut).map(|k| soj[k] * g.value(j as u32, k as u32)).sum();
        2.0 * s - soj[j]
    };
    let mut prev = f64::NAN;
    for j in [8usize, 16, 32, 64, 128, 256, 512] {
        let v = enj(j);
        let local = if prev.is_nan() { f64::NAN } else { (v / prev).ln() / 2f64.ln() };
        println!("E[N_{j}] = {v:.2}, /j^3 = {:.5}, local slope from prev = {local:.4}", v / (j as f64).powi(3));
        prev = v;
    }
}
