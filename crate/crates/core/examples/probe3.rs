use quadlab::branches::g_kernel_exact;
use quadlab::spine::sojourn_exact;

fn main() {
    let g = g_kernel_exact(8, 4096).unwrap();
    // the tail summand S_k G(k,j) k^2 for j in {1, 8}: how fast does it rise?
    for j in [1u32, 4, 8] {
        print!("j={j}: ");
        for k in [16usize, 32, 64, 128, 256, 512, 1024, 2048, 3500] {
            if k as u32 > j {
                let s = sojourn_exact(k as u32, 1e-12).unwrap().value;
                print!("f({k})={:.3} ", s * g.value(j, k as u32) * (k as f64).powi(2));
            }
        }
        println!();
    }
    // exact missing mass for j=8 beyond various cuts (vs sum to 4096)
    let soj: Vec<f64> = (0..=4096).map(|k| if k == 0 { 0.0 } else { sojourn_exact(k as u32, 1e-12).unwrap().value }).collect();
    let full: f64 = (1..=4096).map(|k| soj[k] * g.value(8, k as u32)).sum::<f64>() * 2.0;
    for cut in [16usize, 32, 64, 128, 256] {
        let upto: f64 = (1..=cut).map(|k| soj[k] * g.value(8, k as u32)).sum::<f64>() * 2.0;
        println!("j=8 cut={cut}: missing(to 4096) = {:.2}", full - upto);
    }
}
