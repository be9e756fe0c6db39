use quadlab::assembler::*;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let syn = OccurrenceSynthesis::new(64, 2048).unwrap();
    println!("synthesis tables (j<=64, k_cut=2048): {:?}", t0.elapsed());
    for j in [1u32, 2, 4, 8, 16, 32, 64] {
        let e = syn.expected_occurrences(j);
        println!("E[N_{j}] = {:.4}  tail {:.4}  value/j^3 = {:.5}", e.value, e.tail_bound, e.value / (j as f64).powi(3));
    }
    let pts: Vec<(f64,f64)> = (8..=64).map(|j| (j as f64, syn.expected_occurrences(j).value)).collect();
    let fit = quadlab::fit::fit_exponent(&pts, (8.0, 64.0)).unwrap();
    println!("E[N_j] slope over [8,64]: {:.4} +- {:.4}", fit.slope, fit.stderr);
    let pts: Vec<(f64,f64)> = (8..=64).map(|r| (r as f64, syn.expected_ball_volume(r).value)).collect();
    let fit = quadlab::fit::fit_exponent(&pts, (8.0, 64.0)).unwrap();
    println!("E[|B_r|] slope over [8,64]: {:.4} +- {:.4}", fit.slope, fit.stderr);

    // UIT cost and bias at several k_cut
    for k_cut in [16u32, 32, 64, 128] {
        let t1 = Instant::now();
        let sampler = UitSampler::new(8, k_cut).unwrap();
        let mut tables = UitWorkerTables::new();
        let mut total_size = 0u64;
        let reps = 20;
        let mut hist_sum = vec![0u64; 9];
        for r in 0..reps {
            let uit = sampler.sample_with(1234, r, &mut tables).unwrap();
            total_size += uit.branches.iter().map(|(l, rr)| l.total_size + rr.total_size).sum::<u64>();
            let h = uit.label_histogram(8).unwrap();
            for j in 1..=8 { hist_sum[j] += h.counts[j]; }
        }
        println!("k_cut={k_cut}: bias_bound={:.4}, mean walked {:.0}, {:?}/sample, mean N_8 = {:.1}",
            sampler.bias_bound, total_size as f64 / reps as f64, t1.elapsed() / reps, hist_sum[8] as f64 / reps as f64);
    }
}
