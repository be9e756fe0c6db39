use quadlab::enumeration::enumerate_k_labeled;
use quadlab::quadmap::{build_q, verify_faces};
use quadlab::tree::LabeledTree;

fn main() {
    'outer: for n in 0..=5usize {
        let mut trees: Vec<LabeledTree> = Vec::new();
        enumerate_k_labeled(n, 1, |t| trees.push(t.clone()));
        for t in &trees {
            let out = build_q(t).unwrap();
            let report = verify_faces(&out.m_prime, None);
            let f = out.quad.map.faces();
            let bad_deg = f.iter().any(|x| x.len() != 4) && n >= 1;
            if !report.ok() || f.len() != n.max(1) || bad_deg {
                println!("FAIL n={n} tree={}", t.to_nested());
                println!("  violations: {:?}", report.violations);
                println!("  faces of Q: {:?}", f.iter().map(|x| x.len()).collect::<Vec<_>>());
                println!("  m_prime:\n{}", out.m_prime.to_text());
                continue 'outer;
            }
        }
        println!("n={n}: all {} trees ok", trees.len());
    }
}
