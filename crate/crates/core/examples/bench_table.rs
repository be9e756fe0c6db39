use quadlab::enumeration::CountTable;
use std::path::Path;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(800);
    let k: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    let dir = args.get(3).map(String::as_str).unwrap_or("/tmp");
    let t0 = Instant::now();
    let t = CountTable::load_or_build(Path::new(dir), n, k).unwrap();
    println!("load_or_build({n},{k}) took {:?}", t0.elapsed());
    for m in [500usize, 1000, 2000, n] {
        if m <= n {
            println!("d_ratio(2, {m}) = {}", t.d_ratio(2, m.min(n)).unwrap());
        }
    }
}
