//! Greedy plan width of the counting network across clause densities.
//!
//! Usage: `cargo run --release --example width_scan -- [n] [seeds]`

use satnet::cnf::{generate_instance, InstanceKind};
use satnet::engine::plan_contraction;
use satnet::network::build_network;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    println!("alpha,seed,width,max_degree");
    for tenth in (10..=50).step_by(4) {
        let m = n * tenth / 10;
        for seed in 0..seeds {
            let inst = generate_instance(InstanceKind::Random, n, m, seed).unwrap();
            let max_degree = inst.occurrences().into_iter().max().unwrap_or(0);
            let net = build_network(&inst).absorb_test_state().unwrap();
            let width = match plan_contraction(&net, usize::MAX) {
                Ok(plan) => plan.width().to_string(),
                Err(e) => e.to_string(),
            };
            println!("{:.1},{seed},{width},{max_degree}", tenth as f64 / 10.0);
        }
    }
}
