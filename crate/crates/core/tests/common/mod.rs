//! Test-only oracles, kept independent of the contraction code they check.
#![allow(dead_code)]

use satnet::cnf::{generate_instance, Clause, Instance, InstanceKind};
use satnet::network::TensorNetwork;
use satnet::oracle::brute_census;
use satnet::{Index, Tensor};

/// Pairwise contraction by looping over every index assignment of the dense views.
pub fn naive_contract(a: &Tensor, b: &Tensor) -> (Vec<Index>, Vec<u128>) {
    let shared: Vec<Index> = a
        .indices()
        .iter()
        .filter(|ix| b.indices().contains(ix))
        .copied()
        .collect();
    let mut open: Vec<Index> = a
        .indices()
        .iter()
        .chain(b.indices())
        .filter(|ix| !shared.contains(ix))
        .copied()
        .collect();
    open.sort();

    let lookup = |t: &Tensor, open_vals: &[bool], shared_vals: &[bool]| -> u128 {
        let vals: Vec<bool> = t
            .indices()
            .iter()
            .map(|ix| match open.iter().position(|o| o == ix) {
                Some(p) => open_vals[p],
                None => shared_vals[shared.iter().position(|s| s == ix).unwrap()],
            })
            .collect();
        t.get(&vals)
    };

    let mut out = Vec::with_capacity(1 << open.len());
    for r in 0..1usize << open.len() {
        let open_vals: Vec<bool> = (0..open.len())
            .map(|i| (r >> (open.len() - 1 - i)) & 1 == 1)
            .collect();
        let mut acc = 0u128;
        for s in 0..1usize << shared.len() {
            let shared_vals: Vec<bool> = (0..shared.len()).map(|i| (s >> i) & 1 == 1).collect();
            acc += lookup(a, &open_vals, &shared_vals) * lookup(b, &open_vals, &shared_vals);
        }
        out.push(acc);
    }
    (open, out)
}

/// Direct clause evaluation over a packed assignment.
pub fn satisfies(instance: &Instance, x: u64) -> bool {
    instance.clauses().iter().all(|c| {
        let local = c.vars().map(|v| (x >> (v - 1)) & 1 == 1);
        local != c.forbidden()
    })
}

/// Number of clauses violated by a packed assignment.
pub fn violated(instance: &Instance, x: u64) -> usize {
    instance
        .clauses()
        .iter()
        .filter(|c| c.vars().map(|v| (x >> (v - 1)) & 1 == 1) == c.forbidden())
        .count()
}

/// Solutions by plain enumeration.
pub fn solutions(instance: &Instance) -> Vec<u64> {
    (0..1u64 << instance.num_vars())
        .filter(|&x| satisfies(instance, x))
        .collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        x = parent[x];
    }
    x
}

/// Width (index groups) of the tensor obtained by contracting the subset
/// `set` of the network's tensors, computed from leaf groups directly.
pub fn subset_width(net: &TensorNetwork, set: u32) -> usize {
    let tensors: Vec<&Tensor> = net.tensors().collect();
    let mut base = Vec::with_capacity(tensors.len());
    let mut total = 0;
    for t in &tensors {
        base.push(total);
        total += t.width();
    }
    let mut parent: Vec<usize> = (0..total).collect();
    let mut owner: std::collections::HashMap<Index, Vec<(usize, usize)>> = Default::default();
    for (i, t) in tensors.iter().enumerate() {
        if set >> i & 1 == 0 {
            continue;
        }
        for (axis, ix) in t.indices().iter().enumerate() {
            owner.entry(*ix).or_default().push((i, base[i] + t.shape().groups()[axis]));
        }
    }
    let mut open_nodes = Vec::new();
    for inside in owner.values() {
        if inside.len() == 2 {
            let (ra, rb) = (find(&mut parent, inside[0].1), find(&mut parent, inside[1].1));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        } else {
            open_nodes.push(inside[0].1);
        }
    }
    let mut roots: Vec<usize> = open_nodes.into_iter().map(|n| find(&mut parent, n)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

/// Smallest achievable maximum intermediate width over every contraction
/// tree (outer products allowed). Exponential: 3^N for N tensors.
pub fn optimal_width(net: &TensorNetwork) -> usize {
    let n = net.len();
    assert!(n <= 16, "exhaustive search is limited to 16 tensors");
    if n <= 1 {
        return 0;
    }
    let full = (1u32 << n) - 1;
    let width: Vec<usize> = (0..=full).map(|s| subset_width(net, s)).collect();
    let mut best = vec![0usize; full as usize + 1];
    for s in 1..=full {
        if s.count_ones() < 2 {
            continue;
        }
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        // splits (a, s^a) with the lowest tensor always in a
        let mut sub = rest;
        let mut split = usize::MAX;
        loop {
            let a = low | sub;
            if a != s {
                let cost = best[a as usize].max(best[(s ^ a) as usize]);
                split = split.min(cost);
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        best[s as usize] = split.max(width[s as usize]);
    }
    best[full as usize]
}

/// Random instance with a unique solution `target`: clauses are drawn so
/// `target` never hits their forbidden triple, until nothing else survives.
pub fn unique_solution_instance(n: usize, target: u64, seed: u64) -> Instance {
    let mut clauses: Vec<Clause> = Vec::new();
    let mut round = 0u64;
    loop {
        let inst = Instance::new(n, clauses.clone()).unwrap();
        if brute_census(&inst).unwrap().p == 1 {
            return inst;
        }
        let draw = generate_instance(InstanceKind::Random, n, 4, seed.wrapping_mul(1000).wrapping_add(round)).unwrap();
        round += 1;
        for c in draw.clauses() {
            let local = c.vars().map(|v| (target >> (v - 1)) & 1 == 1);
            if local != c.forbidden() {
                clauses.push(*c);
            }
        }
    }
}

/// Output of one invocation of the command-line binary.
pub struct CliRun {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

/// Runs the built `satnet` binary with `stdin` piped in.
pub fn satnet(args: &[&str], stdin: &[u8]) -> CliRun {
    use std::io::Write;
    use std::process::{Command, Stdio};
    let mut child = Command::new(env!("CARGO_BIN_EXE_satnet"))
        .args(args)
        .env_remove("SATNET_CAP")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary starts");
    // the child may exit without reading stdin
    let _ = child.stdin.take().unwrap().write_all(stdin);
    let out = child.wait_with_output().unwrap();
    CliRun {
        code: out.status.code().unwrap_or(-1),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Writes `contents` to a fresh file under the test scratch directory.
pub fn scratch_file(name: &str, contents: &[u8]) -> String {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("satnet-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_string_lossy().into_owned()
}
