#![allow(dead_code)]

use flowmech::benchgen::{gen_random, gen_random_muca, RandomMucaParams, RandomParams};
use flowmech::{MucaInstance, UfpInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random flow instance; parameters are themselves drawn from `seed`.
pub fn small_ufp(seed: u64, max_vertices: usize, max_requests: usize, b: (f64, f64)) -> UfpInstance<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let vertices = rng.gen_range(2..=max_vertices);
    let edges = rng.gen_range(vertices - 1..=2 * vertices);
    let params = RandomParams {
        vertices,
        edges,
        requests: rng.gen_range(1..=max_requests),
        b: if b.0 == b.1 { b.0 } else { rng.gen_range(b.0..=b.1) },
        value_range: (1.0, 10.0),
        demand_range: (0.1, 1.0),
        seed,
        directed: rng.gen_bool(0.5),
    };
    gen_random(&params).unwrap()
}

pub fn small_muca(seed: u64, max_items: usize, max_requests: usize, b: (u64, u64)) -> MucaInstance<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa0c7);
    let params = RandomMucaParams {
        items: rng.gen_range(1..=max_items),
        requests: rng.gen_range(0..=max_requests),
        b: rng.gen_range(b.0..=b.1),
        max_bundle: 3,
        value_range: (1.0, 10.0),
        seed,
    };
    gen_random_muca(&params).unwrap()
}

/// Edge loads of an allocation given as `(request, edges, copies)`.
pub fn edge_loads(inst: &UfpInstance<f64>, routed: impl IntoIterator<Item = (usize, Vec<usize>, usize)>) -> Vec<f64> {
    let mut load = vec![0.0; inst.edge_count()];
    for (r, edges, copies) in routed {
        for e in edges {
            load[e] += inst.requests[r].demand * copies as f64;
        }
    }
    load
}

pub fn within_capacity(inst: &UfpInstance<f64>, load: &[f64]) -> bool {
    load.iter().zip(&inst.edges).all(|(l, e)| *l <= e.capacity * (1.0 + 1e-12))
}

pub fn item_loads(inst: &MucaInstance<f64>, winners: &[usize]) -> Vec<u64> {
    let mut load = vec![0; inst.items().len()];
    for &r in winners {
        for &u in inst.bundle(r) {
            load[u] += 1;
        }
    }
    load
}
