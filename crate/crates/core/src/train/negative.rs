//! Tail-corruption negative sampling.

use rand::Rng;

use crate::triples::{EntityId, Triple};

/// Draw `ratio` corrupted triples sharing the positive's head and relation,
/// with tails uniform over all entities. A draw colliding with the true tail
/// is retried up to 10 times and then kept (the residual bias is O(1/N)).
pub fn sample_negatives<R: Rng>(
    triple: &Triple,
    ratio: usize,
    num_entities: usize,
    rng: &mut R,
) -> Vec<Triple> {
    assert!(ratio >= 1, "ratio must be at least 1");
    let mut out = Vec::with_capacity(ratio);
    for _ in 0..ratio {
        let tail = draw_other(triple.tail.0, num_entities, rng);
        out.push(Triple::new(triple.head, triple.relation, EntityId(tail)));
    }
    out
}

/// Symmetric variant: each negative corrupts the head or the tail with equal
/// probability.
pub fn sample_negatives_symmetric<R: Rng>(
    triple: &Triple,
    ratio: usize,
    num_entities: usize,
    rng: &mut R,
) -> Vec<Triple> {
    assert!(ratio >= 1, "ratio must be at least 1");
    let mut out = Vec::with_capacity(ratio);
    for _ in 0..ratio {
        if rng.random_bool(0.5) {
            let head = draw_other(triple.head.0, num_entities, rng);
            out.push(Triple::new(EntityId(head), triple.relation, triple.tail));
        } else {
            let tail = draw_other(triple.tail.0, num_entities, rng);
            out.push(Triple::new(triple.head, triple.relation, EntityId(tail)));
        }
    }
    out
}

fn draw_other<R: Rng>(avoid: u32, num_entities: usize, rng: &mut R) -> u32 {
    let mut e = rng.random_range(0..num_entities as u32);
    for _ in 0..10 {
        if e != avoid {
            break;
        }
        e = rng.random_range(0..num_entities as u32);
    }
    e
}
