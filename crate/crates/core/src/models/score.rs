//! Scoring functions and analytic gradients for every benchmarked model.
//!
//! Each model's score is a tape expression over the parameter rows a triple
//! touches; the forward pass is the score and the reverse pass gives the
//! sparse gradient. Higher score means more plausible; distance-style models
//! return negated distances (plus per-entity biases where the model carries
//! them).

use crate::exec;
use crate::triples::{EntityId, RelationId, Triple};

use super::autodiff::{Id, Tape};
use super::spec::{ModelKind, Norm};
use super::table::{EmbeddingTable, ParamBlock, ParamRef, SparseGrad};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("{what} id {id} out of bounds (size {len})")]
    OutOfBounds { what: &'static str, id: usize, len: usize },
    #[error("empty candidate list")]
    EmptyCandidates,
}

/// A triple with one slot removed, for batch scoring of candidates.
#[derive(Debug, Clone, Copy)]
pub enum Partial {
    /// (h, r, ?) — candidates fill the tail.
    Tail { head: EntityId, relation: RelationId },
    /// (?, r, t) — candidates fill the head.
    Head { relation: RelationId, tail: EntityId },
}

fn check_triple(table: &EmbeddingTable, t: &Triple) -> Result<(), ModelError> {
    let ne = table.num_entities;
    let nr = table.num_relations;
    if t.head.0 as usize >= ne {
        return Err(ModelError::OutOfBounds { what: "head entity", id: t.head.0 as usize, len: ne });
    }
    if t.tail.0 as usize >= ne {
        return Err(ModelError::OutOfBounds { what: "tail entity", id: t.tail.0 as usize, len: ne });
    }
    if t.relation.0 as usize >= nr {
        return Err(ModelError::OutOfBounds { what: "relation", id: t.relation.0 as usize, len: nr });
    }
    Ok(())
}

struct Ctx<'a> {
    tape: Tape,
    table: &'a EmbeddingTable,
}

impl<'a> Ctx<'a> {
    fn new(table: &'a EmbeddingTable) -> Self {
        Ctx { tape: Tape::new(), table }
    }

    fn entity(&mut self, e: usize) -> Id {
        let r = ParamRef::new(ParamBlock::Entity, e);
        self.tape.vec_param(self.table.row(r), r)
    }

    fn entity_extra(&mut self, e: usize) -> Id {
        let r = ParamRef::new(ParamBlock::EntityExtra, e);
        self.tape.vec_param(self.table.row(r), r)
    }

    fn relation(&mut self, rel: usize) -> Id {
        let r = ParamRef::new(ParamBlock::Relation, rel);
        self.tape.vec_param(self.table.row(r), r)
    }

    fn relation_extra(&mut self, rel: usize) -> Id {
        let r = ParamRef::new(ParamBlock::RelationExtra, rel);
        self.tape.vec_param(self.table.row(r), r)
    }

    fn head_bias(&mut self, e: usize) -> Id {
        let r = ParamRef::new(ParamBlock::HeadBias, e);
        self.tape.scalar_param(self.table.head_bias[e], r)
    }

    fn tail_bias(&mut self, e: usize) -> Id {
        let r = ParamRef::new(ParamBlock::TailBias, e);
        self.tape.scalar_param(self.table.tail_bias[e], r)
    }

    /// Effective curvature node `softplus(raw_c_r)`.
    fn curvature(&mut self, rel: usize) -> Id {
        let r = ParamRef::new(ParamBlock::Curvature, rel);
        let raw = self.tape.scalar_param(self.table.curvature_raw[rel], r);
        self.tape.softplus(raw)
    }

    /// Negated translation distance under the configured norm; `L2` is the
    /// squared Euclidean distance.
    fn neg_distance(&mut self, diff: Id, norm: Norm) -> Id {
        let d = match norm {
            Norm::L1 => self.tape.norm1(diff),
            Norm::L2 => self.tape.sqnorm(diff),
        };
        self.tape.neg_s(d)
    }

    /// Transfer a stored unit-ball point into the ball of curvature `c`
    /// (the canonical scaling x / sqrt(c)).
    fn to_ball(&mut self, x: Id, c: Id) -> Id {
        let sc = self.tape.sqrt_s(c);
        let one = self.tape.scalar_const(1.0);
        let inv = self.tape.div_s(one, sc);
        self.tape.scale(x, inv)
    }

    fn complex_parts(&mut self, v: Id, d: usize) -> (Id, Id) {
        (self.tape.slice(v, 0, d), self.tape.slice(v, d, d))
    }

    /// `h o r` with `r` given as raw phase angles.
    fn phase_rotate(&mut self, h_re: Id, h_im: Id, phases: Id) -> (Id, Id) {
        let cosr = self.tape.cos_v(phases);
        let sinr = self.tape.sin_v(phases);
        let a = self.tape.mul(h_re, cosr);
        let b = self.tape.mul(h_im, sinr);
        let re = self.tape.sub(a, b);
        let c = self.tape.mul(h_re, sinr);
        let d = self.tape.mul(h_im, cosr);
        let im = self.tape.add(c, d);
        (re, im)
    }

    /// Attention blend of two vectors with logits `<a, x>`, `<a, y>`.
    fn attention(&mut self, a: Id, x: Id, y: Id) -> Id {
        let lx = self.tape.dot(a, x);
        let ly = self.tape.dot(a, y);
        let diff = self.tape.sub_s(lx, ly);
        let alpha = self.tape.sigmoid_s(diff);
        let one = self.tape.scalar_const(1.0);
        let beta = self.tape.sub_s(one, alpha);
        let xs = self.tape.scale(x, alpha);
        let ys = self.tape.scale(y, beta);
        self.tape.add(xs, ys)
    }

    fn with_biases(&mut self, score: Id, h: usize, t: usize) -> Id {
        let bh = self.head_bias(h);
        let bt = self.tail_bias(t);
        let s = self.tape.add_s(score, bh);
        self.tape.add_s(s, bt)
    }
}

/// Build the score expression for one triple; returns the root node.
fn build_score(ctx: &mut Ctx, triple: &Triple) -> Id {
    let spec = ctx.table.spec;
    let d = spec.dim;
    let half = d / 2;
    let (h, r, t) = (triple.head.0 as usize, triple.relation.0 as usize, triple.tail.0 as usize);

    match spec.kind {
        // -||h + r - t||
        ModelKind::TransE => {
            let hv = ctx.entity(h);
            let rv = ctx.relation(r);
            let tv = ctx.entity(t);
            let hr = ctx.tape.add(hv, rv);
            let diff = ctx.tape.sub(hr, tv);
            ctx.neg_distance(diff, spec.norm)
        }
        // -||(I - rp rp^T) h + r - (I - rp rp^T) t||, rp normalized in-score
        ModelKind::TransH => {
            let hv = ctx.entity(h);
            let rv = ctx.relation(r);
            let tv = ctx.entity(t);
            let rp = ctx.relation_extra(r);
            let n2 = ctx.tape.sqnorm(rp);
            let n = ctx.tape.sqrt_s(n2);
            let one = ctx.tape.scalar_const(1.0);
            let inv = ctx.tape.div_s(one, n);
            let rhat = ctx.tape.scale(rp, inv);
            let project = |ctx: &mut Ctx, x: Id| {
                let c = ctx.tape.dot(rhat, x);
                let p = ctx.tape.scale(rhat, c);
                ctx.tape.sub(x, p)
            };
            let hp = project(ctx, hv);
            let tp = project(ctx, tv);
            let hr = ctx.tape.add(hp, rv);
            let diff = ctx.tape.sub(hr, tp);
            ctx.neg_distance(diff, spec.norm)
        }
        // -||M_r h + r - M_r t||
        ModelKind::TransR => {
            let hv = ctx.entity(h);
            let rv = ctx.relation(r);
            let tv = ctx.entity(t);
            let m = ctx.relation_extra(r);
            let mh = ctx.tape.matvec(m, hv, d, d);
            let mt = ctx.tape.matvec(m, tv, d, d);
            let hr = ctx.tape.add(mh, rv);
            let diff = ctx.tape.sub(hr, mt);
            ctx.neg_distance(diff, spec.norm)
        }
        // -||(I + rp hp^T) h + r - (I + rp tp^T) t||
        ModelKind::TransD => {
            let hv = ctx.entity(h);
            let tv = ctx.entity(t);
            let rv = ctx.relation(r);
            let hp = ctx.entity_extra(h);
            let tp = ctx.entity_extra(t);
            let rp = ctx.relation_extra(r);
            let ch = ctx.tape.dot(hp, hv);
            let sh = ctx.tape.scale(rp, ch);
            let hh = ctx.tape.add(hv, sh);
            let ct = ctx.tape.dot(tp, tv);
            let st = ctx.tape.scale(rp, ct);
            let tt = ctx.tape.add(tv, st);
            let hr = ctx.tape.add(hh, rv);
            let diff = ctx.tape.sub(hr, tt);
            ctx.neg_distance(diff, spec.norm)
        }
        // h^T diag(r) t
        ModelKind::DistMult => {
            let hv = ctx.entity(h);
            let rv = ctx.relation(r);
            let tv = ctx.entity(t);
            let hr = ctx.tape.mul(hv, rv);
            ctx.tape.dot(hr, tv)
        }
        // (1/2)(h1 diag(r) t2 + t1 diag(r_inv) h2)
        ModelKind::SimplE => {
            let h1 = ctx.entity(h);
            let h2 = ctx.entity_extra(h);
            let t1 = ctx.entity(t);
            let t2 = ctx.entity_extra(t);
            let rv = ctx.relation(r);
            let rinv = ctx.relation_extra(r);
            let a = ctx.tape.mul(h1, rv);
            let fwd = ctx.tape.dot(a, t2);
            let b = ctx.tape.mul(t1, rinv);
            let bwd = ctx.tape.dot(b, h2);
            let s = ctx.tape.add_s(fwd, bwd);
            let half_c = ctx.tape.scalar_const(0.5);
            ctx.tape.mul_s(half_c, s)
        }
        // <h_headrole, r, t_tailrole>
        ModelKind::Cp => {
            let h1 = ctx.entity(h);
            let t2 = ctx.entity_extra(t);
            let rv = ctx.relation(r);
            let hr = ctx.tape.mul(h1, rv);
            ctx.tape.dot(hr, t2)
        }
        // Re(sum_k h_k r_k conj(t_k))
        ModelKind::ComplEx => {
            let hv = ctx.entity(h);
            let rv = ctx.relation(r);
            let tv = ctx.entity(t);
            let (hre, him) = ctx.complex_parts(hv, d);
            let (rre, rim) = ctx.complex_parts(rv, d);
            let (tre, tim) = ctx.complex_parts(tv, d);
            let a = ctx.tape.mul(hre, rre);
            let b = ctx.tape.mul(him, rim);
            let hr_re = ctx.tape.sub(a, b);
            let c = ctx.tape.mul(hre, rim);
            let e = ctx.tape.mul(him, rre);
            let hr_im = ctx.tape.add(c, e);
            let s_re = ctx.tape.dot(hr_re, tre);
            let s_im = ctx.tape.dot(hr_im, tim);
            ctx.tape.add_s(s_re, s_im)
        }
        // -||h o r - t|| with r stored as phase angles
        ModelKind::RotatE => {
            let hv = ctx.entity(h);
            let tv = ctx.entity(t);
            let phases = ctx.relation(r);
            let (hre, him) = ctx.complex_parts(hv, d);
            let (tre, tim) = ctx.complex_parts(tv, d);
            let (hr_re, hr_im) = ctx.phase_rotate(hre, him, phases);
            let dre = ctx.tape.sub(hr_re, tre);
            let dim = ctx.tape.sub(hr_im, tim);
            match spec.norm {
                Norm::L1 => {
                    // sum of component moduli
                    let re2 = ctx.tape.mul(dre, dre);
                    let im2 = ctx.tape.mul(dim, dim);
                    let m2 = ctx.tape.add(re2, im2);
                    let m = ctx.tape.sqrt_v(m2);
                    let s = ctx.tape.sum(m);
                    ctx.tape.neg_s(s)
                }
                Norm::L2 => {
                    let a = ctx.tape.sqnorm(dre);
                    let b = ctx.tape.sqnorm(dim);
                    let s = ctx.tape.add_s(a, b);
                    ctx.tape.neg_s(s)
                }
            }
        }
        // -d_B(exp_0(diag(rho) log_0(h)), t (+) r)^2 + b_h + b_t
        ModelKind::MuRP => {
            let c = ctx.curvature(r);
            let hv = ctx.entity(h);
            let tv = ctx.entity(t);
            let rv = ctx.relation(r);
            let rho = ctx.relation_extra(r);
            let hb = ctx.to_ball(hv, c);
            let tb = ctx.to_ball(tv, c);
            let rb = ctx.to_ball(rv, c);
            let v = ctx.tape.log_zero(c, hb);
            let rv2 = ctx.tape.mul(rho, v);
            let q = ctx.tape.exp_zero(c, rv2);
            let rhs = ctx.tape.mobius_add(c, tb, rb);
            let d2 = ctx.tape.sq_hyp_dist(c, q, rhs);
            let s = ctx.tape.neg_s(d2);
            ctx.with_biases(s, h, t)
        }
        // -d_B(Rot(theta) h (+) r, t)^2 + b_h + b_t (and the Ref variant)
        ModelKind::RotH | ModelKind::RefH => {
            let c = ctx.curvature(r);
            let hv = ctx.entity(h);
            let tv = ctx.entity(t);
            let rv = ctx.relation(r);
            let angles = ctx.relation_extra(r);
            let hb = ctx.to_ball(hv, c);
            let tb = ctx.to_ball(tv, c);
            let rb = ctx.to_ball(rv, c);
            let q1 = if spec.kind == ModelKind::RotH {
                ctx.tape.givens_rotate(angles, hb)
            } else {
                ctx.tape.givens_reflect(angles, hb)
            };
            let q = ctx.tape.mobius_add(c, q1, rb);
            let d2 = ctx.tape.sq_hyp_dist(c, q, tb);
            let s = ctx.tape.neg_s(d2);
            ctx.with_biases(s, h, t)
        }
        // -d_B(exp_0(Att(log Rot h, log Ref h; a)) (+) r, t)^2 + b_h + b_t
        ModelKind::AttH => {
            let c = ctx.curvature(r);
            let hv = ctx.entity(h);
            let tv = ctx.entity(t);
            let rv = ctx.relation(r);
            let ex = ctx.relation_extra(r);
            let th_rot = ctx.tape.slice(ex, 0, half);
            let th_ref = ctx.tape.slice(ex, half, half);
            let att = ctx.tape.slice(ex, 2 * half, d);
            let hb = ctx.to_ball(hv, c);
            let tb = ctx.to_ball(tv, c);
            let rb = ctx.to_ball(rv, c);
            let q_rot = ctx.tape.givens_rotate(th_rot, hb);
            let q_ref = ctx.tape.givens_reflect(th_ref, hb);
            let v_rot = ctx.tape.log_zero(c, q_rot);
            let v_ref = ctx.tape.log_zero(c, q_ref);
            let v = ctx.attention(att, v_rot, v_ref);
            let q1 = ctx.tape.exp_zero(c, v);
            let q = ctx.tape.mobius_add(c, q1, rb);
            let d2 = ctx.tape.sq_hyp_dist(c, q, tb);
            let s = ctx.tape.neg_s(d2);
            ctx.with_biases(s, h, t)
        }
        // Euclidean analogues: transform head, translate, squared distance
        ModelKind::RotE | ModelKind::RefE => {
            let hv = ctx.entity(h);
            let tv = ctx.entity(t);
            let rv = ctx.relation(r);
            let angles = ctx.relation_extra(r);
            let q1 = if spec.kind == ModelKind::RotE {
                ctx.tape.givens_rotate(angles, hv)
            } else {
                ctx.tape.givens_reflect(angles, hv)
            };
            let q = ctx.tape.add(q1, rv);
            let diff = ctx.tape.sub(q, tv);
            let d2 = ctx.tape.sqnorm(diff);
            let s = ctx.tape.neg_s(d2);
            ctx.with_biases(s, h, t)
        }
        ModelKind::AttE => {
            let hv = ctx.entity(h);
            let tv = ctx.entity(t);
            let rv = ctx.relation(r);
            let ex = ctx.relation_extra(r);
            let th_rot = ctx.tape.slice(ex, 0, half);
            let th_ref = ctx.tape.slice(ex, half, half);
            let att = ctx.tape.slice(ex, 2 * half, d);
            let v_rot = ctx.tape.givens_rotate(th_rot, hv);
            let v_ref = ctx.tape.givens_reflect(th_ref, hv);
            let v = ctx.attention(att, v_rot, v_ref);
            let q = ctx.tape.add(v, rv);
            let diff = ctx.tape.sub(q, tv);
            let d2 = ctx.tape.sqnorm(diff);
            let s = ctx.tape.neg_s(d2);
            ctx.with_biases(s, h, t)
        }
        ModelKind::MurE => {
            let hv = ctx.entity(h);
            let tv = ctx.entity(t);
            let rv = ctx.relation(r);
            let rho = ctx.relation_extra(r);
            let rh = ctx.tape.mul(rho, hv);
            let q = ctx.tape.add(rh, rv);
            let diff = ctx.tape.sub(q, tv);
            let d2 = ctx.tape.sqnorm(diff);
            let s = ctx.tape.neg_s(d2);
            ctx.with_biases(s, h, t)
        }
    }
}

/// Score one triple. Deterministic; higher is more plausible.
pub fn score(table: &EmbeddingTable, triple: &Triple) -> Result<f64, ModelError> {
    check_triple(table, triple)?;
    let mut ctx = Ctx::new(table);
    let root = build_score(&mut ctx, triple);
    Ok(ctx.tape.value(root))
}

/// Gradient of `upstream * score(triple)` for every parameter row the triple
/// touches. Rows not referenced by the triple are absent.
pub fn gradient(table: &EmbeddingTable, triple: &Triple, upstream: f64) -> Result<SparseGrad, ModelError> {
    check_triple(table, triple)?;
    let mut ctx = Ctx::new(table);
    let root = build_score(&mut ctx, triple);
    Ok(ctx.tape.backward(root, upstream))
}

/// Score a triple, derive the upstream sensitivity from the score, and run
/// the backward pass on the same tape. Saves a rebuild when the loss needs
/// the score before it can weight the gradient.
pub fn score_and_gradient(
    table: &EmbeddingTable,
    triple: &Triple,
    upstream_from_score: impl FnOnce(f64) -> f64,
) -> Result<(f64, SparseGrad), ModelError> {
    check_triple(table, triple)?;
    let mut ctx = Ctx::new(table);
    let root = build_score(&mut ctx, triple);
    let s = ctx.tape.value(root);
    let g = ctx.tape.backward(root, upstream_from_score(s));
    Ok((s, g))
}

/// Scores of all candidate completions of a partial triple. Element `i` is
/// exactly `score()` of the triple completed with `candidates[i]`.
pub fn score_batch(
    table: &EmbeddingTable,
    partial: Partial,
    candidates: &[EntityId],
) -> Result<Vec<f64>, ModelError> {
    if candidates.is_empty() {
        return Err(ModelError::EmptyCandidates);
    }
    let complete = |c: &EntityId| -> Triple {
        match partial {
            Partial::Tail { head, relation } => Triple::new(head, relation, *c),
            Partial::Head { relation, tail } => Triple::new(*c, relation, tail),
        }
    };
    // validate bounds once up front so the parallel map is infallible
    for c in candidates {
        check_triple(table, &complete(c))?;
    }
    Ok(exec::map(candidates, |c| {
        let t = complete(c);
        let mut ctx = Ctx::new(table);
        let root = build_score(&mut ctx, &t);
        ctx.tape.value(root)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::spec::{ModelSpec, ALL_MODELS};
    use crate::models::table::init_params;

    fn triple(h: u32, r: u32, t: u32) -> Triple {
        Triple::new(EntityId(h), RelationId(r), EntityId(t))
    }

    /// Table with handable values for 2-d checks.
    fn tiny_table(kind: ModelKind, entity_rows: &[&[f64]], relation_rows: &[&[f64]]) -> EmbeddingTable {
        let spec = ModelSpec::new(kind, entity_rows[0].len());
        let mut t = init_params(&spec, entity_rows.len(), relation_rows.len(), 0);
        for (i, row) in entity_rows.iter().enumerate() {
            t.entity.row_mut(i).copy_from_slice(row);
        }
        for (i, row) in relation_rows.iter().enumerate() {
            t.relation.row_mut(i).copy_from_slice(row);
        }
        t
    }

    #[test]
    fn transe_exact_translation_scores_zero() {
        let t = tiny_table(ModelKind::TransE, &[&[1.0, 0.0], &[1.0, 1.0]], &[&[0.0, 1.0]]);
        let s = score(&t, &triple(0, 0, 1)).unwrap();
        assert_eq!(s, 0.0);
        // moving the tail away decreases the score
        let t2 = tiny_table(ModelKind::TransE, &[&[1.0, 0.0], &[2.0, 1.0]], &[&[0.0, 1.0]]);
        assert!(score(&t2, &triple(0, 0, 1)).unwrap() < 0.0);
    }

    #[test]
    fn distmult_hand_value() {
        let t = tiny_table(ModelKind::DistMult, &[&[1.0, 2.0], &[3.0, 4.0]], &[&[1.0, 1.0]]);
        let s = score(&t, &triple(0, 0, 1)).unwrap();
        assert!((s - 11.0).abs() < 1e-12);
    }

    #[test]
    fn roth_fixed_point_scores_zero() {
        let spec = ModelSpec::new(ModelKind::RotH, 4);
        let mut t = init_params(&spec, 2, 1, 0);
        // theta = 0, r at origin, biases zero, h = t
        t.relation.row_mut(0).fill(0.0);
        t.relation_extra.as_mut().unwrap().row_mut(0).fill(0.0);
        let h_row: Vec<f64> = t.entity.row(0).to_vec();
        t.entity.row_mut(1).copy_from_slice(&h_row);
        let s = score(&t, &triple(0, 0, 1)).unwrap();
        assert!(s.abs() < 1e-12, "score {s}");
    }

    #[test]
    fn rotate_exact_rotation_scores_zero() {
        // first component: h = i, r phase = pi/2 -> h o r = -1 = t
        let spec = ModelSpec::new(ModelKind::RotatE, 2);
        let mut t = init_params(&spec, 2, 1, 0);
        t.entity.row_mut(0).copy_from_slice(&[0.0, 0.3, 1.0, 0.4]); // re | im
        t.entity.row_mut(1).copy_from_slice(&[-1.0, 0.3, 0.0, 0.4]);
        t.relation.row_mut(0).copy_from_slice(&[std::f64::consts::FRAC_PI_2, 0.0]);
        let s = score(&t, &triple(0, 0, 1)).unwrap();
        assert!(s.abs() < 1e-12, "score {s}");
    }

    #[test]
    fn complex_with_real_embeddings_reduces_to_distmult() {
        let spec_c = ModelSpec::new(ModelKind::ComplEx, 3);
        let spec_d = ModelSpec::new(ModelKind::DistMult, 3);
        let mut tc = init_params(&spec_c, 2, 1, 5);
        let mut td = init_params(&spec_d, 2, 1, 5);
        let h = [0.4, -0.2, 0.9];
        let r = [0.3, 0.8, -0.5];
        let t = [-0.6, 0.1, 0.7];
        for (i, v) in [h, t].iter().enumerate() {
            let row = tc.entity.row_mut(i);
            row[..3].copy_from_slice(v);
            row[3..].fill(0.0); // zero imaginary parts
            td.entity.row_mut(i).copy_from_slice(v);
        }
        tc.relation.row_mut(0)[..3].copy_from_slice(&r);
        tc.relation.row_mut(0)[3..].fill(0.0);
        td.relation.row_mut(0).copy_from_slice(&r);
        let sc = score(&tc, &triple(0, 0, 1)).unwrap();
        let sd = score(&td, &triple(0, 0, 1)).unwrap();
        assert!((sc - sd).abs() < 1e-12);
    }

    #[test]
    fn simple_swap_symmetry() {
        // score(h, r, t) with (h1,h2,t1,t2,r,rinv) equals score(t, r', h)
        // after swapping the role tables and the two diagonals
        let spec = ModelSpec::new(ModelKind::SimplE, 4);
        let mut a = init_params(&spec, 2, 1, 9);
        // make values distinctive
        for i in 0..2 {
            for (j, v) in a.entity.row_mut(i).iter_mut().enumerate() {
                *v = (i * 4 + j) as f64 / 7.0 + 0.1;
            }
            for (j, v) in a.entity_extra.as_mut().unwrap().row_mut(i).iter_mut().enumerate() {
                *v = (i * 4 + j) as f64 / 5.0 - 0.3;
            }
        }
        let s_fwd = score(&a, &triple(0, 0, 1)).unwrap();
        // build the swapped table: r <-> r_inv
        let mut b = a.clone();
        let r0 = a.relation.row(0).to_vec();
        let ri = a.relation_extra.as_ref().unwrap().row(0).to_vec();
        b.relation.row_mut(0).copy_from_slice(&ri);
        b.relation_extra.as_mut().unwrap().row_mut(0).copy_from_slice(&r0);
        let s_bwd = score(&b, &triple(1, 0, 0)).unwrap();
        assert!((s_fwd - s_bwd).abs() < 1e-12);
    }

    #[test]
    fn atte_with_equal_branches_matches_rote() {
        // With attention saturated toward the rotation branch, AttE matches
        // RotE at the same parameters.
        let spec_a = ModelSpec::new(ModelKind::AttE, 4);
        let spec_r = ModelSpec::new(ModelKind::RotE, 4);
        let mut ta = init_params(&spec_a, 2, 1, 3);
        let mut tr = init_params(&spec_r, 2, 1, 3);
        // same entities/relations
        let h = [0.3, -0.1, 0.5, 0.2];
        let t = [0.1, 0.4, -0.2, 0.6];
        let r = [0.05, -0.02, 0.03, 0.01];
        for (tab, _) in [(&mut ta, 0), (&mut tr, 1)] {
            tab.entity.row_mut(0).copy_from_slice(&h);
            tab.entity.row_mut(1).copy_from_slice(&t);
            tab.relation.row_mut(0).copy_from_slice(&r);
        }
        // zero angles: Rot = identity, Ref(0) flips odd coordinates; an
        // attention vector weighting the odd coordinates saturates alpha
        // toward the rotation branch.
        let ex = ta.relation_extra.as_mut().unwrap().row_mut(0);
        ex.fill(0.0);
        ex[4..8].copy_from_slice(&[0.0, 1e6, 0.0, 1e6]); // attention vector
        tr.relation_extra.as_mut().unwrap().row_mut(0).fill(0.0);
        let sa = score(&ta, &triple(0, 0, 1)).unwrap();
        let sr = score(&tr, &triple(0, 0, 1)).unwrap();
        // alpha saturates at 1 unless the rot/ref branches already agree
        assert!((sa - sr).abs() < 1e-9, "{sa} vs {sr}");
    }

    #[test]
    fn atth_saturated_attention_matches_roth() {
        let spec_a = ModelSpec::new(ModelKind::AttH, 4);
        let spec_r = ModelSpec::new(ModelKind::RotH, 4);
        let mut ta = init_params(&spec_a, 2, 1, 6);
        let mut tr = init_params(&spec_r, 2, 1, 6);
        // h has zero odd coordinates, so Rot(theta) h == Ref(theta) h for the
        // same angles: attention blends identical arguments and AttH must
        // reproduce RotH regardless of the attention vector
        let h = [0.1, 0.0, 0.2, 0.0];
        let t = [0.05, 0.12, -0.08, 0.2];
        let r = [0.02, -0.01, 0.015, 0.005];
        for tab in [&mut ta, &mut tr] {
            tab.entity.row_mut(0).copy_from_slice(&h);
            tab.entity.row_mut(1).copy_from_slice(&t);
            tab.relation.row_mut(0).copy_from_slice(&r);
            tab.curvature_raw[0] = 0.3; // same learnable curvature
        }
        let angles = [0.4, -0.7];
        let ex = ta.relation_extra.as_mut().unwrap().row_mut(0);
        ex[..2].copy_from_slice(&angles); // rotation block
        ex[2..4].copy_from_slice(&angles); // reflection block
        ex[4..8].copy_from_slice(&[0.3, -0.8, 0.5, 0.1]); // arbitrary attention
        tr.relation_extra.as_mut().unwrap().row_mut(0).copy_from_slice(&angles);
        let sa = score(&ta, &triple(0, 0, 1)).unwrap();
        let sr = score(&tr, &triple(0, 0, 1)).unwrap();
        assert!((sa - sr).abs() < 1e-9, "{sa} vs {sr}");
    }

    #[test]
    fn transe_identity_setup_batch_argmax_is_true_tail() {
        let spec = ModelSpec::new(ModelKind::TransE, 4);
        let mut t = init_params(&spec, 6, 1, 3);
        // h + r lands exactly on entity 4
        let h = [0.2, -0.1, 0.3, 0.0];
        let r = [0.1, 0.1, -0.1, 0.2];
        let target: Vec<f64> = h.iter().zip(&r).map(|(a, b)| a + b).collect();
        t.entity.row_mut(0).copy_from_slice(&h);
        t.relation.row_mut(0).copy_from_slice(&r);
        t.entity.row_mut(4).copy_from_slice(&target);
        let candidates: Vec<EntityId> = (0..6).map(EntityId).collect();
        let scores = score_batch(
            &t,
            Partial::Tail { head: EntityId(0), relation: RelationId(0) },
            &candidates,
        )
        .unwrap();
        let argmax = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 4);
        assert_eq!(scores[4], 0.0);
    }

    #[test]
    fn gradient_sparsity() {
        for kind in ALL_MODELS {
            let spec = ModelSpec::new(kind, 4);
            let table = init_params(&spec, 5, 3, 1);
            let g = gradient(&table, &triple(0, 1, 2), 1.0).unwrap();
            for (p, _) in g.iter() {
                match p.block {
                    ParamBlock::Entity | ParamBlock::EntityExtra | ParamBlock::HeadBias => {
                        assert!(p.row == 0 || p.row == 2, "{kind}: unexpected entity row {}", p.row)
                    }
                    ParamBlock::TailBias => assert_eq!(p.row, 2, "{kind}"),
                    ParamBlock::Relation | ParamBlock::RelationExtra | ParamBlock::Curvature => {
                        assert_eq!(p.row, 1, "{kind}")
                    }
                }
            }
            assert!(!g.is_empty(), "{kind}");
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let spec = ModelSpec::new(ModelKind::MuRP, 4);
        let table = init_params(&spec, 3, 2, 2);
        let g = gradient(&table, &triple(0, 0, 1), 0.0).unwrap();
        for (_, row) in g.iter() {
            assert!(row.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn out_of_bounds_rejected() {
        let spec = ModelSpec::new(ModelKind::TransE, 4);
        let table = init_params(&spec, 3, 2, 2);
        assert!(score(&table, &triple(3, 0, 1)).is_err());
        assert!(score(&table, &triple(0, 2, 1)).is_err());
        assert!(gradient(&table, &triple(0, 0, 9), 1.0).is_err());
    }

    #[test]
    fn batch_matches_scalar_path() {
        for kind in ALL_MODELS {
            let spec = ModelSpec::new(kind, 4);
            let table = init_params(&spec, 8, 2, 4);
            let candidates: Vec<EntityId> = (0..8).map(EntityId).collect();
            let batch = score_batch(
                &table,
                Partial::Tail { head: EntityId(1), relation: RelationId(0) },
                &candidates,
            )
            .unwrap();
            for (i, c) in candidates.iter().enumerate() {
                let s = score(&table, &triple(1, 0, c.0)).unwrap();
                assert!((batch[i] - s).abs() < 1e-10, "{kind}");
            }
            // head-slot batch too
            let batch = score_batch(
                &table,
                Partial::Head { relation: RelationId(1), tail: EntityId(2) },
                &candidates,
            )
            .unwrap();
            for (i, c) in candidates.iter().enumerate() {
                let s = score(&table, &triple(c.0, 1, 2)).unwrap();
                assert!((batch[i] - s).abs() < 1e-10, "{kind}");
            }
        }
    }

    #[test]
    fn empty_candidates_rejected() {
        let spec = ModelSpec::new(ModelKind::TransE, 4);
        let table = init_params(&spec, 3, 2, 2);
        assert_eq!(
            score_batch(&table, Partial::Tail { head: EntityId(0), relation: RelationId(0) }, &[]),
            Err(ModelError::EmptyCandidates)
        );
    }
}
