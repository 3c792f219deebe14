//! Actor and critic network assembly.
//!
//! GNN actor: 3 message-passing layers, gather the ESS rows, shared
//! two-hidden-layer head per row, tanh. GNN critic: the raw action enters as
//! a seventh node channel on ESS rows, 3 layers, global mean pool, trunk MLP
//! with twin linear heads. The flat baseline is a plain MLP on the
//! fixed-size state vector with a standard separate twin-Q critic.

use super::layers::{gat_forward, gcn_forward, tag_forward};
use super::{GnnVariant, GraphContext, NetDims, PolicyArch};
use crate::tensor::optim::ParameterStore;
use crate::tensor::tape::{Tape, Value};
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

fn uniform_init(rng: &mut ChaCha20Rng, shape: &[usize], fan_in: usize, scale: f64) -> Tensor {
    let bound = scale / (fan_in as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data)
}

fn insert_linear(
    store: &mut ParameterStore,
    rng: &mut ChaCha20Rng,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    scale: f64,
) {
    store.insert(
        format!("{prefix}.w"),
        uniform_init(rng, &[fan_in, fan_out], fan_in, scale),
    );
    store.insert(
        format!("{prefix}.b"),
        uniform_init(rng, &[fan_out], fan_in, scale),
    );
}

fn insert_encoder(
    store: &mut ParameterStore,
    rng: &mut ChaCha20Rng,
    variant: GnnVariant,
    dims: &NetDims,
    prefix: &str,
    in_feat: usize,
) {
    let mut fi = in_feat;
    for l in 0..dims.layers {
        let fo = dims.hidden;
        match variant {
            GnnVariant::Gcn => {
                store.insert(
                    format!("{prefix}.l{l}.w"),
                    uniform_init(rng, &[fi, fo], fi, 1.0),
                );
            }
            GnnVariant::TagConv => {
                for k in 0..=dims.tag_k {
                    store.insert(
                        format!("{prefix}.l{l}.w{k}"),
                        uniform_init(rng, &[fi, fo], fi * (dims.tag_k + 1), 1.0),
                    );
                }
            }
            GnnVariant::GatV2 => {
                store.insert(
                    format!("{prefix}.l{l}.wl"),
                    uniform_init(rng, &[fi, fo], fi, 1.0),
                );
                store.insert(
                    format!("{prefix}.l{l}.wr"),
                    uniform_init(rng, &[fi, fo], fi, 1.0),
                );
                store.insert(format!("{prefix}.l{l}.a"), uniform_init(rng, &[fo], fo, 1.0));
            }
        }
        fi = fo;
    }
}

fn encode(
    tape: &mut Tape,
    store: &ParameterStore,
    variant: GnnVariant,
    dims: &NetDims,
    prefix: &str,
    mut h: Value,
    ctx: &GraphContext,
) -> Value {
    for l in 0..dims.layers {
        let lp = format!("{prefix}.l{l}");
        h = match variant {
            GnnVariant::Gcn => gcn_forward(tape, store, &lp, h, ctx, true),
            GnnVariant::TagConv => tag_forward(tape, store, &lp, h, ctx, true),
            GnnVariant::GatV2 => gat_forward(tape, store, &lp, h, ctx, true),
        };
    }
    h
}

fn linear(tape: &mut Tape, store: &ParameterStore, prefix: &str, x: Value) -> Value {
    let w = tape.param(store, &format!("{prefix}.w"));
    let b = tape.param(store, &format!("{prefix}.b"));
    let z = tape.matmul(x, w);
    tape.add_bias(z, b)
}

/// Flat state dimensions, fixed at training time for the baseline MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatDims {
    pub state_dim: usize,
    pub n_ess: usize,
}

pub fn init_actor(
    arch: PolicyArch,
    dims: &NetDims,
    flat: Option<FlatDims>,
    rng: &mut ChaCha20Rng,
) -> ParameterStore {
    let mut store = ParameterStore::new();
    match arch {
        PolicyArch::Gnn(variant) => {
            insert_encoder(&mut store, rng, variant, dims, "actor.enc", dims.node_feat);
            insert_linear(&mut store, rng, "actor.head.h0", dims.hidden, dims.head_hidden, 1.0);
            insert_linear(
                &mut store,
                rng,
                "actor.head.h1",
                dims.head_hidden,
                dims.head_hidden,
                1.0,
            );
            // near-zero start so early actions sit at tanh(~0)
            insert_linear(&mut store, rng, "actor.head.out", dims.head_hidden, 1, 1e-3);
        }
        PolicyArch::Nn => {
            let fd = flat.expect("flat actor needs state dimensions");
            insert_linear(&mut store, rng, "actor.mlp.h0", fd.state_dim, dims.head_hidden, 1.0);
            insert_linear(
                &mut store,
                rng,
                "actor.mlp.h1",
                dims.head_hidden,
                dims.head_hidden,
                1.0,
            );
            insert_linear(&mut store, rng, "actor.mlp.out", dims.head_hidden, fd.n_ess, 1e-3);
        }
    }
    store
}

pub fn init_critic(
    arch: PolicyArch,
    dims: &NetDims,
    flat: Option<FlatDims>,
    rng: &mut ChaCha20Rng,
) -> ParameterStore {
    let mut store = ParameterStore::new();
    match arch {
        PolicyArch::Gnn(variant) => {
            insert_encoder(
                &mut store,
                rng,
                variant,
                dims,
                "critic.enc",
                dims.node_feat + 1,
            );
            insert_linear(&mut store, rng, "critic.trunk.h0", dims.hidden, dims.head_hidden, 1.0);
            insert_linear(
                &mut store,
                rng,
                "critic.trunk.h1",
                dims.head_hidden,
                dims.head_hidden,
                1.0,
            );
            insert_linear(&mut store, rng, "critic.q1", dims.head_hidden, 1, 1.0);
            insert_linear(&mut store, rng, "critic.q2", dims.head_hidden, 1, 1.0);
        }
        PolicyArch::Nn => {
            let fd = flat.expect("flat critic needs state dimensions");
            let in_dim = fd.state_dim + fd.n_ess;
            for q in ["q1", "q2"] {
                insert_linear(
                    &mut store,
                    rng,
                    &format!("critic.{q}.h0"),
                    in_dim,
                    dims.head_hidden,
                    1.0,
                );
                insert_linear(
                    &mut store,
                    rng,
                    &format!("critic.{q}.h1"),
                    dims.head_hidden,
                    dims.head_hidden,
                    1.0,
                );
                insert_linear(&mut store, rng, &format!("critic.{q}.out"), dims.head_hidden, 1, 1.0);
            }
        }
    }
    store
}

/// GNN actor forward: `[B, n, 6]` node features to `[B, k]` raw actions in
/// `[-1, 1]`, ordered by ascending ESS node id.
pub fn gnn_actor_forward(
    tape: &mut Tape,
    store: &ParameterStore,
    variant: GnnVariant,
    dims: &NetDims,
    features: Value,
    ctx: &GraphContext,
) -> Value {
    let h = encode(tape, store, variant, dims, "actor.enc", features, ctx);
    let ess = tape.gather_rows(h, ctx.ess_rows.clone());
    let b = tape.value(ess).shape()[0];
    let k = ctx.ess_rows.len();
    let flat = tape.reshape(ess, vec![b * k, dims.hidden]);
    let h0 = linear(tape, store, "actor.head.h0", flat);
    let h0 = tape.relu(h0);
    let h1 = linear(tape, store, "actor.head.h1", h0);
    let h1 = tape.relu(h1);
    let out = linear(tape, store, "actor.head.out", h1);
    let out = tape.reshape(out, vec![b, k]);
    tape.tanh(out)
}

/// Flat actor forward: `[B, state_dim]` to `[B, n_ess]` in `[-1, 1]`.
pub fn nn_actor_forward(
    tape: &mut Tape,
    store: &ParameterStore,
    features: Value,
) -> Value {
    let h0 = linear(tape, store, "actor.mlp.h0", features);
    let h0 = tape.relu(h0);
    let h1 = linear(tape, store, "actor.mlp.h1", h0);
    let h1 = tape.relu(h1);
    let out = linear(tape, store, "actor.mlp.out", h1);
    tape.tanh(out)
}

/// Twin Q-values for a batch. For GNN critics the raw action is written into
/// the seventh channel of ESS rows; for the flat baseline it is concatenated
/// to the state vector. Returns `(Q1, Q2)`, each `[B, 1]`.
pub fn critic_forward(
    tape: &mut Tape,
    store: &ParameterStore,
    arch: PolicyArch,
    dims: &NetDims,
    features: Value,
    action: Value,
    ctx: &GraphContext,
) -> (Value, Value) {
    match arch {
        PolicyArch::Gnn(variant) => {
            let shape = tape.value(features).shape().to_vec();
            assert_eq!(shape.len(), 3, "gnn critic wants [B,n,f], got {shape:?}");
            assert_eq!(
                tape.value(action).shape()[1],
                ctx.ess_rows.len(),
                "action dimension {:?} != |B| = {}",
                tape.value(action).shape(),
                ctx.ess_rows.len()
            );
            let channel = tape.scatter_rows(action, ctx.ess_rows.clone(), ctx.n);
            let with_action = tape.concat_last(features, channel);
            let h = encode(tape, store, variant, dims, "critic.enc", with_action, ctx);
            let pooled = tape.mean_rows(h);
            let t0 = linear(tape, store, "critic.trunk.h0", pooled);
            let t0 = tape.relu(t0);
            let t1 = linear(tape, store, "critic.trunk.h1", t0);
            let t1 = tape.relu(t1);
            let q1 = linear(tape, store, "critic.q1", t1);
            let q2 = linear(tape, store, "critic.q2", t1);
            (q1, q2)
        }
        PolicyArch::Nn => {
            let joint = tape.concat_last(features, action);
            let q = |tape: &mut Tape, name: &str| {
                let h0 = linear(tape, store, &format!("critic.{name}.h0"), joint);
                let h0 = tape.relu(h0);
                let h1 = linear(tape, store, &format!("critic.{name}.h1"), h0);
                let h1 = tape.relu(h1);
                linear(tape, store, &format!("critic.{name}.out"), h1)
            };
            let q1 = q(tape, "q1");
            let q2 = q(tape, "q2");
            (q1, q2)
        }
    }
}
