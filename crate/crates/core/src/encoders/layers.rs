//! Message-passing layer forwards. Each takes `[B, n, f]` node embeddings
//! and the graph context's constant matrices, and returns `[B, n, out]`.
//!
//! Layer parameters live in a [`ParameterStore`] under a caller-supplied
//! prefix; weight shapes are `[in, out]` (right-multiplication).

use super::GraphContext;
use crate::tensor::optim::ParameterStore;
use crate::tensor::tape::{Tape, Value};

/// Negative slope of the attention scoring LeakyReLU.
pub const GAT_LEAKY_SLOPE: f64 = 0.2;

fn dims3(tape: &Tape, h: Value) -> (usize, usize, usize) {
    let s = tape.value(h).shape();
    assert_eq!(s.len(), 3, "layer input must be [B,n,f], got {s:?}");
    (s[0], s[1], s[2])
}

/// Apply `W` over the last axis: `[B,n,f] x [f,out] -> [B,n,out]`.
fn linear3(tape: &mut Tape, h: Value, w: Value) -> Value {
    let (b, n, f) = dims3(tape, h);
    let out = tape.value(w).shape()[1];
    let flat = tape.reshape(h, vec![b * n, f]);
    let z = tape.matmul(flat, w);
    tape.reshape(z, vec![b, n, out])
}

/// GCN layer: `relu(D^{-1/2}(A+I)D^{-1/2} H W)` with degrees counted after
/// self-loop insertion.
pub fn gcn_forward(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    h: Value,
    ctx: &GraphContext,
    activation: bool,
) -> Value {
    let w = tape.param(store, &format!("{prefix}.w"));
    let z = linear3(tape, h, w);
    let mixed = tape.const_matmul(ctx.gcn_norm.clone(), z);
    if activation {
        tape.relu(mixed)
    } else {
        mixed
    }
}

/// TAGConv layer: `relu(sum_k M_k H W_k)` where `M_k` selects exactly-k-hop
/// neighbors and `M_0` is the identity.
pub fn tag_forward(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    h: Value,
    ctx: &GraphContext,
    activation: bool,
) -> Value {
    let mut acc: Option<Value> = None;
    for (k, mask) in ctx.hop_masks.iter().enumerate() {
        let w = tape.param(store, &format!("{prefix}.w{k}"));
        let hopped = tape.const_matmul(mask.clone(), h);
        let z = linear3(tape, hopped, w);
        acc = Some(match acc {
            Some(prev) => tape.add(prev, z),
            None => z,
        });
    }
    let sum = acc.expect("tag filter order >= 0");
    if activation {
        tape.relu(sum)
    } else {
        sum
    }
}

/// GATv2 layer. Scores `e_ij = a^T leaky(W_L h_i + W_R h_j)` over the
/// self-loop-augmented neighborhood, softmax per row, messages `W_R h_j`.
pub fn gat_forward(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    h: Value,
    ctx: &GraphContext,
    activation: bool,
) -> Value {
    let wl = tape.param(store, &format!("{prefix}.wl"));
    let wr = tape.param(store, &format!("{prefix}.wr"));
    let a = tape.param(store, &format!("{prefix}.a"));
    let s = linear3(tape, h, wl);
    let t = linear3(tape, h, wr);
    let scores = tape.gat_pair_scores(s, t, a, GAT_LEAKY_SLOPE);
    let alpha = tape.masked_softmax_rows(scores, ctx.gat_mask.clone());
    let mixed = tape.batch_matmul(alpha, t);
    if activation {
        tape.relu(mixed)
    } else {
        mixed
    }
}
