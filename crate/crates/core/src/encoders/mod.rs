//! Graph feature construction and the actor/critic networks.
//!
//! Node features are per-bus rows `{t, price, demand, I*SOC, I*V, I}` where
//! `I` flags ESS buses; ESS-only channels of other buses are zero-padded so
//! the indicator disambiguates padding from measurements. Three
//! message-passing layer families (GCN, TAGConv, GATv2) and a flat-MLP
//! baseline feed an asymmetric actor/critic pair: the actor maps each
//! ESS-node embedding through a shared head, the critic mean-pools the whole
//! graph.

pub mod layers;
pub mod nets;

use crate::env::GridState;
use crate::net::NetworkTopology;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::rc::Rc;
use thiserror::Error;

pub use nets::{critic_forward, gnn_actor_forward, init_actor, init_critic, nn_actor_forward};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GnnVariant {
    Gcn,
    TagConv,
    GatV2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyArch {
    /// Flat fixed-dimension MLP over the state vector.
    Nn,
    Gnn(GnnVariant),
}

pub const VARIANT_NAMES: [&str; 4] = ["nn", "gcn", "tagconv", "gatv2"];

#[derive(Debug, Error)]
#[error("unknown encoder variant {got:?}; valid options are nn, gcn, tagconv, gatv2")]
pub struct VariantParseError {
    pub got: String,
}

impl PolicyArch {
    pub fn parse(s: &str) -> Result<Self, VariantParseError> {
        match s {
            "nn" => Ok(PolicyArch::Nn),
            "gcn" => Ok(PolicyArch::Gnn(GnnVariant::Gcn)),
            "tagconv" => Ok(PolicyArch::Gnn(GnnVariant::TagConv)),
            "gatv2" => Ok(PolicyArch::Gnn(GnnVariant::GatV2)),
            other => Err(VariantParseError { got: other.into() }),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            PolicyArch::Nn => "nn",
            PolicyArch::Gnn(GnnVariant::Gcn) => "gcn",
            PolicyArch::Gnn(GnnVariant::TagConv) => "tagconv",
            PolicyArch::Gnn(GnnVariant::GatV2) => "gatv2",
        }
    }

    pub fn is_gnn(&self) -> bool {
        matches!(self, PolicyArch::Gnn(_))
    }
}

/// Width configuration. Paper-scale defaults: 6 node channels, 64 hidden,
/// 256-unit heads, 3-hop TAG filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetDims {
    pub node_feat: usize,
    pub hidden: usize,
    pub head_hidden: usize,
    pub tag_k: usize,
    pub layers: usize,
}

impl Default for NetDims {
    fn default() -> Self {
        Self {
            node_feat: 6,
            hidden: 64,
            head_hidden: 256,
            tag_k: 3,
            layers: 3,
        }
    }
}

/// Normalization constants for feature construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScaling {
    pub price_scale: f64,
    pub horizon: usize,
    pub base_kw: f64,
}

/// Everything a network needs to run on one topology: the adjacency-derived
/// constant matrices, ESS row indices and feature scaling. Parameters stay
/// topology-independent; swapping the context is zero-shot transfer.
#[derive(Debug, Clone)]
pub struct GraphContext {
    pub n: usize,
    pub ess_rows: Rc<Vec<usize>>,
    pub adjacency: Rc<Tensor>,
    /// Symmetrically normalized adjacency with self-loops.
    pub gcn_norm: Rc<Tensor>,
    /// `hop_masks[k][i][j] = 1` iff j is exactly k hops from i; index 0 is I.
    pub hop_masks: Vec<Rc<Tensor>>,
    /// Attention neighborhood: adjacency plus self-loops.
    pub gat_mask: Rc<Tensor>,
    pub scaling: FeatureScaling,
}

impl GraphContext {
    pub fn new(topo: &NetworkTopology, dims: &NetDims, scaling: FeatureScaling) -> Self {
        let n = topo.n_buses();
        let adj_rows = topo.adjacency();
        let mut adjacency = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in 0..n {
                adjacency.data_mut()[i * n + j] = adj_rows[i][j] as f64;
            }
        }

        let mut gat_mask = adjacency.clone();
        for i in 0..n {
            gat_mask.data_mut()[i * n + i] = 1.0;
        }

        // D^{-1/2} (A + I) D^{-1/2}, degrees counted after self-loops.
        let mut degree = vec![0.0f64; n];
        for i in 0..n {
            for j in 0..n {
                degree[i] += gat_mask.data()[i * n + j];
            }
        }
        let mut gcn_norm = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in 0..n {
                let a = gat_mask.data()[i * n + j];
                if a != 0.0 {
                    gcn_norm.data_mut()[i * n + j] = a / (degree[i] * degree[j]).sqrt();
                }
            }
        }

        let dist = hop_distances(&adj_rows);
        let mut hop_masks = Vec::with_capacity(dims.tag_k + 1);
        for k in 0..=dims.tag_k {
            let mut mask = Tensor::zeros(&[n, n]);
            for i in 0..n {
                for j in 0..n {
                    if dist[i][j] == Some(k) {
                        mask.data_mut()[i * n + j] = 1.0;
                    }
                }
            }
            hop_masks.push(Rc::new(mask));
        }

        Self {
            n,
            ess_rows: Rc::new(topo.ess_indices()),
            adjacency: Rc::new(adjacency),
            gcn_norm: Rc::new(gcn_norm),
            hop_masks,
            gat_mask: Rc::new(gat_mask),
            scaling,
        }
    }

    /// Flat state-vector length: `2 + |N| + 2|B|`.
    pub fn flat_dim(&self) -> usize {
        2 + self.n + 2 * self.ess_rows.len()
    }
}

fn hop_distances(adj: &[Vec<u8>]) -> Vec<Vec<Option<usize>>> {
    let n = adj.len();
    let mut dist = vec![vec![None; n]; n];
    for start in 0..n {
        let mut queue = VecDeque::new();
        dist[start][start] = Some(0);
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if adj[u][v] != 0 && dist[start][v].is_none() {
                    dist[start][v] = Some(dist[start][u].unwrap() + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    dist
}

fn state_channels(state: &GridState, ctx: &GraphContext) -> (f64, f64) {
    let t_norm = (state.t.min(ctx.scaling.horizon)) as f64 / ctx.scaling.horizon as f64;
    let price_norm = state.price / ctx.scaling.price_scale;
    (t_norm, price_norm)
}

/// Per-node feature rows of a batch of states: `[B, n, 6]`.
pub fn build_node_features(states: &[&GridState], ctx: &GraphContext) -> Tensor {
    let n = ctx.n;
    let b = states.len();
    let mut out = Tensor::zeros(&[b, n, 6]);
    for (s_idx, state) in states.iter().enumerate() {
        assert_eq!(
            state.demand_kw.len(),
            n,
            "state covers {} nodes, context has {n}",
            state.demand_kw.len()
        );
        let (t_norm, price_norm) = state_channels(state, ctx);
        for node in 0..n {
            let row = &mut out.data_mut()[(s_idx * n + node) * 6..(s_idx * n + node + 1) * 6];
            row[0] = t_norm;
            row[1] = price_norm;
            row[2] = state.demand_kw[node] / ctx.scaling.base_kw;
        }
        for (j, &node) in ctx.ess_rows.iter().enumerate() {
            let row = &mut out.data_mut()[(s_idx * n + node) * 6..(s_idx * n + node + 1) * 6];
            row[3] = state.soc[j];
            row[4] = state.v_ess_pu[j];
            row[5] = 1.0;
        }
    }
    out
}

/// Flat state vectors `[B, 2 + n + 2b]` for the baseline MLP.
pub fn build_flat_features(states: &[&GridState], ctx: &GraphContext) -> Tensor {
    let n = ctx.n;
    let b = ctx.ess_rows.len();
    let dim = ctx.flat_dim();
    let mut out = Tensor::zeros(&[states.len(), dim]);
    for (s_idx, state) in states.iter().enumerate() {
        assert_eq!(
            state.demand_kw.len(),
            n,
            "state covers {} nodes, context has {n}",
            state.demand_kw.len()
        );
        let (t_norm, price_norm) = state_channels(state, ctx);
        let row = &mut out.data_mut()[s_idx * dim..(s_idx + 1) * dim];
        row[0] = t_norm;
        row[1] = price_norm;
        for node in 0..n {
            row[2 + node] = state.demand_kw[node] / ctx.scaling.base_kw;
        }
        for j in 0..b {
            row[2 + n + j] = state.soc[j];
            row[2 + n + b + j] = state.v_ess_pu[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{load_network, load_reconfiguration_cases, BusId};

    fn scaling() -> FeatureScaling {
        FeatureScaling {
            price_scale: 0.2,
            horizon: 96,
            base_kw: 1000.0,
        }
    }

    fn state34(topo: &NetworkTopology) -> GridState {
        GridState {
            t: 12,
            price: 0.1,
            demand_kw: (0..topo.n_buses()).map(|i| i as f64).collect(),
            soc: vec![0.4; 5],
            v_ess_pu: vec![0.99; 5],
        }
    }

    #[test]
    fn ess_rows_flagged_and_padded() {
        let topo = load_network("../../data/feeder34.toml").unwrap();
        let ctx = GraphContext::new(&topo, &NetDims::default(), scaling());
        let state = state34(&topo);
        let f = build_node_features(&[&state], &ctx);
        assert_eq!(f.shape(), &[1, 34, 6]);
        let mut flagged = Vec::new();
        for node in 0..34 {
            let row = &f.data()[node * 6..(node + 1) * 6];
            if row[5] == 1.0 {
                flagged.push(BusId(node + 1));
                assert_eq!(row[3], 0.4);
                assert_eq!(row[4], 0.99);
            } else {
                assert_eq!(row[3], 0.0);
                assert_eq!(row[4], 0.0);
            }
        }
        assert_eq!(
            flagged,
            [12, 16, 27, 30, 34].map(BusId).to_vec(),
            "indicator rows must sit at the ESS buses"
        );
    }

    #[test]
    fn reconfiguration_changes_adjacency_not_features() {
        let topo = load_network("../../data/feeder34.toml").unwrap();
        let cases = load_reconfiguration_cases("../../data/reconfig34.toml").unwrap();
        let tp2 = cases.iter().find(|c| c.id == "TP2").unwrap();
        let reconf = topo.apply_reconfiguration(tp2).unwrap();
        let ctx_a = GraphContext::new(&topo, &NetDims::default(), scaling());
        let ctx_b = GraphContext::new(&reconf, &NetDims::default(), scaling());
        let state = state34(&topo);
        let fa = build_node_features(&[&state], &ctx_a);
        let fb = build_node_features(&[&state], &ctx_b);
        assert_eq!(fa, fb);
        let diff = ctx_a
            .adjacency
            .data()
            .iter()
            .zip(ctx_b.adjacency.data())
            .filter(|(x, y)| x != y)
            .count();
        assert_eq!(diff, 4, "one undirected swap flips four entries");
    }

    #[test]
    fn flat_dim_matches_formula() {
        let topo = load_network("../../data/feeder34.toml").unwrap();
        let ctx = GraphContext::new(&topo, &NetDims::default(), scaling());
        assert_eq!(ctx.flat_dim(), 2 + 34 + 10);
        let state = state34(&topo);
        let f = build_flat_features(&[&state], &ctx);
        assert_eq!(f.shape(), &[1, 46]);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!(PolicyArch::parse("gcn").unwrap(), PolicyArch::Gnn(GnnVariant::Gcn));
        assert_eq!(PolicyArch::parse("nn").unwrap(), PolicyArch::Nn);
        let err = PolicyArch::parse("resnet").unwrap_err();
        assert!(err.to_string().contains("nn, gcn, tagconv, gatv2"));
    }

    #[test]
    fn hop_masks_partition_the_tree() {
        let topo = load_network("../../data/feeder34.toml").unwrap();
        let ctx = GraphContext::new(&topo, &NetDims::default(), scaling());
        // masks are disjoint and k=0 is the identity
        let n = ctx.n;
        for i in 0..n {
            assert_eq!(ctx.hop_masks[0].data()[i * n + i], 1.0);
        }
        for i in 0..n {
            for j in 0..n {
                let hits: usize = ctx
                    .hop_masks
                    .iter()
                    .map(|m| (m.data()[i * n + j] != 0.0) as usize)
                    .sum();
                assert!(hits <= 1);
            }
        }
    }
}
