//! Single graph-convolution layers (GCN, GAT, GIN, GraphSAGE) and global
//! mean pooling over a batch of disjoint molecular graphs.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ad::{AdError, Index, Tape, Var};
use crate::graphrep::MolGraph;

/// LeakyReLU slope inside the GAT scoring function.
pub const GAT_NEGATIVE_SLOPE: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum GnnError {
    #[error("batch contains no graphs")]
    EmptyBatch,
    #[error("graph {index} has no nodes")]
    EmptyGraph { index: usize },
    #[error("graph {index} has {got} feature columns, expected {expected}")]
    FeatureWidth {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("graph {index} has an edge to node {node} but only {n_nodes} nodes")]
    BadEdge {
        index: usize,
        node: usize,
        n_nodes: usize,
    },
    #[error("{layer} expects {expected} parameter tensors, got {got}")]
    ParamCount {
        layer: LayerKind,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Ad(#[from] AdError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Gcn,
    Gat,
    Gin,
    Sage,
}

impl LayerKind {
    pub const ALL: [LayerKind; 4] = [
        LayerKind::Gcn,
        LayerKind::Gat,
        LayerKind::Gin,
        LayerKind::Sage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Gcn => "gcn",
            LayerKind::Gat => "gat",
            LayerKind::Gin => "gin",
            LayerKind::Sage => "sage",
        }
    }

    /// Names and shapes of the layer's parameter tensors, in the order
    /// [`conv_forward`] expects them. Matrices named `*bias` are row vectors.
    pub fn param_shapes(self, d_in: usize, d_out: usize) -> Vec<(&'static str, (usize, usize))> {
        match self {
            LayerKind::Gcn => vec![("conv.weight", (d_in, d_out))],
            LayerKind::Gat => vec![
                ("conv.weight", (d_in, d_out)),
                ("conv.attention", (2 * d_out, 1)),
            ],
            LayerKind::Gin => vec![
                ("conv.mlp1.weight", (d_in, d_out)),
                ("conv.mlp1.bias", (1, d_out)),
                ("conv.mlp2.weight", (d_out, d_out)),
                ("conv.mlp2.bias", (1, d_out)),
            ],
            LayerKind::Sage => vec![
                ("conv.self_weight", (d_in, d_out)),
                ("conv.neigh_weight", (d_in, d_out)),
            ],
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown layer kind '{0}' (expected gcn, gat, gin or sage)")]
pub struct ParseLayerKindError(String);

impl FromStr for LayerKind {
    type Err = ParseLayerKindError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(LayerKind::Gcn),
            "gat" => Ok(LayerKind::Gat),
            "gin" => Ok(LayerKind::Gin),
            "sage" | "graphsage" => Ok(LayerKind::Sage),
            _ => Err(ParseLayerKindError(s.to_string())),
        }
    }
}

/// Disjoint union of graphs with directed edge lists and the per-edge
/// constants every layer needs.
#[derive(Debug, Clone)]
pub struct BatchedGraphs {
    pub features: Array2<f64>,
    /// Directed edges; each undirected bond appears in both directions.
    pub src: Index,
    pub dst: Index,
    /// Directed edges followed by one self loop per node.
    pub src_loop: Index,
    pub dst_loop: Index,
    pub graph_ids: Index,
    pub n_graphs: usize,
    /// 1/sqrt(d_u d_v) per entry of the self-loop lists, degrees counting
    /// the self loop.
    gcn_norm: Array2<f64>,
    /// 1/deg per node, 0 for isolated nodes.
    inv_degree: Array2<f64>,
}

impl BatchedGraphs {
    pub fn new(graphs: &[MolGraph]) -> Result<Self, GnnError> {
        let first = graphs.first().ok_or(GnnError::EmptyBatch)?;
        let width = first.features.ncols();
        let total: usize = graphs.iter().map(MolGraph::n_nodes).sum();
        let mut features = Array2::zeros((total, width));
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut graph_ids = Vec::with_capacity(total);
        let mut offset = 0;
        for (index, g) in graphs.iter().enumerate() {
            let n = g.n_nodes();
            if n == 0 {
                return Err(GnnError::EmptyGraph { index });
            }
            if g.features.ncols() != width {
                return Err(GnnError::FeatureWidth {
                    index,
                    expected: width,
                    got: g.features.ncols(),
                });
            }
            features
                .slice_mut(ndarray::s![offset..offset + n, ..])
                .assign(&g.features);
            for &(u, v) in &g.edges {
                if let Some(&node) = [u, v].iter().find(|&&x| x >= n) {
                    return Err(GnnError::BadEdge {
                        index,
                        node,
                        n_nodes: n,
                    });
                }
                src.extend([offset + u, offset + v]);
                dst.extend([offset + v, offset + u]);
            }
            graph_ids.extend(std::iter::repeat_n(index, n));
            offset += n;
        }

        let mut degree = vec![0usize; total];
        for &v in &dst {
            degree[v] += 1;
        }
        let src_loop: Vec<usize> = src.iter().copied().chain(0..total).collect();
        let dst_loop: Vec<usize> = dst.iter().copied().chain(0..total).collect();
        let gcn_norm = Array2::from_shape_fn((src_loop.len(), 1), |(k, _)| {
            let du = (degree[src_loop[k]] + 1) as f64;
            let dv = (degree[dst_loop[k]] + 1) as f64;
            1.0 / (du * dv).sqrt()
        });
        let inv_degree = Array2::from_shape_fn((total, 1), |(i, _)| match degree[i] {
            0 => 0.0,
            d => 1.0 / d as f64,
        });

        Ok(BatchedGraphs {
            features,
            src: src.into(),
            dst: dst.into(),
            src_loop: src_loop.into(),
            dst_loop: dst_loop.into(),
            graph_ids: graph_ids.into(),
            n_graphs: graphs.len(),
            gcn_norm,
            inv_degree,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_directed_edges(&self) -> usize {
        self.src.len()
    }
}

/// D̂^{-1/2}(A+I)D̂^{-1/2} X W, evaluated edge-wise.
pub fn gcn_layer(tape: &mut Tape, batch: &BatchedGraphs, x: Var, w: Var) -> Result<Var, AdError> {
    let xw = tape.matmul(x, w)?;
    let msg = tape.gather_rows(xw, batch.src_loop.clone())?;
    let norm = tape.constant(batch.gcn_norm.clone());
    let msg = tape.mul_column(msg, norm)?;
    tape.scatter_sum(msg, batch.dst_loop.clone(), batch.n_nodes())
}

/// Single-head attention with self loops. Returns the node embeddings and
/// the attention coefficients, one per entry of the self-loop edge lists.
pub fn gat_layer(
    tape: &mut Tape,
    batch: &BatchedGraphs,
    x: Var,
    w: Var,
    attention: Var,
) -> Result<(Var, Var), AdError> {
    let xw = tape.matmul(x, w)?;
    let d = tape.shape(xw).1;
    if tape.shape(attention) != (2 * d, 1) {
        return Err(AdError::ShapeMismatch {
            op: "gat_layer",
            lhs: tape.shape(xw),
            rhs: tape.shape(attention),
        });
    }
    // a^T [Wx_u || Wx_v] = (Wx a_src)_u + (Wx a_dst)_v
    let a_src = tape.slice_rows(attention, 0, d)?;
    let a_dst = tape.slice_rows(attention, d, d)?;
    let s_src = tape.matmul(xw, a_src)?;
    let s_dst = tape.matmul(xw, a_dst)?;
    let e_src = tape.gather_rows(s_src, batch.src_loop.clone())?;
    let e_dst = tape.gather_rows(s_dst, batch.dst_loop.clone())?;
    let e = tape.add(e_src, e_dst)?;
    let e = tape.leaky_relu(e, GAT_NEGATIVE_SLOPE);
    let alpha = tape.segment_softmax(e, batch.dst_loop.clone(), batch.n_nodes())?;
    let msg = tape.gather_rows(xw, batch.src_loop.clone())?;
    let msg = tape.mul_column(msg, alpha)?;
    let h = tape.scatter_sum(msg, batch.dst_loop.clone(), batch.n_nodes())?;
    Ok((h, alpha))
}

/// MLP(x_v + Σ_{u∈N(v)} x_u) with MLP = linear, ReLU, linear.
pub fn gin_layer(
    tape: &mut Tape,
    batch: &BatchedGraphs,
    x: Var,
    mlp: [Var; 4],
) -> Result<Var, AdError> {
    let [w1, b1, w2, b2] = mlp;
    let neigh = tape.gather_rows(x, batch.src.clone())?;
    let agg = tape.scatter_sum(neigh, batch.dst.clone(), batch.n_nodes())?;
    let agg = tape.add(x, agg)?;
    let h = tape.matmul(agg, w1)?;
    let h = tape.add_row_broadcast(h, b1)?;
    let h = tape.relu(h);
    let h = tape.matmul(h, w2)?;
    tape.add_row_broadcast(h, b2)
}

/// W_self x_v + W_neigh mean_{u∈N(v)} x_u, optionally L2-normalized per row.
pub fn sage_layer(
    tape: &mut Tape,
    batch: &BatchedGraphs,
    x: Var,
    w_self: Var,
    w_neigh: Var,
    l2_normalize: bool,
) -> Result<Var, AdError> {
    let neigh = tape.gather_rows(x, batch.src.clone())?;
    let sum = tape.scatter_sum(neigh, batch.dst.clone(), batch.n_nodes())?;
    let inv = tape.constant(batch.inv_degree.clone());
    let mean = tape.mul_column(sum, inv)?;
    let own = tape.matmul(x, w_self)?;
    let other = tape.matmul(mean, w_neigh)?;
    let h = tape.add(own, other)?;
    Ok(if l2_normalize {
        tape.l2_normalize_rows(h)
    } else {
        h
    })
}

/// Dispatches to the layer named by `kind` with parameters ordered as in
/// [`LayerKind::param_shapes`].
pub fn conv_forward(
    tape: &mut Tape,
    kind: LayerKind,
    batch: &BatchedGraphs,
    x: Var,
    params: &[Var],
    sage_l2_norm: bool,
) -> Result<Var, GnnError> {
    let expected = kind.param_shapes(1, 1).len();
    if params.len() != expected {
        return Err(GnnError::ParamCount {
            layer: kind,
            expected,
            got: params.len(),
        });
    }
    let h = match kind {
        LayerKind::Gcn => gcn_layer(tape, batch, x, params[0])?,
        LayerKind::Gat => gat_layer(tape, batch, x, params[0], params[1])?.0,
        LayerKind::Gin => gin_layer(tape, batch, x, [params[0], params[1], params[2], params[3]])?,
        LayerKind::Sage => sage_layer(tape, batch, x, params[0], params[1], sage_l2_norm)?,
    };
    Ok(h)
}

/// Per-graph mean of node rows.
pub fn global_mean_pool(tape: &mut Tape, batch: &BatchedGraphs, h: Var) -> Result<Var, AdError> {
    tape.segment_mean(h, batch.graph_ids.clone(), batch.n_graphs)
}
