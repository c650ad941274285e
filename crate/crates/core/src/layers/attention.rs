use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::{check_input, GraphContext, LayerConfig, LayerKind};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{shape_err, Result};

/// Attention coefficients of one head, one entry per (centre, neighbour)
/// pair. Coefficients of each centre sum to 1.
#[derive(Debug, Clone)]
pub struct AttentionMap {
    pub head: usize,
    pub pairs: Vec<(usize, usize)>,
    pub alpha: Var,
}

struct Segments {
    centres: Arc<[usize]>,
    neighbours: Arc<[usize]>,
    offsets: Arc<[usize]>,
}

/// Closed neighbourhoods extended, per centre, by the given negative pairs
/// (each pair joins both endpoints' segments).
fn with_negatives(ctx: &GraphContext, negatives: &[(usize, usize)]) -> Segments {
    let closed = ctx.closed();
    let mut extra = vec![Vec::new(); ctx.n()];
    for &(u, v) in negatives {
        extra[u].push(v);
        extra[v].push(u);
    }
    let mut centres = Vec::with_capacity(closed.len() + 2 * negatives.len());
    let mut neighbours = Vec::with_capacity(centres.capacity());
    let mut offsets = vec![0];
    for u in 0..ctx.n() {
        let span = closed.offsets[u]..closed.offsets[u + 1];
        neighbours.extend_from_slice(&closed.neighbours[span.clone()]);
        neighbours.extend_from_slice(&extra[u]);
        centres.resize(neighbours.len(), u);
        offsets.push(neighbours.len());
    }
    Segments {
        centres: centres.into(),
        neighbours: neighbours.into(),
        offsets: offsets.into(),
    }
}

/// `softmax_u(LeakyReLU(a_centreᵀ Wh_u + a_neighbourᵀ Wh_v))` over segments.
fn coefficients(
    tape: &mut Tape,
    wh: Var,
    att: Var,
    out_dim: usize,
    slope: f64,
    seg: &Segments,
) -> Result<Var> {
    let a_centre = tape.slice_rows(att, 0, out_dim)?;
    let a_neigh = tape.slice_rows(att, out_dim, out_dim)?;
    let s_centre = tape.matmul(wh, a_centre)?;
    let s_neigh = tape.matmul(wh, a_neigh)?;
    let left = tape.gather_rows(s_centre, Arc::clone(&seg.centres))?;
    let right = tape.gather_rows(s_neigh, Arc::clone(&seg.neighbours))?;
    let logits = tape.add(left, right)?;
    let logits = tape.leaky_relu(logits, slope);
    tape.segment_softmax(logits, Arc::clone(&seg.offsets))
}

fn attend(
    tape: &mut Tape,
    cfg: &LayerConfig,
    params: &[Var],
    ctx: &GraphContext,
    h: Var,
    edge_features: Option<&Tensor>,
    negatives: &[(usize, usize)],
) -> Result<(Var, Vec<AttentionMap>)> {
    check_input(tape, cfg, ctx, h)?;
    let per_head = cfg.params_per_head();
    if params.len() != per_head * cfg.attention_heads {
        return shape_err(format!("{} layer got {} parameters", cfg.kind, params.len()));
    }
    let closed = ctx.closed();
    let seg = Segments {
        centres: Arc::clone(&closed.centres),
        neighbours: Arc::clone(&closed.neighbours),
        offsets: Arc::clone(&closed.offsets),
    };
    let edge_rows = match (cfg.edge_dim, edge_features) {
        (0, None) => None,
        (0, Some(f)) if f.cols() == 0 => None,
        (0, Some(_)) => return shape_err("edge features given to a layer with edge_dim 0"),
        (d, Some(f)) if f.cols() == d => Some(tape.constant(ctx.closed_edge_features(f)?)),
        (d, Some(f)) => return shape_err(format!("edge features have width {}, expected {d}", f.cols())),
        // absent features are zero vectors, whose projection vanishes
        (_, None) => None,
    };
    let supervised = (!negatives.is_empty()).then(|| with_negatives(ctx, negatives));

    let mut total: Option<Var> = None;
    let mut maps = Vec::with_capacity(cfg.attention_heads);
    for head in 0..cfg.attention_heads {
        let p = &params[head * per_head..(head + 1) * per_head];
        let (w, w_edge, att) = if per_head == 3 {
            (p[0], Some(p[1]), p[2])
        } else {
            (p[0], None, p[1])
        };
        let wh = tape.matmul(h, w)?;
        let alpha = coefficients(tape, wh, att, cfg.out_dim, cfg.leaky_slope, &seg)?;
        let mut messages = tape.gather_rows(wh, Arc::clone(&seg.neighbours))?;
        if let (Some(rows), Some(we)) = (edge_rows, w_edge) {
            let projected = tape.matmul(rows, we)?;
            messages = tape.add(messages, projected)?;
        }
        let weighted = tape.scale_rows(messages, alpha)?;
        let out = tape.scatter_add_rows(weighted, Arc::clone(&seg.centres), ctx.n())?;
        total = Some(match total {
            None => out,
            Some(acc) => tape.add(acc, out)?,
        });
        maps.push(match &supervised {
            None => AttentionMap {
                head,
                pairs: closed.pairs(),
                alpha,
            },
            Some(s) => AttentionMap {
                head,
                pairs: s.centres.iter().copied().zip(s.neighbours.iter().copied()).collect(),
                alpha: coefficients(tape, wh, att, cfg.out_dim, cfg.leaky_slope, s)?,
            },
        });
    }
    let mut out = total.expect("at least one head");
    if cfg.attention_heads > 1 {
        out = tape.scale(out, 1.0 / cfg.attention_heads as f64);
    }
    Ok((cfg.activation.apply(tape, out), maps))
}

/// Attention-weighted sum of `W h_v` over closed neighbourhoods, averaged
/// over heads, then the activation.
pub fn gat_forward(tape: &mut Tape, cfg: &LayerConfig, params: &[Var], ctx: &GraphContext, h: Var) -> Result<Var> {
    attend(tape, cfg, params, ctx, h, None, &[]).map(|(out, _)| out)
}

/// GAT aggregation of `W [h_v ‖ e_uv]`, returning the per-head attention
/// maps for the auxiliary loss. With `negatives`, the returned maps are a
/// second softmax over each closed neighbourhood plus the negative partners
/// of its centre (aggregation still uses the closed neighbourhood only).
pub fn supergat_forward(
    tape: &mut Tape,
    cfg: &LayerConfig,
    params: &[Var],
    ctx: &GraphContext,
    h: Var,
    edge_features: Option<&Tensor>,
    negatives: &[(usize, usize)],
) -> Result<(Var, Vec<AttentionMap>)> {
    debug_assert_eq!(cfg.kind, LayerKind::SuperGat);
    attend(tape, cfg, params, ctx, h, edge_features, negatives)
}

/// Target coefficients: `1 / (deg(u) + 1)` for each observed neighbour and
/// the self-loop of centre `u`, 0 for any other pair in the map.
pub fn attention_targets(map: &AttentionMap, ctx: &GraphContext) -> HashMap<(usize, usize), f64> {
    let observed: HashSet<(usize, usize)> = ctx
        .edges()
        .iter()
        .flat_map(|&(u, v)| [(u, v), (v, u)])
        .collect();
    map.pairs
        .iter()
        .map(|&(u, v)| {
            let target = if u == v || observed.contains(&(u, v)) {
                1.0 / (ctx.degree(u) + 1) as f64
            } else {
                0.0
            };
            ((u, v), target)
        })
        .collect()
}

/// `Σ (α_uv − α*_uv)²` over the pairs of the map.
pub fn supergat_attention_loss(
    tape: &mut Tape,
    map: &AttentionMap,
    targets: &HashMap<(usize, usize), f64>,
) -> Result<Var> {
    if targets.len() != map.pairs.len() {
        return shape_err(format!(
            "{} attention targets for {} pairs",
            targets.len(),
            map.pairs.len()
        ));
    }
    let mut column = Vec::with_capacity(map.pairs.len());
    for pair in &map.pairs {
        match targets.get(pair) {
            Some(&t) => column.push(t),
            None => return shape_err(format!("no attention target for pair {pair:?}")),
        }
    }
    let n = column.len() as f64;
    let target = tape.constant(Tensor::column(column));
    let mse = tape.mse(map.alpha, target)?;
    Ok(tape.scale(mse, n))
}
