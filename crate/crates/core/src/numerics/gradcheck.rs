//! Central finite-difference checks for the autodiff engine.

use std::collections::BTreeMap;

use rand::Rng;

use super::autodiff::{Graph, NodeId, OpKind, Value};
use crate::error::Result;

pub const FD_EPSILON: f64 = 1e-3;
/// Denominator floor for relative error, so exact-zero gradients compare absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-3;
pub const MAX_RELATIVE_ERROR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_relative_error < MAX_RELATIVE_ERROR
    }

    pub fn merge(self, other: GradCheck) -> GradCheck {
        GradCheck {
            max_relative_error: self.max_relative_error.max(other.max_relative_error),
            checked: self.checked + other.checked,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares analytic gradients of `loss` against central differences for the
/// leaves in `wrt`, using any scalar objective computed from the evaluation.
pub fn check_with<F>(
    bindings: &BTreeMap<NodeId, Value>,
    wrt: &[NodeId],
    analytic: &BTreeMap<NodeId, Value>,
    objective: F,
) -> Result<GradCheck>
where
    F: Fn(&BTreeMap<NodeId, Value>) -> Result<f64>,
{
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut probe = bindings.clone();
    for id in wrt {
        let n = bindings[id].data.len();
        for i in 0..n {
            let x = bindings[id].data[i];
            probe.get_mut(id).unwrap().data[i] = x + FD_EPSILON;
            let plus = objective(&probe)?;
            probe.get_mut(id).unwrap().data[i] = x - FD_EPSILON;
            let minus = objective(&probe)?;
            probe.get_mut(id).unwrap().data[i] = x;
            let numeric = (plus - minus) / (2.0 * FD_EPSILON);
            worst = worst.max(relative_error(analytic[id].data[i], numeric));
            checked += 1;
        }
    }
    Ok(GradCheck {
        max_relative_error: worst,
        checked,
    })
}

/// Checks every leaf gradient of a scalar `loss` node.
pub fn check_graph(
    graph: &Graph,
    bindings: &BTreeMap<NodeId, Value>,
    loss: NodeId,
) -> Result<GradCheck> {
    let analytic = graph.eval(bindings)?.gradients(loss)?;
    let wrt: Vec<NodeId> = graph.leaves().map(|(id, _)| id).collect();
    check_with(bindings, &wrt, &analytic, |b| {
        Ok(graph.eval(b)?.value(loss).data[0])
    })
}

/// A small random graph ending in a scalar mean, with bindings drawn from `rng`.
///
/// `lead` picks the first operation so that a run of graphs covers every kind.
pub struct RandomGraph {
    pub graph: Graph,
    pub bindings: BTreeMap<NodeId, Value>,
    pub loss: NodeId,
}

const ROWS: usize = 3;
const WIDTH: usize = 4;

pub fn random_graph<R: Rng>(rng: &mut R, lead: OpKind) -> Result<RandomGraph> {
    let mut g = Graph::new();
    let x = g.leaf("x");
    let y = g.leaf("y");
    let w = g.leaf("w");
    let w_wide = g.leaf("w_wide");
    let v = g.leaf("v");
    let gamma = g.leaf("gamma");
    let beta = g.leaf("beta");

    // pool of [ROWS, WIDTH] nodes
    let mut pool = vec![x, y];
    let steps = rng.gen_range(2..5);
    let mut reduced = None;
    for step in 0..steps {
        let kind = if step == 0 {
            lead
        } else {
            ALL_KINDS[rng.gen_range(0..ALL_KINDS.len())]
        };
        let a = pool[rng.gen_range(0..pool.len())];
        let b = pool[rng.gen_range(0..pool.len())];
        let node = match kind {
            OpKind::Add => g.add(a, b),
            OpKind::Multiply => g.mul(a, b),
            OpKind::MatMul => {
                if rng.gen_bool(0.3) && reduced.is_none() {
                    // matrix-vector product; collapses to [ROWS]
                    let mv = g.matmul(a, v);
                    reduced = Some(mv);
                    continue;
                }
                g.matmul(a, w)
            }
            OpKind::Sigmoid => g.sigmoid(a),
            OpKind::Relu => g.relu(a),
            OpKind::ScaleShift => g.scale_shift(a, gamma, beta),
            OpKind::Concat => {
                let c = g.concat(&[a, b]);
                g.matmul(c, w_wide)
            }
            OpKind::Mean => {
                // a mean feeding a further product keeps the reduction off the tail
                let m = g.mean(a);
                let scaled = g.mul(m, m);
                reduced = Some(scaled);
                continue;
            }
        };
        pool.push(node);
    }
    let last = *pool.last().unwrap();
    let mut loss = g.mean(last);
    if let Some(r) = reduced {
        let tail = g.mean(r);
        let prod = g.mul(loss, tail);
        loss = g.add(prod, loss);
    }

    let mut bindings = BTreeMap::new();
    let mut bind = |id: NodeId, dims: Vec<usize>, rng: &mut R| {
        let n = dims.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        bindings.insert(id, Value::new(dims, data).unwrap());
    };
    bind(x, vec![ROWS, WIDTH], rng);
    bind(y, vec![ROWS, WIDTH], rng);
    bind(w, vec![WIDTH, WIDTH], rng);
    bind(w_wide, vec![2 * WIDTH, WIDTH], rng);
    bind(v, vec![WIDTH], rng);
    bind(gamma, vec![WIDTH], rng);
    bind(beta, vec![WIDTH], rng);
    Ok(RandomGraph {
        graph: g,
        bindings,
        loss,
    })
}

pub const ALL_KINDS: [OpKind; 8] = [
    OpKind::Add,
    OpKind::Multiply,
    OpKind::MatMul,
    OpKind::Sigmoid,
    OpKind::Relu,
    OpKind::Mean,
    OpKind::ScaleShift,
    OpKind::Concat,
];

/// Smallest distance from zero over all relu inputs; finite differences are
/// unreliable when this is below the step size.
pub fn relu_margin(graph: &Graph, bindings: &BTreeMap<NodeId, Value>) -> Result<f64> {
    let eval = graph.eval(bindings)?;
    let mut margin = f64::INFINITY;
    for i in 0..graph.len() {
        let id = NodeId::from_index(i);
        if graph.kind(id) == Some(OpKind::Relu) {
            let input = graph.inputs(id)[0];
            for v in &eval.value(input).data {
                margin = margin.min(v.abs());
            }
        }
    }
    Ok(margin)
}

/// Runs `count` random graph checks, resampling any graph whose relu inputs sit
/// within `10 * FD_EPSILON` of the kink.
pub fn check_random_graphs<R: Rng>(rng: &mut R, count: usize) -> Result<GradCheck> {
    let mut total = GradCheck {
        max_relative_error: 0.0,
        checked: 0,
    };
    for i in 0..count {
        let lead = ALL_KINDS[i % ALL_KINDS.len()];
        let rg = loop {
            let rg = random_graph(rng, lead)?;
            if relu_margin(&rg.graph, &rg.bindings)? > 10.0 * FD_EPSILON {
                break rg;
            }
        };
        total = total.merge(check_graph(&rg.graph, &rg.bindings, rg.loss)?);
    }
    Ok(total)
}
