//! Feed-forward DAG networks with ReLU and max-pool nonlinearities.
//!
//! Layers are indexed `0..=L` (0 = input, `L` = output). An edge `(to, from)`
//! with `from < to` carries a dense weight matrix of shape
//! `width(to) x width(from)`; skip connections are edges with `to - from > 1`.
//! The pre-activation recursion is
//!
//! ```text
//! z[l] = sum over edges (l, l') of  W(l,l') * a[l'],    a[l'] = mask[l'] o z[l']
//! ```
//!
//! with `a[0] = x` and no nonlinearity at the output layer. Masks are 0/1:
//! ReLU activates strictly positive entries; max-pool activates exactly one
//! argmax entry per pool group (lowest index on ties).
//!
//! The output admits an exact path-space form: for every output unit `k`,
//! `z[L][k] = sum_j path_input[j] * path_mask[j] * path_weight[k][j]`, where
//! `j` ranges over input-to-output paths. [`PathSpace`] enumerates the paths
//! explicitly for small networks; squared- and absolute-weight forward passes
//! compute the path-weight L2/L1 norms without enumeration.
//!
//! Weight entries may alias shared parameters through a tie map; gradients
//! accumulate across aliases. Biases are not supported: append a constant-1
//! input coordinate if an affine term is needed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::rng::{derive_seed, Rng};

/// Default ceiling on explicit path enumeration.
pub const DEFAULT_PATH_CAP: usize = 65_536;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("network needs an input and an output layer")]
    TooFewLayers,
    #[error("layer {layer} has zero width")]
    ZeroWidth { layer: usize },
    #[error("edge ({to} <- {from}) violates the layer ordering")]
    EdgeOrder { to: usize, from: usize },
    #[error("duplicate edge ({to} <- {from})")]
    DuplicateEdge { to: usize, from: usize },
    #[error("edge ({to} <- {from}) has weight shape {got_rows}x{got_cols}, expected {exp_rows}x{exp_cols}")]
    EdgeShape {
        to: usize,
        from: usize,
        got_rows: usize,
        got_cols: usize,
        exp_rows: usize,
        exp_cols: usize,
    },
    #[error("hidden layer {layer} has no {direction} edge")]
    DisconnectedLayer {
        layer: usize,
        direction: &'static str,
    },
    #[error("max-pool group {group} does not divide width {width} of layer {layer}")]
    BadPoolGroup {
        layer: usize,
        group: usize,
        width: usize,
    },
    #[error("input has length {got}, expected {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("supplied mask set does not match the architecture")]
    MaskShape,
    #[error("nonlinearity list has length {got}, expected one per hidden layer ({expected})")]
    NonlinearityCount { expected: usize, got: usize },
    #[error("path count {count} exceeds cap {cap}")]
    PathCapExceeded { count: u128, cap: usize },
    #[error("network is not layered: {reason}")]
    NotLayered { reason: String },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("tie map invalid: {0}")]
    BadTieMap(String),
    #[error("unsupported network document version {version}")]
    BadVersion { version: u32 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Per-hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Relu,
    MaxPool { group: usize },
}

/// One weighted connection between two layers.
#[derive(Debug, Clone)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    weights: Matrix,
    /// Row-major map from weight entry to shared parameter id.
    ties: Vec<u32>,
}

impl Edge {
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn ties(&self) -> &[u32] {
        &self.ties
    }
}

/// Input to [`DagNetwork::new`]: an edge with optional parameter sharing.
/// When `ties` is `None` every weight entry is its own parameter.
#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    pub weights: Matrix,
    pub ties: Option<Vec<u32>>,
}

/// A layered DAG of weight matrices with ReLU/max-pool nonlinearities.
#[derive(Debug, Clone)]
pub struct DagNetwork {
    widths: Vec<usize>,
    nonlinearity: Vec<Nonlinearity>,
    edges: Vec<Edge>,
    param_count: usize,
    /// First (edge, entry) occurrence of each parameter id.
    param_anchor: Vec<(u32, u32)>,
    init_seed: Option<u64>,
}

/// Record of one forward pass: pre-activations and 0/1 masks per layer.
/// `masks[0]` and `masks[L]` are all-ones (no nonlinearity there).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub pre_activations: Vec<Vec<f64>>,
    pub masks: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.pre_activations.last().expect("trace has layers")
    }

    fn post_activation(&self, layer: usize) -> Vec<f64> {
        self.pre_activations[layer]
            .iter()
            .zip(&self.masks[layer])
            .map(|(&z, &m)| m * z)
            .collect()
    }
}

impl DagNetwork {
    /// Validating constructor from explicit edge matrices.
    pub fn new(
        widths: Vec<usize>,
        nonlinearity: Vec<Nonlinearity>,
        edge_specs: Vec<EdgeSpec>,
    ) -> Result<Self, NetError> {
        if widths.len() < 2 {
            return Err(NetError::TooFewLayers);
        }
        for (layer, &w) in widths.iter().enumerate() {
            if w == 0 {
                return Err(NetError::ZeroWidth { layer });
            }
        }
        let last = widths.len() - 1;
        if nonlinearity.len() != last - 1 {
            return Err(NetError::NonlinearityCount {
                expected: last - 1,
                got: nonlinearity.len(),
            });
        }
        for (i, nl) in nonlinearity.iter().enumerate() {
            if let Nonlinearity::MaxPool { group } = nl {
                let layer = i + 1;
                if *group == 0 || widths[layer] % group != 0 {
                    return Err(NetError::BadPoolGroup {
                        layer,
                        group: *group,
                        width: widths[layer],
                    });
                }
            }
        }

        let mut edges: Vec<Edge> = Vec::with_capacity(edge_specs.len());
        let mut seen = std::collections::HashSet::new();
        let mut next_param: u32 = 0;
        // Ties: spec ids are per-edge-local when provided; `None` means fresh
        // parameters. Ids are remapped into one global contiguous space.
        let mut explicit_tie_base: Option<u32> = None;
        let mut explicit_tie_max: u32 = 0;
        let has_explicit = edge_specs.iter().any(|e| e.ties.is_some());
        if has_explicit {
            // With explicit ties, ids are global across all edges and must be
            // contiguous from zero.
            explicit_tie_base = Some(0);
        }
        for spec in edge_specs {
            let EdgeSpec {
                from,
                to,
                weights,
                ties,
            } = spec;
            if to <= from || to > last {
                return Err(NetError::EdgeOrder { to, from });
            }
            if !seen.insert((to, from)) {
                return Err(NetError::DuplicateEdge { to, from });
            }
            let (exp_rows, exp_cols) = (widths[to], widths[from]);
            if weights.rows() != exp_rows || weights.cols() != exp_cols {
                return Err(NetError::EdgeShape {
                    to,
                    from,
                    got_rows: weights.rows(),
                    got_cols: weights.cols(),
                    exp_rows,
                    exp_cols,
                });
            }
            weights
                .check_finite()
                .map_err(|_| NetError::NonFinite {
                    context: format!("edge ({to} <- {from}) weights"),
                })?;
            let n_entries = exp_rows * exp_cols;
            let ties = match ties {
                Some(t) => {
                    if t.len() != n_entries {
                        return Err(NetError::BadTieMap(format!(
                            "edge ({to} <- {from}) tie map has length {}, expected {n_entries}",
                            t.len()
                        )));
                    }
                    if let Some(&m) = t.iter().max() {
                        explicit_tie_max = explicit_tie_max.max(m);
                    }
                    t
                }
                None => {
                    if has_explicit {
                        return Err(NetError::BadTieMap(
                            "mixing edges with and without tie maps is not supported".into(),
                        ));
                    }
                    let t = (next_param..next_param + n_entries as u32).collect();
                    next_param += n_entries as u32;
                    t
                }
            };
            edges.push(Edge {
                from,
                to,
                weights,
                ties,
            });
        }
        edges.sort_by_key(|e| (e.to, e.from));

        for layer in 1..last {
            if !edges.iter().any(|e| e.to == layer) {
                return Err(NetError::DisconnectedLayer {
                    layer,
                    direction: "incoming",
                });
            }
            if !edges.iter().any(|e| e.from == layer) {
                return Err(NetError::DisconnectedLayer {
                    layer,
                    direction: "outgoing",
                });
            }
        }
        if !edges.iter().any(|e| e.to == last) {
            return Err(NetError::DisconnectedLayer {
                layer: last,
                direction: "incoming",
            });
        }
        if !edges.iter().any(|e| e.from == 0) {
            return Err(NetError::DisconnectedLayer {
                layer: 0,
                direction: "outgoing",
            });
        }

        let param_count = if explicit_tie_base.is_some() {
            (explicit_tie_max + 1) as usize
        } else {
            next_param as usize
        };
        let mut param_anchor: Vec<Option<(u32, u32)>> = vec![None; param_count];
        for (ei, edge) in edges.iter().enumerate() {
            for (ti, &p) in edge.ties.iter().enumerate() {
                let slot = param_anchor
                    .get_mut(p as usize)
                    .ok_or_else(|| NetError::BadTieMap(format!("parameter id {p} out of range")))?;
                if slot.is_none() {
                    *slot = Some((ei as u32, ti as u32));
                }
            }
        }
        let param_anchor: Vec<(u32, u32)> = param_anchor
            .into_iter()
            .enumerate()
            .map(|(p, a)| a.ok_or_else(|| NetError::BadTieMap(format!("parameter id {p} unused"))))
            .collect::<Result<_, _>>()?;

        let mut net = Self {
            widths,
            nonlinearity,
            edges,
            param_count,
            param_anchor,
            init_seed: None,
        };
        // Normalize: aliases of one parameter must agree; anchor entry wins.
        let params = net.params();
        net.set_params(&params).expect("normalizing tied weights");
        Ok(net)
    }

    /// Fully-connected consecutive layers, one nonlinearity everywhere,
    /// seeded uniform init in `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`.
    pub fn layered(
        widths: &[usize],
        nonlinearity: Nonlinearity,
        seed: u64,
    ) -> Result<Self, NetError> {
        let hidden = widths.len().saturating_sub(2);
        let edges: Vec<(usize, usize)> = (1..widths.len()).map(|l| (l, l - 1)).collect();
        Self::with_random_weights(widths, vec![nonlinearity; hidden], &edges, seed)
    }

    pub fn layered_relu(widths: &[usize], seed: u64) -> Result<Self, NetError> {
        Self::layered(widths, Nonlinearity::Relu, seed)
    }

    /// Arbitrary edge set `(to, from)` with seeded initialization.
    pub fn with_random_weights(
        widths: &[usize],
        nonlinearity: Vec<Nonlinearity>,
        edge_pairs: &[(usize, usize)],
        seed: u64,
    ) -> Result<Self, NetError> {
        let mut sorted: Vec<(usize, usize)> = edge_pairs.to_vec();
        sorted.sort_unstable();
        let specs = sorted
            .iter()
            .enumerate()
            .map(|(idx, &(to, from))| {
                let rows = *widths.get(to).unwrap_or(&0);
                let cols = *widths.get(from).unwrap_or(&0);
                let s = (6.0 / (rows + cols) as f64).sqrt();
                let mut rng = Rng::from_seed(derive_seed(seed, "edge-init", idx as u64));
                let weights = Matrix::from_fn(rows, cols, |_, _| rng.range(-s, s));
                EdgeSpec {
                    from,
                    to,
                    weights,
                    ties: None,
                }
            })
            .collect();
        let mut net = Self::new(widths.to_vec(), nonlinearity, specs)?;
        net.init_seed = Some(seed);
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    /// Index of the output layer.
    pub fn last_layer(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn nonlinearities(&self) -> &[Nonlinearity] {
        &self.nonlinearity
    }

    pub fn init_seed(&self) -> Option<u64> {
        self.init_seed
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// Two networks share an architecture if everything but the weight
    /// values matches.
    pub fn same_architecture(&self, other: &Self) -> bool {
        self.widths == other.widths
            && self.nonlinearity == other.nonlinearity
            && self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .zip(&other.edges)
                .all(|(a, b)| a.from == b.from && a.to == b.to && a.ties == b.ties)
    }

    pub fn params(&self) -> Vec<f64> {
        self.param_anchor
            .iter()
            .map(|&(ei, ti)| self.edges[ei as usize].weights.data()[ti as usize])
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NetError> {
        if params.len() != self.param_count {
            return Err(NetError::BadTieMap(format!(
                "parameter vector has length {}, expected {}",
                params.len(),
                self.param_count
            )));
        }
        for edge in &mut self.edges {
            let ties = &edge.ties;
            let data = edge.weights.data_mut();
            for (entry, &p) in data.iter_mut().zip(ties) {
                *entry = params[p as usize];
            }
        }
        Ok(())
    }

    /// FNV-1a over the parameter bit patterns; changes iff a parameter does.
    pub fn param_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in self.params() {
            for b in p.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    /// Multiply every parameter feeding the output layer by `factor`.
    pub fn scale_output_edges(&mut self, factor: f64) {
        let last = self.last_layer();
        let mut ids: Vec<u32> = self
            .edges
            .iter()
            .filter(|e| e.to == last)
            .flat_map(|e| e.ties.iter().copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let mut params = self.params();
        for id in ids {
            params[id as usize] *= factor;
        }
        self.set_params(&params).expect("same length");
    }

    fn apply_nonlinearity(&self, layer: usize, z: &[f64]) -> Vec<f64> {
        match self.nonlinearity[layer - 1] {
            Nonlinearity::Relu => z.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect(),
            Nonlinearity::MaxPool { group } => {
                let mut mask = vec![0.0; z.len()];
                for g in 0..z.len() / group {
                    let base = g * group;
                    let mut best = base;
                    for i in base + 1..base + group {
                        if z[i] > z[best] {
                            best = i;
                        }
                    }
                    mask[best] = 1.0;
                }
                mask
            }
        }
    }

    /// Forward pass recording pre-activations and masks.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace, NetError> {
        self.forward_impl(x, None)
    }

    /// Forward pass with externally supplied masks (the two-phase evaluation
    /// rule: masks from a frozen network, propagation through this one).
    pub fn forward_with_masks(
        &self,
        x: &[f64],
        masks: &[Vec<f64>],
    ) -> Result<ForwardTrace, NetError> {
        if masks.len() != self.widths.len()
            || masks
                .iter()
                .zip(&self.widths)
                .any(|(m, &w)| m.len() != w)
        {
            return Err(NetError::MaskShape);
        }
        self.forward_impl(x, Some(masks))
    }

    fn forward_impl(
        &self,
        x: &[f64],
        external_masks: Option<&[Vec<f64>]>,
    ) -> Result<ForwardTrace, NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::InputDim {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFinite {
                context: "input".into(),
            });
        }
        let last = self.last_layer();
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(last + 1);
        let mut masks: Vec<Vec<f64>> = Vec::with_capacity(last + 1);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(last + 1);
        pre.push(x.to_vec());
        masks.push(vec![1.0; self.widths[0]]);
        post.push(x.to_vec());

        let mut edge_cursor = 0usize;
        for layer in 1..=last {
            let mut z = vec![0.0; self.widths[layer]];
            while edge_cursor < self.edges.len() && self.edges[edge_cursor].to == layer {
                let edge = &self.edges[edge_cursor];
                let contribution = edge
                    .weights
                    .matvec(&post[edge.from])
                    .expect("validated shapes");
                for (zi, c) in z.iter_mut().zip(contribution) {
                    *zi += c;
                }
                edge_cursor += 1;
            }
            let mask = if layer == last {
                vec![1.0; self.widths[layer]]
            } else {
                match external_masks {
                    Some(m) => m[layer].clone(),
                    None => self.apply_nonlinearity(layer, &z),
                }
            };
            let a: Vec<f64> = z.iter().zip(&mask).map(|(&v, &m)| m * v).collect();
            pre.push(z);
            masks.push(mask);
            post.push(a);
        }
        Ok(ForwardTrace {
            pre_activations: pre,
            masks,
        })
    }

    /// Parameter gradients for a scalar loss with the given output gradient,
    /// treating the trace's masks as constants. Tied parameters accumulate
    /// gradient across aliases.
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &[f64]) -> Vec<f64> {
        let last = self.last_layer();
        assert_eq!(output_grad.len(), self.output_dim(), "output grad length");
        let mut dz: Vec<Vec<f64>> = self.widths.iter().map(|&w| vec![0.0; w]).collect();
        dz[last] = output_grad.to_vec();

        let post: Vec<Vec<f64>> = (0..=last).map(|l| trace.post_activation(l)).collect();
        let mut grads = vec![0.0; self.param_count];

        for layer in (1..=last).rev() {
            if layer < last {
                // dz[layer] currently holds d(post-activation); apply mask.
                for (g, &m) in dz[layer].iter_mut().zip(&trace.masks[layer]) {
                    *g *= m;
                }
            }
            for edge in self.edges.iter().filter(|e| e.to == layer) {
                let cols = edge.weights.cols();
                // Weight gradient: dz[to] outer post[from].
                for (i, &gi) in dz[layer].iter().enumerate() {
                    if gi == 0.0 {
                        continue;
                    }
                    let row_ties = &edge.ties[i * cols..(i + 1) * cols];
                    for (j, &aj) in post[edge.from].iter().enumerate() {
                        grads[row_ties[j] as usize] += gi * aj;
                    }
                }
                // Propagate to the source layer's post-activation gradient.
                if edge.from > 0 {
                    let w = &edge.weights;
                    let (upstream, current) = {
                        // Split borrow: edge.from < layer always.
                        let (lo, hi) = dz.split_at_mut(layer);
                        (&mut lo[edge.from], &hi[0])
                    };
                    for (i, &gi) in current.iter().enumerate() {
                        if gi == 0.0 {
                            continue;
                        }
                        let row = w.row(i);
                        for (u, &wij) in upstream.iter_mut().zip(row) {
                            *u += gi * wij;
                        }
                    }
                }
            }
        }
        grads
    }

    /// Number of input-to-output paths (per output unit).
    pub fn path_count(&self) -> u128 {
        // chains[l] = number of layer/unit chains from one unit at layer l to
        // the output layer, excluding the unit choice at l itself.
        let last = self.last_layer();
        let mut chains = vec![0u128; last + 1];
        chains[last] = 1;
        for layer in (0..last).rev() {
            let mut total = 0u128;
            for edge in self.edges.iter().filter(|e| e.from == layer) {
                let downstream = if edge.to == last {
                    1
                } else {
                    chains[edge.to].saturating_mul(self.widths[edge.to] as u128)
                };
                total = total.saturating_add(downstream);
            }
            chains[layer] = total;
        }
        chains[0].saturating_mul(self.widths[0] as u128)
    }

    /// Explicit path-space view. With an input, the mask/input/z vectors are
    /// filled from a forward pass; without, only the path weights.
    pub fn materialize_paths(&self, x: Option<&[f64]>) -> Result<PathView, NetError> {
        let space = PathSpace::enumerate(self, DEFAULT_PATH_CAP)?;
        let w_bar = space.path_weights(self);
        match x {
            Some(x) => {
                let trace = self.forward(x)?;
                let sigma_bar = space.path_masks(&trace);
                let x_bar = space.path_inputs(x);
                let z = x_bar
                    .iter()
                    .zip(&sigma_bar)
                    .map(|(&a, &s)| a * s)
                    .collect();
                Ok(PathView {
                    d_z: space.d_z(),
                    w_bar,
                    sigma_bar: Some(sigma_bar),
                    x_bar: Some(x_bar),
                    z: Some(z),
                })
            }
            None => Ok(PathView {
                d_z: space.d_z(),
                w_bar,
                sigma_bar: None,
                x_bar: None,
                z: None,
            }),
        }
    }

    /// `||path_weights(k)||_2^2` for every output `k`, via one forward pass
    /// with element-wise squared weights, an all-ones input and no
    /// nonlinearity. No path enumeration.
    pub fn path_norms_squared(&self) -> Vec<f64> {
        self.transformed_weight_pass(|w| w * w, &vec![1.0; self.input_dim()])
    }

    pub fn path_norm_squared(&self, k: usize) -> f64 {
        self.path_norms_squared()[k]
    }

    /// `||path_weights(k)||_1` for every output, via absolute weights.
    pub fn path_l1_norms(&self) -> Vec<f64> {
        self.transformed_weight_pass(f64::abs, &vec![1.0; self.input_dim()])
    }

    fn transformed_weight_pass(&self, f: impl Fn(f64) -> f64, input: &[f64]) -> Vec<f64> {
        let last = self.last_layer();
        let mut acc: Vec<Vec<f64>> = Vec::with_capacity(last + 1);
        acc.push(input.to_vec());
        for layer in 1..=last {
            let mut u = vec![0.0; self.widths[layer]];
            for edge in self.edges.iter().filter(|e| e.to == layer) {
                let src = &acc[edge.from];
                for i in 0..edge.weights.rows() {
                    let row = edge.weights.row(i);
                    u[i] += row
                        .iter()
                        .zip(src)
                        .map(|(&w, &s)| f(w) * s)
                        .sum::<f64>();
                }
            }
            acc.push(u);
        }
        acc.pop().expect("output layer")
    }

    /// `||path_input o path_mask||_2^2` at input `x`: squared input through
    /// unit weights, masked by this network's activations.
    pub fn sigma_feature_norm_sq(&self, x: &[f64]) -> Result<f64, NetError> {
        let trace = self.forward(x)?;
        Ok(self.sigma_feature_norm_sq_with(&trace, x))
    }

    /// Same, reusing an existing trace of this network on `x`.
    pub fn sigma_feature_norm_sq_with(&self, trace: &ForwardTrace, x: &[f64]) -> f64 {
        let last = self.last_layer();
        let mut acc: Vec<Vec<f64>> = Vec::with_capacity(last + 1);
        acc.push(x.iter().map(|&v| v * v).collect());
        for layer in 1..=last {
            let mut u = vec![0.0; self.widths[layer]];
            for edge in self.edges.iter().filter(|e| e.to == layer) {
                let s: f64 = acc[edge.from].iter().sum();
                for v in u.iter_mut() {
                    *v += s;
                }
            }
            if layer < last {
                for (v, &m) in u.iter_mut().zip(&trace.masks[layer]) {
                    *v *= m;
                }
            }
            acc.push(u);
        }
        // Identical for every output unit by construction.
        acc.last().expect("output layer")[0]
    }

    /// Product of squared Frobenius norms over a layered network's weight
    /// matrices; an upper bound for the summed squared path norms.
    pub fn product_norm_bound(&self) -> Result<f64, NetError> {
        let last = self.last_layer();
        if self.edges.len() != last {
            return Err(NetError::NotLayered {
                reason: format!("{} edges for {} layers", self.edges.len(), last + 1),
            });
        }
        for (l, edge) in (1..=last).zip(&self.edges) {
            if edge.to != l || edge.from != l - 1 {
                return Err(NetError::NotLayered {
                    reason: format!("edge ({} <- {})", edge.to, edge.from),
                });
            }
        }
        Ok(self
            .edges
            .iter()
            .map(|e| {
                let f = e.weights.frobenius_norm();
                f * f
            })
            .product())
    }

    // ---- serialization ------------------------------------------------

    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            version: NETWORK_DOC_VERSION,
            widths: self.widths.clone(),
            nonlinearity: self.nonlinearity.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    from: e.from,
                    to: e.to,
                    weights: e.weights.data().to_vec(),
                    ties: e.ties.clone(),
                })
                .collect(),
            seed: self.init_seed,
        }
    }

    pub fn from_doc(doc: NetworkDoc) -> Result<Self, NetError> {
        if doc.version != NETWORK_DOC_VERSION {
            return Err(NetError::BadVersion {
                version: doc.version,
            });
        }
        let widths = doc.widths;
        let specs = doc
            .edges
            .into_iter()
            .map(|e| {
                let rows = *widths.get(e.to).unwrap_or(&0);
                let cols = *widths.get(e.from).unwrap_or(&0);
                let weights = Matrix::from_vec(rows, cols, e.weights).map_err(|_| {
                    NetError::EdgeShape {
                        to: e.to,
                        from: e.from,
                        got_rows: 0,
                        got_cols: 0,
                        exp_rows: rows,
                        exp_cols: cols,
                    }
                })?;
                Ok(EdgeSpec {
                    from: e.from,
                    to: e.to,
                    weights,
                    ties: Some(e.ties),
                })
            })
            .collect::<Result<Vec<_>, NetError>>()?;
        let mut net = Self::new(widths, doc.nonlinearity, specs)?;
        net.init_seed = doc.seed;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("network doc serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, NetError> {
        let doc: NetworkDoc = serde_json::from_str(s)?;
        Self::from_doc(doc)
    }
}

pub const NETWORK_DOC_VERSION: u32 = 1;

/// Versioned JSON document for network architecture and weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub version: u32,
    pub widths: Vec<usize>,
    pub nonlinearity: Vec<Nonlinearity>,
    pub edges: Vec<EdgeDoc>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: usize,
    pub to: usize,
    /// Row-major weight entries.
    pub weights: Vec<f64>,
    pub ties: Vec<u32>,
}

/// Explicit enumeration of all input-to-output paths of a network.
///
/// A path is an input unit, a chain of (edge, unit) steps through hidden
/// layers, and a final edge into the output layer. The path index does not
/// choose the output unit: the path weight into output `k` multiplies the
/// final edge's row `k`. Enumeration order is deterministic.
#[derive(Debug, Clone)]
pub struct PathSpace {
    chains: Vec<PathChain>,
    d_y: usize,
}

#[derive(Debug, Clone)]
struct PathStep {
    edge: u32,
    /// Target layer of the edge (cached for mask lookups).
    layer: u32,
    /// Unit index at the target layer.
    unit: u32,
}

#[derive(Debug, Clone)]
struct PathChain {
    input_unit: u32,
    /// Hidden-layer steps in order; the last step ends one edge short of the
    /// output layer.
    steps: Vec<PathStep>,
    final_edge: u32,
}

impl PathSpace {
    /// Enumerate all paths, rejecting networks above the cap with the count.
    pub fn enumerate(net: &DagNetwork, cap: usize) -> Result<Self, NetError> {
        let count = net.path_count();
        if count > cap as u128 {
            return Err(NetError::PathCapExceeded { count, cap });
        }
        let last = net.last_layer();
        let by_from: Vec<Vec<usize>> = {
            let mut v: Vec<Vec<usize>> = vec![Vec::new(); last + 1];
            for (i, e) in net.edges().iter().enumerate() {
                v[e.from].push(i);
            }
            // Deterministic order: ascending target layer.
            for list in &mut v {
                list.sort_by_key(|&i| net.edges()[i].to);
            }
            v
        };

        let mut chains = Vec::with_capacity(count as usize);
        for j0 in 0..net.input_dim() {
            let mut steps: Vec<PathStep> = Vec::new();
            extend_chains(net, &by_from, 0, j0 as u32, &mut steps, &mut chains);
        }
        debug_assert_eq!(chains.len() as u128, count);
        Ok(Self {
            chains,
            d_y: net.output_dim(),
        })
    }

    pub fn d_z(&self) -> usize {
        self.chains.len()
    }

    pub fn d_y(&self) -> usize {
        self.d_y
    }

    /// Path-weight matrix: entry `(k, j)` is the product of the weights along
    /// path `j` terminated at output unit `k`.
    pub fn path_weights(&self, net: &DagNetwork) -> Matrix {
        let mut w = Matrix::zeros(self.d_y, self.d_z());
        for (j, chain) in self.chains.iter().enumerate() {
            let mut prefix = 1.0;
            let mut unit = chain.input_unit as usize;
            for step in &chain.steps {
                let e = &net.edges()[step.edge as usize];
                prefix *= e.weights().get(step.unit as usize, unit);
                unit = step.unit as usize;
            }
            let final_edge = &net.edges()[chain.final_edge as usize];
            for k in 0..self.d_y {
                w.set(k, j, prefix * final_edge.weights().get(k, unit));
            }
        }
        w
    }

    /// Per-path 0/1 activation product from a forward trace.
    pub fn path_masks(&self, trace: &ForwardTrace) -> Vec<f64> {
        self.chains
            .iter()
            .map(|chain| {
                let mut m = 1.0;
                for step in &chain.steps {
                    m *= trace.masks[step.layer as usize][step.unit as usize];
                    if m == 0.0 {
                        break;
                    }
                }
                m
            })
            .collect()
    }

    /// The input coordinate feeding each path.
    pub fn path_inputs(&self, x: &[f64]) -> Vec<f64> {
        self.chains
            .iter()
            .map(|c| x[c.input_unit as usize])
            .collect()
    }

    /// `z = path_inputs o path_masks` for one input, masks taken from the
    /// given network's own forward pass.
    pub fn z_vector(&self, mask_net: &DagNetwork, x: &[f64]) -> Result<Vec<f64>, NetError> {
        let trace = mask_net.forward(x)?;
        Ok(self.z_vector_from_trace(&trace, x))
    }

    pub fn z_vector_from_trace(&self, trace: &ForwardTrace, x: &[f64]) -> Vec<f64> {
        let masks = self.path_masks(trace);
        self.path_inputs(x)
            .iter()
            .zip(&masks)
            .map(|(&a, &s)| a * s)
            .collect()
    }
}

fn extend_chains(
    net: &DagNetwork,
    by_from: &[Vec<usize>],
    layer: usize,
    origin: u32,
    steps: &mut Vec<PathStep>,
    out: &mut Vec<PathChain>,
) {
    let last = net.last_layer();
    for &edge_idx in &by_from[layer] {
        let edge = &net.edges()[edge_idx];
        if edge.to == last {
            out.push(PathChain {
                input_unit: origin,
                steps: steps.clone(),
                final_edge: edge_idx as u32,
            });
        } else {
            for v in 0..net.widths()[edge.to] {
                steps.push(PathStep {
                    edge: edge_idx as u32,
                    layer: edge.to as u32,
                    unit: v as u32,
                });
                extend_chains(net, by_from, edge.to, origin, steps, out);
                steps.pop();
            }
        }
    }
}

/// Explicit path-space vectors for one network (and optionally one input).
#[derive(Debug, Clone)]
pub struct PathView {
    pub d_z: usize,
    /// `d_y x d_z`: path weights per output unit.
    pub w_bar: Matrix,
    /// Per-path 0/1 activation products (present when built with an input).
    pub sigma_bar: Option<Vec<f64>>,
    /// Per-path input coordinates.
    pub x_bar: Option<Vec<f64>>,
    /// `x_bar o sigma_bar`.
    pub z: Option<Vec<f64>>,
}

impl PathView {
    /// Reproduce the forward output for output unit `k` via the path inner
    /// product.
    pub fn output(&self, k: usize) -> Option<f64> {
        let z = self.z.as_ref()?;
        Some(crate::linalg::dot(z, self.w_bar.row(k)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-1-1 chain with weights (a, b).
    fn chain_net(a: f64, b: f64) -> DagNetwork {
        DagNetwork::new(
            vec![1, 1, 1],
            vec![Nonlinearity::Relu],
            vec![
                EdgeSpec {
                    from: 0,
                    to: 1,
                    weights: Matrix::from_vec(1, 1, vec![a]).unwrap(),
                    ties: None,
                },
                EdgeSpec {
                    from: 1,
                    to: 2,
                    weights: Matrix::from_vec(1, 1, vec![b]).unwrap(),
                    ties: None,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn chain_forward_positive_and_dead() {
        let net = chain_net(1.0, 1.0);
        let trace = net.forward(&[2.0]).unwrap();
        assert_eq!(trace.output(), &[2.0]);
        assert_eq!(trace.masks[1], vec![1.0]);

        let trace = net.forward(&[-2.0]).unwrap();
        assert_eq!(trace.output(), &[0.0]);
        assert_eq!(trace.masks[1], vec![0.0], "ReLU kills the path");
    }

    #[test]
    fn relu_at_exactly_zero_is_inactive() {
        let net = chain_net(1.0, 1.0);
        let trace = net.forward(&[0.0]).unwrap();
        assert_eq!(trace.masks[1], vec![0.0]);
    }

    #[test]
    fn chain_backward_product_rule() {
        let (a, b) = (0.7, -1.3);
        let net = chain_net(a, b);
        let x = 2.0;
        let trace = net.forward(&[x]).unwrap();
        let grads = net.backward(&trace, &[1.0]);
        // loss = output = b * relu(a x); x > 0, a > 0 so the unit is active.
        assert!((grads[0] - b * x).abs() < 1e-12, "grad_a");
        assert!((grads[1] - a * x).abs() < 1e-12, "grad_b");
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let net = DagNetwork::layered_relu(&[3, 4, 2], 1).unwrap();
        let trace = net.forward(&[0.3, -0.2, 0.9]).unwrap();
        let grads = net.backward(&trace, &[0.0, 0.0]);
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    fn finite_difference_check(net: &DagNetwork, x: &[f64], tol: f64) -> bool {
        // Loss: sum of outputs. Skip points too close to a kink.
        let trace = net.forward(x).unwrap();
        for (layer, pre) in trace.pre_activations.iter().enumerate() {
            if layer == 0 || layer == net.last_layer() {
                continue;
            }
            if pre.iter().any(|v| v.abs() < 1e-3) {
                return true; // not a kink-free point; skip silently
            }
        }
        let ones = vec![1.0; net.output_dim()];
        let analytic = net.backward(&trace, &ones);
        let mut net = net.clone();
        let params = net.params();
        let h = 1e-5;
        for (i, &p) in params.iter().enumerate() {
            let mut plus = params.clone();
            plus[i] = p + h;
            net.set_params(&plus).unwrap();
            let fp: f64 = net.forward(x).unwrap().output().iter().sum();
            let mut minus = params.clone();
            minus[i] = p - h;
            net.set_params(&minus).unwrap();
            let fm: f64 = net.forward(x).unwrap().output().iter().sum();
            let numeric = (fp - fm) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
            if (analytic[i] - numeric).abs() / denom > tol {
                return false;
            }
        }
        true
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::from_seed(17);
        for seed in 0..10u64 {
            let net = DagNetwork::layered_relu(&[3, 5, 4, 2], seed).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.range(-1.0, 1.0)).collect();
            assert!(
                finite_difference_check(&net, &x, 1e-4),
                "finite-difference mismatch at seed {seed}"
            );
        }
    }

    #[test]
    fn backward_with_skip_connection_and_maxpool() {
        let net = DagNetwork::with_random_weights(
            &[3, 4, 4, 2],
            vec![Nonlinearity::Relu, Nonlinearity::MaxPool { group: 2 }],
            &[(1, 0), (2, 1), (3, 2), (3, 0), (2, 0)],
            5,
        )
        .unwrap();
        let x = [0.4, -0.8, 1.1];
        assert!(finite_difference_check(&net, &x, 1e-4));
    }

    #[test]
    fn tied_parameters_accumulate_gradient() {
        // One 1x2 edge whose two entries alias a single parameter.
        let net = DagNetwork::new(
            vec![2, 1, 1],
            vec![Nonlinearity::Relu],
            vec![
                EdgeSpec {
                    from: 0,
                    to: 1,
                    weights: Matrix::from_vec(1, 2, vec![0.5, 0.5]).unwrap(),
                    ties: Some(vec![0, 0]),
                },
                EdgeSpec {
                    from: 1,
                    to: 2,
                    weights: Matrix::from_vec(1, 1, vec![2.0]).unwrap(),
                    ties: Some(vec![1]),
                },
            ],
        )
        .unwrap();
        assert_eq!(net.param_count(), 2);
        let x = [1.0, 3.0];
        let trace = net.forward(&x).unwrap();
        // output = 2 * relu(0.5 * (1 + 3)) = 4
        assert!((trace.output()[0] - 4.0).abs() < 1e-12);
        let grads = net.backward(&trace, &[1.0]);
        // d out / d shared = 2 * (x0 + x1) = 8, accumulated across aliases.
        assert!((grads[0] - 8.0).abs() < 1e-12);
        assert!((grads[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn maxpool_mask_exactly_one_per_group() {
        let net = DagNetwork::with_random_weights(
            &[3, 6, 2],
            vec![Nonlinearity::MaxPool { group: 3 }],
            &[(1, 0), (2, 1)],
            9,
        )
        .unwrap();
        let trace = net.forward(&[0.1, -0.5, 0.8]).unwrap();
        for g in 0..2 {
            let group = &trace.masks[1][g * 3..(g + 1) * 3];
            let active: f64 = group.iter().sum();
            assert_eq!(active, 1.0, "exactly one active unit per pool group");
        }
    }

    #[test]
    fn maxpool_tie_takes_lowest_index() {
        let net = DagNetwork::new(
            vec![1, 2, 1],
            vec![Nonlinearity::MaxPool { group: 2 }],
            vec![
                EdgeSpec {
                    from: 0,
                    to: 1,
                    weights: Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap(),
                    ties: None,
                },
                EdgeSpec {
                    from: 1,
                    to: 2,
                    weights: Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap(),
                    ties: None,
                },
            ],
        )
        .unwrap();
        let trace = net.forward(&[1.0]).unwrap();
        assert_eq!(trace.masks[1], vec![1.0, 0.0]);
    }

    #[test]
    fn path_count_2_2_1_fully_connected() {
        let net = DagNetwork::layered_relu(&[2, 2, 1], 0).unwrap();
        assert_eq!(net.path_count(), 4);
        let view = net.materialize_paths(None).unwrap();
        assert_eq!(view.d_z, 4);
        // Every path weight is a product W2[0,b] * W1[b,a].
        let w1 = net.edges()[0].weights().clone();
        let w2 = net.edges()[1].weights().clone();
        let mut expected: Vec<f64> = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                expected.push(w2.get(0, b) * w1.get(b, a));
            }
        }
        let mut got: Vec<f64> = view.w_bar.row(0).to_vec();
        let mut want = expected.clone();
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        want.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "path products {got:?} vs {want:?}");
        }
    }

    #[test]
    fn all_positive_net_z_equals_x_bar() {
        // Positive weights and positive input: every mask is 1, so z = x_bar.
        let net = DagNetwork::new(
            vec![2, 2, 1],
            vec![Nonlinearity::Relu],
            vec![
                EdgeSpec {
                    from: 0,
                    to: 1,
                    weights: Matrix::from_vec(2, 2, vec![0.5, 0.25, 0.125, 1.0]).unwrap(),
                    ties: None,
                },
                EdgeSpec {
                    from: 1,
                    to: 2,
                    weights: Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap(),
                    ties: None,
                },
            ],
        )
        .unwrap();
        let view = net.materialize_paths(Some(&[0.5, 2.0])).unwrap();
        assert_eq!(view.z.as_ref().unwrap(), view.x_bar.as_ref().unwrap());
        assert!(view.sigma_bar.unwrap().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn eq1_forward_equals_path_inner_product() {
        for seed in 0..8u64 {
            let net = DagNetwork::layered_relu(&[4, 8, 8, 3], seed).unwrap();
            let mut rng = Rng::from_seed(seed + 1000);
            let x: Vec<f64> = (0..4).map(|_| rng.range(-1.5, 1.5)).collect();
            let view = net.materialize_paths(Some(&x)).unwrap();
            let out = net.forward(&x).unwrap().output().to_vec();
            for (k, &o) in out.iter().enumerate() {
                let via_paths = view.output(k).unwrap();
                assert!(
                    (via_paths - o).abs() <= 1e-8 * (1.0 + o.abs()),
                    "Eq.1 mismatch: {via_paths} vs {o} (seed {seed}, k {k})"
                );
            }
        }
    }

    #[test]
    fn eq1_holds_on_dag_with_skips() {
        let net = DagNetwork::with_random_weights(
            &[3, 4, 5, 2],
            vec![Nonlinearity::Relu, Nonlinearity::Relu],
            &[(1, 0), (2, 0), (2, 1), (3, 1), (3, 2), (3, 0)],
            77,
        )
        .unwrap();
        // Paths: direct 0->3, 0->1->3, 0->2->3, 0->1->2->3.
        let expected = 3 * (1 + 4 + 5 + 4 * 5);
        assert_eq!(net.path_count(), expected as u128);
        let x = [0.2, -0.4, 0.9];
        let view = net.materialize_paths(Some(&x)).unwrap();
        let out = net.forward(&x).unwrap().output().to_vec();
        for (k, &o) in out.iter().enumerate() {
            assert!((view.output(k).unwrap() - o).abs() <= 1e-8 * (1.0 + o.abs()));
        }
    }

    #[test]
    fn path_norm_chain_and_zero_edge() {
        let net = chain_net(1.5, -2.0);
        let norms = net.path_norms_squared();
        assert!((norms[0] - 1.5_f64.powi(2) * 4.0).abs() < 1e-12);

        let net = chain_net(0.0, 3.0);
        assert_eq!(net.path_norms_squared()[0], 0.0);
    }

    #[test]
    fn fast_path_norm_matches_enumeration() {
        for seed in 0..6u64 {
            let net = DagNetwork::layered_relu(&[4, 8, 8, 3], seed).unwrap();
            let fast = net.path_norms_squared();
            let view = net.materialize_paths(None).unwrap();
            for k in 0..3 {
                let enumerated: f64 = view.w_bar.row(k).iter().map(|w| w * w).sum();
                let rel = (fast[k] - enumerated).abs() / enumerated.abs().max(1e-300);
                assert!(rel <= 1e-10, "footnote-1 equivalence broke: rel {rel}");
            }
        }
    }

    #[test]
    fn path_l1_matches_enumeration() {
        let net = DagNetwork::layered_relu(&[3, 5, 2], 3).unwrap();
        let fast = net.path_l1_norms();
        let view = net.materialize_paths(None).unwrap();
        for k in 0..2 {
            let enumerated: f64 = view.w_bar.row(k).iter().map(|w| w.abs()).sum();
            assert!((fast[k] - enumerated).abs() <= 1e-10 * enumerated.max(1.0));
        }
    }

    #[test]
    fn product_norm_bound_cases() {
        // Width-1 chain: equality.
        let net = chain_net(1.5, -2.0);
        let prod = net.product_norm_bound().unwrap();
        let sum: f64 = net.path_norms_squared().iter().sum();
        assert!((prod - sum).abs() < 1e-12, "width-1 equality");

        // Identity-weight 2-2-2: product 4, path-norm sum 2.
        let id2 = Matrix::identity(2);
        let net = DagNetwork::new(
            vec![2, 2, 2],
            vec![Nonlinearity::Relu],
            vec![
                EdgeSpec { from: 0, to: 1, weights: id2.clone(), ties: None },
                EdgeSpec { from: 1, to: 2, weights: id2, ties: None },
            ],
        )
        .unwrap();
        assert!((net.product_norm_bound().unwrap() - 4.0).abs() < 1e-12);
        let sum: f64 = net.path_norms_squared().iter().sum();
        assert!((sum - 2.0).abs() < 1e-12);

        // Random layered nets satisfy the inequality.
        for seed in 0..5u64 {
            let net = DagNetwork::layered_relu(&[3, 6, 4, 2], seed).unwrap();
            let sum: f64 = net.path_norms_squared().iter().sum();
            let prod = net.product_norm_bound().unwrap();
            assert!(sum <= prod * (1.0 + 1e-12), "sum {sum} > product {prod}");
        }

        // Non-layered nets are rejected.
        let net = DagNetwork::with_random_weights(
            &[2, 3, 2],
            vec![Nonlinearity::Relu],
            &[(1, 0), (2, 1), (2, 0)],
            0,
        )
        .unwrap();
        assert!(matches!(
            net.product_norm_bound(),
            Err(NetError::NotLayered { .. })
        ));
    }

    #[test]
    fn sigma_feature_norm_matches_enumeration() {
        for seed in 0..5u64 {
            let net = DagNetwork::layered_relu(&[3, 6, 4, 2], seed).unwrap();
            let mut rng = Rng::from_seed(seed);
            let x: Vec<f64> = (0..3).map(|_| rng.range(-1.0, 1.0)).collect();
            let fast = net.sigma_feature_norm_sq(&x).unwrap();
            let view = net.materialize_paths(Some(&x)).unwrap();
            let z = view.z.unwrap();
            let enumerated: f64 = z.iter().map(|v| v * v).sum();
            assert!(
                (fast - enumerated).abs() <= 1e-10 * enumerated.max(1.0),
                "sigma feature mismatch: {fast} vs {enumerated}"
            );
        }
    }

    #[test]
    fn path_cap_rejected_with_count() {
        let net = DagNetwork::layered_relu(&[8, 8, 8, 8, 8, 8, 8, 2], 0).unwrap();
        let err = PathSpace::enumerate(&net, DEFAULT_PATH_CAP).unwrap_err();
        match err {
            NetError::PathCapExceeded { count, cap } => {
                assert_eq!(count, 8u128.pow(7));
                assert_eq!(cap, DEFAULT_PATH_CAP);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = DagNetwork::layered_relu(&[3, 4, 2], 0).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(NetError::InputDim { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn architecture_validation() {
        // Hidden layer without outgoing edge.
        let bad = DagNetwork::with_random_weights(
            &[2, 3, 2],
            vec![Nonlinearity::Relu],
            &[(1, 0), (2, 0)],
            0,
        );
        assert!(matches!(bad, Err(NetError::DisconnectedLayer { .. })));

        // Pool group must divide the width.
        let bad = DagNetwork::with_random_weights(
            &[2, 3, 2],
            vec![Nonlinearity::MaxPool { group: 2 }],
            &[(1, 0), (2, 1)],
            0,
        );
        assert!(matches!(bad, Err(NetError::BadPoolGroup { .. })));
    }

    #[test]
    fn json_round_trip_preserves_behavior() {
        let net = DagNetwork::with_random_weights(
            &[3, 4, 2],
            vec![Nonlinearity::MaxPool { group: 2 }],
            &[(1, 0), (2, 1), (2, 0)],
            123,
        )
        .unwrap();
        let json = net.to_json();
        let restored = DagNetwork::from_json(&json).unwrap();
        assert!(net.same_architecture(&restored));
        assert_eq!(net.params(), restored.params());
        assert_eq!(net.init_seed(), restored.init_seed());
        let x = [0.1, -0.7, 0.4];
        assert_eq!(
            net.forward(&x).unwrap().output(),
            restored.forward(&x).unwrap().output()
        );
    }

    #[test]
    fn bad_version_rejected() {
        let net = DagNetwork::layered_relu(&[2, 2], 0).unwrap();
        let mut doc = net.to_doc();
        doc.version = 99;
        assert!(matches!(
            DagNetwork::from_doc(doc),
            Err(NetError::BadVersion { version: 99 })
        ));
    }

    #[test]
    fn param_hash_tracks_parameters() {
        let mut net = DagNetwork::layered_relu(&[2, 3, 2], 4).unwrap();
        let h0 = net.param_hash();
        assert_eq!(h0, net.param_hash(), "hash is stable");
        let mut params = net.params();
        params[0] += 1e-9;
        net.set_params(&params).unwrap();
        assert_ne!(h0, net.param_hash(), "hash sees tiny parameter changes");
    }

    #[test]
    fn forward_with_masks_overrides_own_activations() {
        let net = DagNetwork::layered_relu(&[2, 2, 1], 8).unwrap();
        let x = [0.5, -0.5];
        let own = net.forward(&x).unwrap();
        let replay = net.forward_with_masks(&x, &own.masks).unwrap();
        assert_eq!(own.output(), replay.output());

        // All-zero hidden masks force a zero output.
        let mut masks = own.masks.clone();
        masks[1] = vec![0.0, 0.0];
        let zeroed = net.forward_with_masks(&x, &masks).unwrap();
        assert_eq!(zeroed.output(), &[0.0]);
    }
}
