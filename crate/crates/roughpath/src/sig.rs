//! Signatures of piecewise-linear paths, Chen concatenation and the
//! extension of depth-2 rough paths to higher signature levels.

use crate::error::{invalid, Result};
use crate::grid::GridPath;
use crate::tensor::TruncatedTensor;

/// Grid of group elements in the depth-2 tensor group, representing a rough
/// path at the sample times. The element at `t_0` is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughPathGrid {
    times: Vec<f64>,
    elements: Vec<TruncatedTensor>,
}

/// Grid of depth-`n` group values, multiplicative under Chen concatenation.
/// Unlike [`RoughPathGrid`], the element at `t_0` may be any group element
/// (solution paths start at their initial value).
#[derive(Debug, Clone, PartialEq)]
pub struct SignaturePath {
    times: Vec<f64>,
    elements: Vec<TruncatedTensor>,
}

fn check_elements(times: &[f64], elements: &[TruncatedTensor], depth: Option<usize>) -> Result<(usize, usize)> {
    if times.len() != elements.len() || elements.is_empty() {
        return Err(invalid("need one group element per grid time"));
    }
    if !times.windows(2).all(|w| w[0] < w[1]) {
        return Err(invalid("grid times must be strictly increasing"));
    }
    let dim = elements[0].dim();
    let dep = elements[0].depth();
    if let Some(want) = depth {
        if dep != want {
            return Err(invalid(format!("elements must have depth {want}, got {dep}")));
        }
    }
    if !elements.iter().all(|e| e.dim() == dim && e.depth() == dep) {
        return Err(invalid("all elements must share dim and depth"));
    }
    Ok((dim, dep))
}

impl RoughPathGrid {
    pub fn new(times: Vec<f64>, elements: Vec<TruncatedTensor>) -> Result<Self> {
        check_elements(&times, &elements, Some(2))?;
        if !elements[0].is_identity(0.0) {
            return Err(invalid("rough path grid must start at the identity"));
        }
        Ok(RoughPathGrid { times, elements })
    }

    /// The constant identity path (trivial driver).
    pub fn identity_path(times: Vec<f64>, dim: usize) -> Result<Self> {
        let n = times.len();
        RoughPathGrid::new(times, vec![TruncatedTensor::identity(dim, 2); n])
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn element(&self, i: usize) -> &TruncatedTensor {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[TruncatedTensor] {
        &self.elements
    }

    /// Chen increment `element_i^{-1} (x) element_j`.
    pub fn increment(&self, i: usize, j: usize) -> Result<TruncatedTensor> {
        group_increment(&self.elements, i, j)
    }

    /// Restriction to a sub-grid. The retained elements keep their global
    /// values, so increments across retained points are unchanged.
    pub fn restrict(&self, partition: &crate::grid::Partition) -> Result<RoughPathGrid> {
        partition.check_against(self.len()).map_err(|e| invalid(e.to_string()))?;
        let times = partition.indices().iter().map(|&i| self.times[i]).collect();
        let elements = partition.indices().iter().map(|&i| self.elements[i].clone()).collect();
        RoughPathGrid::new(times, elements)
    }

    /// First-level path, as a grid path started at zero.
    pub fn first_level(&self) -> GridPath {
        let d = self.dim();
        let mut values = Vec::with_capacity(self.len() * d);
        for e in &self.elements {
            values.extend_from_slice(e.level(1));
        }
        GridPath::new(self.times.clone(), d, values).expect("valid by construction")
    }
}

impl SignaturePath {
    pub fn new(times: Vec<f64>, elements: Vec<TruncatedTensor>) -> Result<Self> {
        check_elements(&times, &elements, None)?;
        Ok(SignaturePath { times, elements })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn depth(&self) -> usize {
        self.elements[0].depth()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn element(&self, i: usize) -> &TruncatedTensor {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[TruncatedTensor] {
        &self.elements
    }

    /// Chen increment `element_i^{-1} (x) element_j`.
    pub fn increment(&self, i: usize, j: usize) -> Result<TruncatedTensor> {
        group_increment(&self.elements, i, j)
    }

    /// Depth-2 restriction. Requires the path to start at the identity.
    pub fn restrict2(&self) -> Result<RoughPathGrid> {
        if self.depth() < 2 {
            return Err(invalid("restrict2 needs depth >= 2"));
        }
        let elements = self.elements.iter().map(|e| e.with_depth(2)).collect();
        RoughPathGrid::new(self.times.clone(), elements)
    }
}

fn group_increment(elements: &[TruncatedTensor], i: usize, j: usize) -> Result<TruncatedTensor> {
    if i > j || j >= elements.len() {
        return Err(invalid(format!("increment indices ({i}, {j}) out of range")));
    }
    if i == j {
        return Ok(TruncatedTensor::identity(elements[0].dim(), elements[0].depth()));
    }
    elements[i].inv().mul(&elements[j])
}

/// Signature of a single linear segment with increment `v`: the tensor
/// exponential `(1, v, v^(x)2/2!, ..., v^(x)n/n!)`.
pub fn segment_signature(v: &[f64], depth: usize) -> Result<TruncatedTensor> {
    if depth < 1 {
        return Err(invalid("segment signature needs depth >= 1"));
    }
    TruncatedTensor::exp(v.len(), depth, &[v.to_vec()])
}

/// Signature path of a piecewise-linear path: the running Chen product of
/// the segment signatures. The value at `t_0` is the identity.
pub fn pl_signature(path: &GridPath, depth: usize) -> Result<SignaturePath> {
    if path.len() < 2 {
        return Err(invalid("piecewise-linear signature needs at least 2 grid points"));
    }
    let d = path.dim();
    let mut elements = Vec::with_capacity(path.len());
    let mut acc = TruncatedTensor::identity(d, depth);
    elements.push(acc.clone());
    let mut v = vec![0.0; d];
    for i in 0..path.len() - 1 {
        let (a, b) = (path.value(i), path.value(i + 1));
        for c in 0..d {
            v[c] = b[c] - a[c];
        }
        acc = acc.mul(&segment_signature(&v, depth)?)?;
        elements.push(acc.clone());
    }
    SignaturePath::new(path.times().to_vec(), elements)
}

/// Extends a depth-2 rough path to depth `n >= 3` by exponentiating the
/// depth-2 logarithm of each grid increment (zero components above level 2)
/// and Chen-concatenating across the grid. Exact for exponential increments;
/// converges to the unique higher-level enhancement under grid refinement.
pub fn lyons_extend(path: &RoughPathGrid, depth: usize) -> Result<SignaturePath> {
    if depth < 3 {
        return Err(invalid("extension target depth must be >= 3"));
    }
    extend_to_depth(path, depth)
}

/// Extension without the `depth >= 3` guard; depth 1 and 2 restrict/copy.
pub(crate) fn extend_to_depth(path: &RoughPathGrid, depth: usize) -> Result<SignaturePath> {
    let d = path.dim();
    let mut elements = Vec::with_capacity(path.len());
    let mut acc = TruncatedTensor::identity(d, depth);
    elements.push(acc.clone());
    for i in 0..path.len() - 1 {
        let inc = path.increment(i, i + 1)?;
        let (l1, l2) = inc.log2()?;
        let step = TruncatedTensor::exp(d, depth, &[l1, l2])?;
        acc = acc.mul(&step)?;
        elements.push(acc.clone());
    }
    SignaturePath::new(path.times().to_vec(), elements)
}
