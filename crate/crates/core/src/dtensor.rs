//! Distinguished tensors and their covariant derivatives.
//!
//! A d-tensor carries components indexed by adapted-frame slots. Each
//! slot has a kind (time, space, or vertical) and a variance; time slots
//! have extent 1, the others extent n. Components are stored densely with
//! one array axis per slot.
//!
//! The three covariant derivative operators share one scheme: the frame
//! derivative of the component, plus one connection-block contraction per
//! up slot, minus the mirrored contraction per down slot. Which block
//! applies is determined by the slot kind (time, space, vertical), which
//! selects the row, and the derivative direction, which selects the
//! column of the nine-block connection.

use crate::frames::{apply_frame, FrameDir, FrameKind};
use crate::geometry::{GammaConnection, JetSpace};
use crate::symexpr::Expr;
use ndarray::{ArrayD, Dimension, IxDyn};

/// Slot kinds coincide with adapted frame directions.
pub type SlotKind = FrameKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variance {
    Up,
    Down,
}

/// One index slot of a d-tensor signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct IndexSlot {
    pub kind: SlotKind,
    pub variance: Variance,
}

impl IndexSlot {
    pub fn up(kind: SlotKind) -> IndexSlot {
        IndexSlot {
            kind,
            variance: Variance::Up,
        }
    }

    pub fn down(kind: SlotKind) -> IndexSlot {
        IndexSlot {
            kind,
            variance: Variance::Down,
        }
    }

    pub fn extent(&self, n: usize) -> usize {
        self.kind.extent(n)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DTensorError {
    #[error("signature mismatch: {context}")]
    SignatureMismatch { context: String },
    #[error("index {index} out of range for extent {extent} (slot {slot})")]
    IndexOutOfRange {
        slot: usize,
        index: usize,
        extent: usize,
    },
    #[error("component array has shape {got:?}, signature demands {want:?}")]
    ShapeMismatch { got: Vec<usize>, want: Vec<usize> },
    #[error("operands live on different jet spaces")]
    SpaceMismatch,
}

/// Dense d-tensor: a signature plus one component per multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct DTensor {
    space: JetSpace,
    signature: Vec<IndexSlot>,
    components: ArrayD<Expr>,
}

impl DTensor {
    /// Shape demanded by a signature over an n-dimensional base.
    pub fn shape_of(signature: &[IndexSlot], n: usize) -> Vec<usize> {
        signature.iter().map(|s| s.extent(n)).collect()
    }

    pub fn new(
        space: &JetSpace,
        signature: Vec<IndexSlot>,
        components: ArrayD<Expr>,
    ) -> Result<DTensor, DTensorError> {
        let want = Self::shape_of(&signature, space.dim());
        if components.shape() != want.as_slice() {
            return Err(DTensorError::ShapeMismatch {
                got: components.shape().to_vec(),
                want,
            });
        }
        Ok(DTensor {
            space: space.clone(),
            signature,
            components,
        })
    }

    /// Builds componentwise from a multi-index function.
    pub fn from_fn(
        space: &JetSpace,
        signature: Vec<IndexSlot>,
        f: impl Fn(&[usize]) -> Expr,
    ) -> DTensor {
        let shape = Self::shape_of(&signature, space.dim());
        let components = ArrayD::from_shape_fn(IxDyn(&shape), |idx| f(idx.slice()));
        DTensor {
            space: space.clone(),
            signature,
            components,
        }
    }

    pub fn zeros(space: &JetSpace, signature: Vec<IndexSlot>) -> DTensor {
        DTensor::from_fn(space, signature, |_| Expr::zero())
    }

    /// Rank-0 tensor holding a single scalar.
    pub fn scalar(space: &JetSpace, value: Expr) -> DTensor {
        let components = ArrayD::from_shape_fn(IxDyn(&[]), |_| value.clone());
        DTensor {
            space: space.clone(),
            signature: Vec::new(),
            components,
        }
    }

    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    pub fn signature(&self) -> &[IndexSlot] {
        &self.signature
    }

    pub fn rank(&self) -> usize {
        self.signature.len()
    }

    pub fn shape(&self) -> &[usize] {
        self.components.shape()
    }

    pub fn get(&self, index: &[usize]) -> Result<&Expr, DTensorError> {
        if index.len() != self.rank() {
            return Err(DTensorError::SignatureMismatch {
                context: format!(
                    "multi-index of length {} against rank {}",
                    index.len(),
                    self.rank()
                ),
            });
        }
        for (slot, (&i, &extent)) in index.iter().zip(self.shape()).enumerate() {
            if i >= extent {
                return Err(DTensorError::IndexOutOfRange {
                    slot,
                    index: i,
                    extent,
                });
            }
        }
        Ok(&self.components[IxDyn(index)])
    }

    /// Iterates components in row-major multi-index order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, &Expr)> {
        self.components
            .indexed_iter()
            .map(|(idx, e)| (idx.slice().to_vec(), e))
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> DTensor {
        DTensor {
            space: self.space.clone(),
            signature: self.signature.clone(),
            components: self.components.map(f),
        }
    }

    /// Componentwise combination of two equally shaped tensors.
    pub fn zip_with(
        &self,
        other: &DTensor,
        f: impl Fn(&Expr, &Expr) -> Expr,
    ) -> Result<DTensor, DTensorError> {
        if self.space != other.space {
            return Err(DTensorError::SpaceMismatch);
        }
        if self.signature != other.signature {
            return Err(DTensorError::SignatureMismatch {
                context: format!("{:?} vs {:?}", self.signature, other.signature),
            });
        }
        let components = ArrayD::from_shape_fn(self.components.raw_dim(), |idx| {
            f(&self.components[&idx], &other.components[&idx])
        });
        Ok(DTensor {
            space: self.space.clone(),
            signature: self.signature.clone(),
            components,
        })
    }

    /// Appends a fresh slot of the given kind as the last axis, filling
    /// components from `fill(original_index, new_axis_index)`.
    fn append_slot(&self, slot: IndexSlot, fill: impl Fn(&[usize], usize) -> Expr) -> DTensor {
        let mut signature = self.signature.clone();
        signature.push(slot);
        DTensor::from_fn(&self.space, signature, |idx| {
            let (orig, last) = idx.split_at(idx.len() - 1);
            fill(orig, last[0])
        })
    }
}

/// The canonical vertical vector field, components `y^i`.
pub fn liouville(space: &JetSpace) -> DTensor {
    DTensor::from_fn(space, vec![IndexSlot::up(SlotKind::Vertical)], |idx| {
        space.y_var(idx[0])
    })
}

/// Componentwise sum. Signatures and spaces must agree.
pub fn dtensor_add(a: &DTensor, b: &DTensor) -> Result<DTensor, DTensorError> {
    a.zip_with(b, |x, y| x + y)
}

/// Outer product: signatures concatenate, components multiply.
pub fn tensor_product(a: &DTensor, b: &DTensor) -> Result<DTensor, DTensorError> {
    if a.space != b.space {
        return Err(DTensorError::SpaceMismatch);
    }
    let mut signature = a.signature.clone();
    signature.extend(b.signature.iter().copied());
    let ra = a.rank();
    Ok(DTensor::from_fn(&a.space, signature, |idx| {
        let (ia, ib) = idx.split_at(ra);
        &a.components[IxDyn(ia)] * &b.components[IxDyn(ib)]
    }))
}

/// Connection coefficient `Gamma^out_{in, dir}` for a slot of kind
/// `kind`: the slot kind picks the block row (time bar, space, vertical),
/// the derivative direction picks the block column.
fn block_coeff(
    conn: &GammaConnection,
    dir: FrameDir,
    kind: SlotKind,
    out: usize,
    inn: usize,
) -> Expr {
    match (kind, dir) {
        (SlotKind::TimeH, FrameDir::TimeH) => conn.gbar.clone(),
        (SlotKind::TimeH, FrameDir::SpaceH(p)) => conn.lbar[p].clone(),
        (SlotKind::TimeH, FrameDir::Vertical(p)) => conn.cbar[p].clone(),
        (SlotKind::SpaceH, FrameDir::TimeH) => conn.g[out][inn].clone(),
        (SlotKind::SpaceH, FrameDir::SpaceH(p)) => conn.l[out][inn][p].clone(),
        (SlotKind::SpaceH, FrameDir::Vertical(p)) => conn.c[out][inn][p].clone(),
        (SlotKind::Vertical, FrameDir::TimeH) => conn.gv[out][inn].clone(),
        (SlotKind::Vertical, FrameDir::SpaceH(p)) => conn.lv[out][inn][p].clone(),
        (SlotKind::Vertical, FrameDir::Vertical(p)) => conn.cv[out][inn][p].clone(),
    }
}

/// Covariant derivative in one adapted direction, keeping the signature:
/// frame derivative plus per-up-slot contractions minus per-down-slot
/// contractions with the matching connection block.
pub fn cov_deriv(tensor: &DTensor, conn: &GammaConnection, dir: FrameDir) -> DTensor {
    let n = tensor.space.dim();
    DTensor::from_fn(&tensor.space, tensor.signature.clone(), |idx| {
        let mut terms = vec![apply_frame(&conn.nlc, dir, &tensor.components[IxDyn(idx)])];
        for (slot_pos, slot) in tensor.signature.iter().enumerate() {
            let extent = slot.extent(n);
            let held = idx[slot_pos];
            for f in 0..extent {
                let mut other = idx.to_vec();
                other[slot_pos] = f;
                let component = tensor.components[IxDyn(&other)].clone();
                let term = match slot.variance {
                    Variance::Up => {
                        Expr::product([block_coeff(conn, dir, slot.kind, held, f), component])
                    }
                    Variance::Down => {
                        Expr::product([block_coeff(conn, dir, slot.kind, f, held), component]).neg()
                    }
                };
                terms.push(term);
            }
        }
        Expr::sum(terms)
    })
}

/// Time covariant derivative; the result gains a trailing down-time slot
/// (extent 1), so repeated derivatives correct earlier ones.
pub fn cov_time(tensor: &DTensor, conn: &GammaConnection) -> DTensor {
    let derived = cov_deriv(tensor, conn, FrameDir::TimeH);
    tensor.append_slot(IndexSlot::down(SlotKind::TimeH), |orig, _| {
        derived.components[IxDyn(orig)].clone()
    })
}

/// Spatial covariant derivative in every direction at once; the result
/// gains a trailing down-space slot.
pub fn cov_space_all(tensor: &DTensor, conn: &GammaConnection) -> DTensor {
    let n = tensor.space.dim();
    let per_dir: Vec<DTensor> = (0..n)
        .map(|p| cov_deriv(tensor, conn, FrameDir::SpaceH(p)))
        .collect();
    tensor.append_slot(IndexSlot::down(SlotKind::SpaceH), |orig, p| {
        per_dir[p].components[IxDyn(orig)].clone()
    })
}

/// Vertical covariant derivative in every direction at once; the result
/// gains a trailing down-vertical slot.
pub fn cov_vert_all(tensor: &DTensor, conn: &GammaConnection) -> DTensor {
    let n = tensor.space.dim();
    let per_dir: Vec<DTensor> = (0..n)
        .map(|p| cov_deriv(tensor, conn, FrameDir::Vertical(p)))
        .collect();
    tensor.append_slot(IndexSlot::down(SlotKind::Vertical), |orig, p| {
        per_dir[p].components[IxDyn(orig)].clone()
    })
}

/// Spatial covariant derivative in direction `p`, signature unchanged.
pub fn cov_space(
    tensor: &DTensor,
    p: usize,
    conn: &GammaConnection,
) -> Result<DTensor, DTensorError> {
    let n = tensor.space.dim();
    if p >= n {
        return Err(DTensorError::IndexOutOfRange {
            slot: tensor.rank(),
            index: p,
            extent: n,
        });
    }
    Ok(cov_deriv(tensor, conn, FrameDir::SpaceH(p)))
}

/// Vertical covariant derivative in direction `p`, signature unchanged.
pub fn cov_vert(
    tensor: &DTensor,
    p: usize,
    conn: &GammaConnection,
) -> Result<DTensor, DTensorError> {
    let n = tensor.space.dim();
    if p >= n {
        return Err(DTensorError::IndexOutOfRange {
            slot: tensor.rank(),
            index: p,
            extent: n,
        });
    }
    Ok(cov_deriv(tensor, conn, FrameDir::Vertical(p)))
}

/// A d-vector split into its adapted components.
#[derive(Debug, Clone, PartialEq)]
pub struct DVector {
    pub space: JetSpace,
    pub time: Expr,
    pub spatial: Vec<Expr>,
    pub vertical: Vec<Expr>,
}

impl DVector {
    pub fn new(
        space: &JetSpace,
        time: Expr,
        spatial: Vec<Expr>,
        vertical: Vec<Expr>,
    ) -> Result<DVector, DTensorError> {
        let n = space.dim();
        if spatial.len() != n || vertical.len() != n {
            return Err(DTensorError::ShapeMismatch {
                got: vec![spatial.len(), vertical.len()],
                want: vec![n, n],
            });
        }
        Ok(DVector {
            space: space.clone(),
            time,
            spatial,
            vertical,
        })
    }

    /// The three rank-1 d-tensors carrying the components.
    pub fn parts(&self) -> [DTensor; 3] {
        [
            DTensor::from_fn(&self.space, vec![IndexSlot::up(SlotKind::TimeH)], |_| {
                self.time.clone()
            }),
            DTensor::from_fn(&self.space, vec![IndexSlot::up(SlotKind::SpaceH)], |idx| {
                self.spatial[idx[0]].clone()
            }),
            DTensor::from_fn(
                &self.space,
                vec![IndexSlot::up(SlotKind::Vertical)],
                |idx| self.vertical[idx[0]].clone(),
            ),
        ]
    }
}
