//! Assembly of the convex synthesis program.
//!
//! Decision variables: the H-infinity bound `J`, symmetric `L1`, `L2`,
//! full `L3`, vector `L4`, wide `L5` (the transformed Lyapunov/controller
//! parametrization), and symmetric `U` capping the controller output
//! energy. Constraint blocks, all affine in the variables:
//!
//! - one bounded-real block per uncertainty vertex (negative definite),
//! - the coupling block `[[L2, L1], [L1, L1]]` (positive definite),
//! - positivity of `L1` and `L2`,
//! - the energy Schur block `[[L2 - L1, L5^T], [L5, U]]` with
//!   `tr(U) < gamma` (optional).
//!
//! Strict inequalities are realized with a margin `eps` scaled to the data.

use super::sdp::{SdpBlock, SdpProblem, SymEntries};
use super::{Result, SynthError};
use crate::netmodel::DnStateSpace;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Plant data of one uncertainty vertex.
#[derive(Debug, Clone)]
pub struct VertexData {
    pub a_dn: DMatrix<f64>,
    pub b_dg: DMatrix<f64>,
    pub b_nr: DVector<f64>,
    /// Sign signature of the vertex, e.g. "ka+ lf- sr+" (empty = nominal).
    pub signature: String,
}

impl VertexData {
    pub fn from_model(model: &DnStateSpace, signature: &str) -> Self {
        VertexData {
            a_dn: model.a_dn.clone(),
            b_dg: model.b_dg.clone(),
            b_nr: model.b_nr.clone(),
            signature: signature.to_string(),
        }
    }
}

/// Variable layout shared by assembly, solving, and recovery.
#[derive(Debug, Clone, Copy)]
pub struct VarCatalog {
    pub n: usize,
    pub m: usize,
}

fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

impl VarCatalog {
    pub fn n_vars(&self) -> usize {
        1 + 2 * tri(self.n) + self.n * self.n + self.n + self.m * self.n + tri(self.m)
    }

    pub fn j_idx(&self) -> usize {
        0
    }

    /// Symmetric upper-triangle index (i <= j), column-major.
    fn sym_idx(i: usize, j: usize) -> usize {
        debug_assert!(i <= j);
        j * (j + 1) / 2 + i
    }

    pub fn l1_idx(&self, i: usize, j: usize) -> usize {
        1 + Self::sym_idx(i.min(j), i.max(j))
    }

    pub fn l2_idx(&self, i: usize, j: usize) -> usize {
        1 + tri(self.n) + Self::sym_idx(i.min(j), i.max(j))
    }

    pub fn l3_idx(&self, i: usize, j: usize) -> usize {
        1 + 2 * tri(self.n) + j * self.n + i
    }

    pub fn l4_idx(&self, i: usize) -> usize {
        1 + 2 * tri(self.n) + self.n * self.n + i
    }

    pub fn l5_idx(&self, ch: usize, j: usize) -> usize {
        1 + 2 * tri(self.n) + self.n * self.n + self.n + j * self.m + ch
    }

    pub fn u_idx(&self, i: usize, j: usize) -> usize {
        1 + 2 * tri(self.n) + self.n * self.n + self.n + self.m * self.n
            + Self::sym_idx(i.min(j), i.max(j))
    }

    pub fn unpack(&self, x: &[f64]) -> SynthesisVars {
        let (n, m) = (self.n, self.m);
        let mut l1 = DMatrix::zeros(n, n);
        let mut l2 = DMatrix::zeros(n, n);
        let mut l3 = DMatrix::zeros(n, n);
        let mut l4 = DVector::zeros(n);
        let mut l5 = DMatrix::zeros(m, n);
        let mut u = DMatrix::zeros(m, m);
        for j in 0..n {
            for i in 0..=j {
                l1[(i, j)] = x[self.l1_idx(i, j)];
                l1[(j, i)] = l1[(i, j)];
                l2[(i, j)] = x[self.l2_idx(i, j)];
                l2[(j, i)] = l2[(i, j)];
            }
        }
        for j in 0..n {
            for i in 0..n {
                l3[(i, j)] = x[self.l3_idx(i, j)];
            }
            l4[j] = x[self.l4_idx(j)];
            for ch in 0..m {
                l5[(ch, j)] = x[self.l5_idx(ch, j)];
            }
        }
        for j in 0..m {
            for i in 0..=j {
                u[(i, j)] = x[self.u_idx(i, j)];
                u[(j, i)] = u[(i, j)];
            }
        }
        SynthesisVars {
            j: x[self.j_idx()],
            l1,
            l2,
            l3,
            l4,
            l5,
            u,
        }
    }

    pub fn pack(&self, vars: &SynthesisVars) -> Vec<f64> {
        let mut x = vec![0.0; self.n_vars()];
        x[self.j_idx()] = vars.j;
        for j in 0..self.n {
            for i in 0..=j {
                x[self.l1_idx(i, j)] = vars.l1[(i, j)];
                x[self.l2_idx(i, j)] = vars.l2[(i, j)];
            }
        }
        for j in 0..self.n {
            for i in 0..self.n {
                x[self.l3_idx(i, j)] = vars.l3[(i, j)];
            }
            x[self.l4_idx(j)] = vars.l4[j];
            for ch in 0..self.m {
                x[self.l5_idx(ch, j)] = vars.l5[(ch, j)];
            }
        }
        for j in 0..self.m {
            for i in 0..=j {
                x[self.u_idx(i, j)] = vars.u[(i, j)];
            }
        }
        x
    }
}

/// Unpacked decision variables.
#[derive(Debug, Clone)]
pub struct SynthesisVars {
    pub j: f64,
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub l3: DMatrix<f64>,
    pub l4: DVector<f64>,
    pub l5: DMatrix<f64>,
    pub u: DMatrix<f64>,
}

/// The assembled synthesis program.
#[derive(Debug, Clone)]
pub struct LmiProgram {
    pub catalog: VarCatalog,
    pub vertices: Vec<VertexData>,
    pub c_dg: DMatrix<f64>,
    pub gamma: f64,
    pub eps: f64,
    pub include_energy_bound: bool,
}

/// Builds the program from vertex plant data. `eps_rel` scales the
/// strictness margin by the largest absolute entry of the plant data.
pub fn assemble_program(
    vertices: Vec<VertexData>,
    c_dg: DMatrix<f64>,
    gamma: f64,
    eps_rel: f64,
    include_energy_bound: bool,
) -> Result<LmiProgram> {
    if vertices.is_empty() {
        return Err(SynthError::Assembly("no vertices supplied".into()));
    }
    let n = vertices[0].a_dn.nrows();
    let m = c_dg.nrows();
    if c_dg.ncols() != n {
        return Err(SynthError::Assembly(format!(
            "output selector is {}x{}, expected {}x{}",
            c_dg.nrows(),
            c_dg.ncols(),
            m,
            n
        )));
    }
    // The strictness margin scales with the constant blocks of the
    // assembled LMIs: the step column, the unit input block, and the
    // trace cap.
    let mut scale = 1.0f64;
    for v in &vertices {
        if v.a_dn.shape() != (n, n) || v.b_dg.shape() != (n, m) || v.b_nr.len() != n {
            return Err(SynthError::Assembly(format!(
                "vertex {:?} dimensions are inconsistent with the nominal plant",
                v.signature
            )));
        }
        scale = scale.max(v.b_nr.amax());
    }
    Ok(LmiProgram {
        catalog: VarCatalog { n, m },
        vertices,
        c_dg,
        gamma,
        eps: eps_rel * scale,
        include_energy_bound,
    })
}

/// Accumulates a full symmetric matrix entry-wise and emits the upper
/// triangle, asserting symmetry.
struct SymAccum {
    dim: usize,
    map: BTreeMap<(usize, usize), f64>,
}

impl SymAccum {
    fn new(dim: usize) -> Self {
        SymAccum {
            dim,
            map: BTreeMap::new(),
        }
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.dim && c < self.dim);
        if v != 0.0 {
            *self.map.entry((r, c)).or_insert(0.0) += v;
        }
    }

    fn upper(self) -> SymEntries {
        let mut out = Vec::with_capacity(self.map.len() / 2 + 1);
        for (&(r, c), &v) in self.map.iter() {
            if r > c {
                let vt = self.map.get(&(c, r)).copied().unwrap_or(0.0);
                debug_assert!(
                    (v - vt).abs() <= 1e-12 * v.abs().max(vt.abs()).max(1.0),
                    "asymmetric accumulation at ({r},{c}): {v} vs {vt}"
                );
                continue;
            }
            if v != 0.0 {
                out.push((r, c, v));
            }
        }
        out
    }
}

impl LmiProgram {
    pub fn n(&self) -> usize {
        self.catalog.n
    }

    pub fn m(&self) -> usize {
        self.catalog.m
    }

    /// Bounded-real block dimension: two plant-order blocks, the scalar
    /// input row, and the output channels.
    pub fn brl_dim(&self) -> usize {
        2 * self.catalog.n + 1 + self.catalog.m
    }

    /// Sparse affine form of the vertex bounded-real block (the block
    /// itself; the solver receives its negation).
    fn bounded_real_terms(&self, v: &VertexData) -> (SymEntries, Vec<(usize, SymEntries)>) {
        let (n, m) = (self.catalog.n, self.catalog.m);
        let d = self.brl_dim();
        let (r1, r2, r3, r4) = (0usize, n, 2 * n, 2 * n + 1);
        let a = &v.a_dn;
        let b = &v.b_dg;
        let c = &self.c_dg;

        let mut f0 = SymAccum::new(d);
        for i in 0..n {
            f0.add(r1 + i, r3, v.b_nr[i]);
            f0.add(r3, r1 + i, v.b_nr[i]);
            f0.add(r2 + i, r3, v.b_nr[i]);
            f0.add(r3, r2 + i, v.b_nr[i]);
        }
        f0.add(r3, r3, -1.0);

        let mut terms: Vec<(usize, SymEntries)> = Vec::new();

        // J in the lower-right output block.
        {
            let mut acc = SymAccum::new(d);
            for ch in 0..m {
                acc.add(r4 + ch, r4 + ch, -1.0);
            }
            terms.push((self.catalog.j_idx(), acc.upper()));
        }
        // L1 entries.
        for q in 0..n {
            for p in 0..=q {
                let mut acc = SymAccum::new(d);
                let pair = |acc: &mut SymAccum, pp: usize, qq: usize| {
                    // Contribution of e_pp e_qq^T inside L1.
                    for i in 0..n {
                        // (1,2) += A L1 ; (2,1) += L1 A^T
                        acc.add(r1 + i, r2 + qq, a[(i, pp)]);
                        acc.add(r2 + qq, r1 + i, a[(i, pp)]);
                        // (2,2) += A L1 + L1 A^T
                        acc.add(r2 + i, r2 + qq, a[(i, pp)]);
                        acc.add(r2 + qq, r2 + i, a[(i, pp)]);
                    }
                    for ch in 0..m {
                        // (2,4) += L1 C^T ; (4,2) += C L1
                        acc.add(r2 + pp, r4 + ch, c[(ch, qq)]);
                        acc.add(r4 + ch, r2 + pp, c[(ch, qq)]);
                    }
                };
                pair(&mut acc, p, q);
                if p != q {
                    pair(&mut acc, q, p);
                }
                terms.push((self.catalog.l1_idx(p, q), acc.upper()));
            }
        }
        // L2 entries.
        for q in 0..n {
            for p in 0..=q {
                let mut acc = SymAccum::new(d);
                let pair = |acc: &mut SymAccum, pp: usize, qq: usize| {
                    for i in 0..n {
                        // (1,1) += A L2 + L2 A^T
                        acc.add(r1 + i, r1 + qq, a[(i, pp)]);
                        acc.add(r1 + qq, r1 + i, a[(i, pp)]);
                        // (1,2) += L2 A^T ; (2,1) += A L2
                        acc.add(r1 + qq, r2 + i, a[(i, pp)]);
                        acc.add(r2 + i, r1 + qq, a[(i, pp)]);
                    }
                    for ch in 0..m {
                        // (1,4) += L2 C^T ; (4,1) += C L2
                        acc.add(r1 + pp, r4 + ch, c[(ch, qq)]);
                        acc.add(r4 + ch, r1 + pp, c[(ch, qq)]);
                    }
                };
                pair(&mut acc, p, q);
                if p != q {
                    pair(&mut acc, q, p);
                }
                terms.push((self.catalog.l2_idx(p, q), acc.upper()));
            }
        }
        // L3 entries: (2,1) += L3, (1,2) += L3^T.
        for q in 0..n {
            for p in 0..n {
                let mut acc = SymAccum::new(d);
                acc.add(r2 + p, r1 + q, 1.0);
                acc.add(r1 + q, r2 + p, 1.0);
                terms.push((self.catalog.l3_idx(p, q), acc.upper()));
            }
        }
        // L4 entries: (2,3) += L4, (3,2) += L4^T.
        for p in 0..n {
            let mut acc = SymAccum::new(d);
            acc.add(r2 + p, r3, 1.0);
            acc.add(r3, r2 + p, 1.0);
            terms.push((self.catalog.l4_idx(p), acc.upper()));
        }
        // L5 entries.
        for q in 0..n {
            for ch in 0..m {
                let mut acc = SymAccum::new(d);
                for i in 0..n {
                    // (1,1) += B L5 + L5^T B^T
                    acc.add(r1 + i, r1 + q, b[(i, ch)]);
                    acc.add(r1 + q, r1 + i, b[(i, ch)]);
                    // (1,2) += L5^T B^T ; (2,1) += B L5
                    acc.add(r1 + q, r2 + i, b[(i, ch)]);
                    acc.add(r2 + i, r1 + q, b[(i, ch)]);
                }
                terms.push((self.catalog.l5_idx(ch, q), acc.upper()));
            }
        }
        terms.sort_by_key(|t| t.0);
        (f0.upper(), terms)
    }

    fn coupling_terms(&self) -> (SymEntries, Vec<(usize, SymEntries)>) {
        let n = self.catalog.n;
        let d = 2 * n;
        let mut terms: Vec<(usize, SymEntries)> = Vec::new();
        for q in 0..n {
            for p in 0..=q {
                // L2 in the (1,1) block.
                let mut acc = SymAccum::new(d);
                acc.add(p, q, 1.0);
                if p != q {
                    acc.add(q, p, 1.0);
                }
                terms.push((self.catalog.l2_idx(p, q), acc.upper()));
                // L1 in (1,2), (2,1), (2,2).
                let mut acc = SymAccum::new(d);
                let pair = |acc: &mut SymAccum, pp: usize, qq: usize| {
                    acc.add(pp, n + qq, 1.0);
                    acc.add(n + qq, pp, 1.0);
                    acc.add(n + pp, n + qq, 1.0);
                };
                pair(&mut acc, p, q);
                if p != q {
                    pair(&mut acc, q, p);
                }
                terms.push((self.catalog.l1_idx(p, q), acc.upper()));
            }
        }
        terms.sort_by_key(|t| t.0);
        (Vec::new(), terms)
    }

    fn energy_terms(&self) -> (SymEntries, Vec<(usize, SymEntries)>) {
        let (n, m) = (self.catalog.n, self.catalog.m);
        let d = n + m;
        let mut terms: Vec<(usize, SymEntries)> = Vec::new();
        for q in 0..n {
            for p in 0..=q {
                let mut acc2 = SymAccum::new(d);
                acc2.add(p, q, 1.0);
                if p != q {
                    acc2.add(q, p, 1.0);
                }
                terms.push((self.catalog.l2_idx(p, q), acc2.upper()));
                let mut acc1 = SymAccum::new(d);
                acc1.add(p, q, -1.0);
                if p != q {
                    acc1.add(q, p, -1.0);
                }
                terms.push((self.catalog.l1_idx(p, q), acc1.upper()));
            }
        }
        for q in 0..n {
            for ch in 0..m {
                let mut acc = SymAccum::new(d);
                acc.add(n + ch, q, 1.0);
                acc.add(q, n + ch, 1.0);
                terms.push((self.catalog.l5_idx(ch, q), acc.upper()));
            }
        }
        for j in 0..m {
            for i in 0..=j {
                let mut acc = SymAccum::new(d);
                acc.add(n + i, n + j, 1.0);
                if i != j {
                    acc.add(n + j, n + i, 1.0);
                }
                terms.push((self.catalog.u_idx(i, j), acc.upper()));
            }
        }
        terms.sort_by_key(|t| t.0);
        (Vec::new(), terms)
    }

    fn positivity_terms(&self, which_l1: bool) -> (SymEntries, Vec<(usize, SymEntries)>) {
        let n = self.catalog.n;
        let mut terms: Vec<(usize, SymEntries)> = Vec::new();
        for q in 0..n {
            for p in 0..=q {
                let mut acc = SymAccum::new(n);
                acc.add(p, q, 1.0);
                if p != q {
                    acc.add(q, p, 1.0);
                }
                let idx = if which_l1 {
                    self.catalog.l1_idx(p, q)
                } else {
                    self.catalog.l2_idx(p, q)
                };
                terms.push((idx, acc.upper()));
            }
        }
        terms.sort_by_key(|t| t.0);
        (Vec::new(), terms)
    }

    /// Solver-ready form: every block rewritten as `F0 + sum x_k F_k >= 0`.
    pub fn to_sdp(&self) -> SdpProblem {
        let nv = self.catalog.n_vars();
        let mut objective = vec![0.0; nv];
        objective[self.catalog.j_idx()] = 1.0;
        let mut blocks = Vec::new();

        // Vertex bounded-real blocks: -C1 - eps I >= 0.
        for v in &self.vertices {
            let (f0, terms) = self.bounded_real_terms(v);
            let dim = self.brl_dim();
            let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for &(i, j, x) in &f0 {
                *acc.entry((i, j)).or_insert(0.0) -= x;
            }
            for i in 0..dim {
                *acc.entry((i, i)).or_insert(0.0) -= self.eps;
            }
            let nf0: SymEntries = acc
                .into_iter()
                .filter(|&(_, x)| x != 0.0)
                .map(|((i, j), x)| (i, j, x))
                .collect();
            let nterms = terms
                .into_iter()
                .map(|(k, es)| (k, es.into_iter().map(|(i, j, x)| (i, j, -x)).collect()))
                .collect();
            blocks.push(SdpBlock {
                dim,
                f0: nf0,
                terms: nterms,
            });
        }
        // Coupling block: C2 - eps I >= 0.
        {
            let (_, terms) = self.coupling_terms();
            let dim = 2 * self.catalog.n;
            blocks.push(SdpBlock {
                dim,
                f0: (0..dim).map(|i| (i, i, -self.eps)).collect(),
                terms,
            });
        }
        // Positivity of L1 and L2.
        for which in [true, false] {
            let (_, terms) = self.positivity_terms(which);
            let dim = self.catalog.n;
            blocks.push(SdpBlock {
                dim,
                f0: (0..dim).map(|i| (i, i, -self.eps)).collect(),
                terms,
            });
        }
        if self.include_energy_bound {
            let (_, terms) = self.energy_terms();
            let dim = self.catalog.n + self.catalog.m;
            blocks.push(SdpBlock {
                dim,
                f0: (0..dim).map(|i| (i, i, -self.eps)).collect(),
                terms,
            });
            // Trace cap: gamma - tr(U) - eps >= 0.
            let mut terms = Vec::new();
            for i in 0..self.catalog.m {
                terms.push((self.catalog.u_idx(i, i), vec![(0usize, 0usize, -1.0)]));
            }
            terms.sort_by_key(|t: &(usize, SymEntries)| t.0);
            blocks.push(SdpBlock {
                dim: 1,
                f0: vec![(0, 0, self.gamma - self.eps)],
                terms,
            });
        }
        SdpProblem {
            n_vars: nv,
            objective,
            blocks,
        }
    }

    /// Dense evaluation of the vertex bounded-real block (oracle for the
    /// sparse assembly; also used by the certificate verifier).
    pub fn eval_bounded_real(&self, v: &VertexData, vars: &SynthesisVars) -> DMatrix<f64> {
        let (n, m) = (self.catalog.n, self.catalog.m);
        let d = self.brl_dim();
        let a = &v.a_dn;
        let b = &v.b_dg;
        let c = &self.c_dg;
        let mut out = DMatrix::zeros(d, d);
        let blk11 = a * &vars.l2
            + &vars.l2 * a.transpose()
            + b * &vars.l5
            + vars.l5.transpose() * b.transpose();
        let blk12 = a * &vars.l1
            + &vars.l2 * a.transpose()
            + vars.l5.transpose() * b.transpose()
            + vars.l3.transpose();
        let blk22 = a * &vars.l1 + &vars.l1 * a.transpose();
        out.view_mut((0, 0), (n, n)).copy_from(&blk11);
        out.view_mut((0, n), (n, n)).copy_from(&blk12);
        out.view_mut((n, 0), (n, n)).copy_from(&blk12.transpose());
        out.view_mut((n, n), (n, n)).copy_from(&blk22);
        for i in 0..n {
            out[(i, 2 * n)] = v.b_nr[i];
            out[(2 * n, i)] = v.b_nr[i];
            out[(n + i, 2 * n)] = v.b_nr[i] + vars.l4[i];
            out[(2 * n, n + i)] = v.b_nr[i] + vars.l4[i];
        }
        out[(2 * n, 2 * n)] = -1.0;
        let blk14 = &vars.l2 * c.transpose();
        let blk24 = &vars.l1 * c.transpose();
        for i in 0..n {
            for ch in 0..m {
                out[(i, 2 * n + 1 + ch)] = blk14[(i, ch)];
                out[(2 * n + 1 + ch, i)] = blk14[(i, ch)];
                out[(n + i, 2 * n + 1 + ch)] = blk24[(i, ch)];
                out[(2 * n + 1 + ch, n + i)] = blk24[(i, ch)];
            }
        }
        for ch in 0..m {
            out[(2 * n + 1 + ch, 2 * n + 1 + ch)] = -vars.j;
        }
        out
    }

    /// Dense coupling block `[[L2, L1], [L1, L1]]`.
    pub fn eval_coupling(&self, vars: &SynthesisVars) -> DMatrix<f64> {
        let n = self.catalog.n;
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&vars.l2);
        out.view_mut((0, n), (n, n)).copy_from(&vars.l1);
        out.view_mut((n, 0), (n, n)).copy_from(&vars.l1);
        out.view_mut((n, n), (n, n)).copy_from(&vars.l1);
        out
    }

    /// Dense energy Schur block `[[L2 - L1, L5^T], [L5, U]]`.
    pub fn eval_energy(&self, vars: &SynthesisVars) -> DMatrix<f64> {
        let (n, m) = (self.catalog.n, self.catalog.m);
        let mut out = DMatrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&(&vars.l2 - &vars.l1));
        out.view_mut((n, 0), (m, n)).copy_from(&vars.l5);
        out.view_mut((0, n), (n, m)).copy_from(&vars.l5.transpose());
        out.view_mut((n, n), (m, m)).copy_from(&vars.u);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fvc::sdp::smat;
    use crate::linalg;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn toy_vertex(n: usize, m: usize, seed: u64) -> (VertexData, DMatrix<f64>) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        for i in 0..n {
            a[(i, i)] -= 2.0;
        }
        let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let b_nr = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let mut c = DMatrix::zeros(m, n);
        for ch in 0..m {
            c[(ch, ch)] = 1.0;
        }
        (
            VertexData {
                a_dn: a,
                b_dg: b,
                b_nr,
                signature: String::new(),
            },
            c,
        )
    }

    fn random_vars(cat: &VarCatalog, seed: u64) -> SynthesisVars {
        let mut rng = StdRng::seed_from_u64(seed);
        let (n, m) = (cat.n, cat.m);
        let symm = |rng: &mut StdRng, k: usize| {
            let r = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
            (&r + r.transpose()) * 0.5
        };
        SynthesisVars {
            j: rng.gen_range(0.1..2.0),
            l1: symm(&mut rng, n),
            l2: symm(&mut rng, n),
            l3: DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)),
            l4: DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
            l5: DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0)),
            u: symm(&mut rng, m),
        }
    }

    /// Reconstructs a block from its sparse affine form at given variables.
    fn sparse_eval(
        dim: usize,
        f0: &super::SymEntries,
        terms: &[(usize, super::SymEntries)],
        x: &[f64],
    ) -> DMatrix<f64> {
        let mut v = vec![0.0; crate::fvc::sdp::svec_len(dim)];
        let s2 = 2f64.sqrt();
        let mut add = |v: &mut Vec<f64>, entries: &super::SymEntries, w: f64| {
            for &(i, j, val) in entries {
                let idx = crate::fvc::sdp::svec_index(i, j);
                v[idx] += w * if i == j { val } else { s2 * val };
            }
        };
        add(&mut v, f0, 1.0);
        for (k, es) in terms {
            add(&mut v, es, x[*k]);
        }
        smat(&v, dim)
    }

    #[test]
    fn sparse_matches_dense_bounded_real() {
        for seed in 0..4u64 {
            let (vert, c) = toy_vertex(4, 2, seed);
            let prog = assemble_program(vec![vert.clone()], c, 10.0, 0.0, true).unwrap();
            let vars = random_vars(&prog.catalog, 100 + seed);
            let x = prog.catalog.pack(&vars);
            let dense = prog.eval_bounded_real(&vert, &vars);
            let (f0, terms) = prog.bounded_real_terms(&vert);
            let sparse = sparse_eval(prog.brl_dim(), &f0, &terms, &x);
            assert_relative_eq!(dense, sparse, epsilon = 1e-12);
            // Symmetry of the assembled block.
            assert!(linalg::max_abs(&(&dense - dense.transpose())) < 1e-12);
        }
    }

    #[test]
    fn sparse_matches_dense_coupling_and_energy() {
        let (vert, c) = toy_vertex(3, 2, 7);
        let prog = assemble_program(vec![vert], c, 10.0, 0.0, true).unwrap();
        let vars = random_vars(&prog.catalog, 42);
        let x = prog.catalog.pack(&vars);
        let (f0, terms) = prog.coupling_terms();
        let sparse = sparse_eval(2 * prog.n(), &f0, &terms, &x);
        assert_relative_eq!(prog.eval_coupling(&vars), sparse, epsilon = 1e-12);
        let (f0, terms) = prog.energy_terms();
        let sparse = sparse_eval(prog.n() + prog.m(), &f0, &terms, &x);
        assert_relative_eq!(prog.eval_energy(&vars), sparse, epsilon = 1e-12);
    }

    #[test]
    fn corner_blocks_at_identity_variables() {
        let (vert, c) = toy_vertex(3, 2, 11);
        let n = 3;
        let prog = assemble_program(vec![vert.clone()], c.clone(), 10.0, 0.0, true).unwrap();
        let vars = SynthesisVars {
            j: 0.7,
            l1: DMatrix::identity(n, n),
            l2: DMatrix::identity(n, n),
            l3: DMatrix::zeros(n, n),
            l4: DVector::zeros(n),
            l5: DMatrix::zeros(2, n),
            u: DMatrix::zeros(2, 2),
        };
        let blk = prog.eval_bounded_real(&vert, &vars);
        let a_sym = &vert.a_dn + vert.a_dn.transpose();
        assert_relative_eq!(blk.view((0, 0), (n, n)).clone_owned(), a_sym, epsilon = 1e-12);
        for i in 0..n {
            assert_relative_eq!(blk[(i, 2 * n)], vert.b_nr[i], epsilon = 1e-14);
        }
        for i in 0..n {
            for ch in 0..2 {
                assert_relative_eq!(blk[(i, 2 * n + 1 + ch)], c[(ch, i)], epsilon = 1e-14);
            }
        }
        assert_relative_eq!(blk[(2 * n, 2 * n)], -1.0, epsilon = 1e-14);
        for ch in 0..2 {
            assert_relative_eq!(blk[(2 * n + 1 + ch, 2 * n + 1 + ch)], -0.7, epsilon = 1e-14);
        }
    }

    #[test]
    fn energy_block_schur_sanity() {
        let (vert, c) = toy_vertex(3, 2, 13);
        let prog = assemble_program(vec![vert], c, 10.0, 0.0, true).unwrap();
        let mut vars = random_vars(&prog.catalog, 5);
        vars.l1 = DMatrix::zeros(3, 3);
        vars.l2 = DMatrix::identity(3, 3);
        vars.l5 = DMatrix::zeros(2, 3);
        vars.u = DMatrix::identity(2, 2);
        assert!(linalg::is_positive_definite(&prog.eval_energy(&vars), 0.0));
        vars.u = -DMatrix::identity(2, 2);
        assert!(!linalg::is_positive_definite(&prog.eval_energy(&vars), 0.0));
    }
}
