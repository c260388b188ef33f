//! Linear algebra for Newton systems with a banded core, a few dense
//! "border" variables and low-rank corrections:
//!
//! ```text
//!     H = [ B + U W Uᵀ   H12 ]
//!         [ H12ᵀ         H22 ]
//! ```
//!
//! `B` is symmetric banded, `W` diagonal positive. A dense problem is the
//! special case of a full bandwidth with no border and no low-rank terms.

/// Symmetric band matrix, lower band stored row by row.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        BandMatrix { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) <= self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n).map(|i| self.data[self.idx(i, i)].abs()).fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                if i != j {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Band Cholesky `B + shift I = L Lᵀ`; `None` if not positive definite.
    pub fn cholesky(&self, shift: f64) -> Option<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.data.clone();
        let w = bw + 1;
        for i in 0..n {
            l[i * w] += shift;
        }
        for j in 0..n {
            let jj = j * w;
            let mut d = l[jj];
            let lo = j.saturating_sub(bw);
            for k in lo..j {
                let v = l[j * w + (j - k)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[jj] = d;
            let hi = (j + bw).min(n - 1);
            for i in (j + 1)..=hi {
                let mut s = l[i * w + (i - j)];
                let lo = i.saturating_sub(bw);
                for k in lo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                l[i * w + (i - j)] = s / d;
            }
        }
        Some(BandCholesky { n, bw, l })
    }
}

#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.l[i * w + (i - k)] * b[k];
            }
            b[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = b[i];
            for k in (i + 1)..=hi {
                s -= self.l[k * w + (k - i)] * b[k];
            }
            b[i] = s / self.l[i * w];
        }
    }
}

/// Solves a small dense system by Gaussian elimination with partial
/// pivoting. `a` is row-major `n × n`; returns `None` when singular.
pub fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))?;
        if a[p * n + c].abs() < 1e-300 {
            return None;
        }
        if p != c {
            for j in 0..n {
                a.swap(c * n + j, p * n + j);
            }
            b.swap(c, p);
        }
        let piv = a[c * n + c];
        for r in (c + 1)..n {
            let f = a[r * n + c] / piv;
            if f != 0.0 {
                for j in c..n {
                    a[r * n + j] -= f * a[c * n + j];
                }
                b[r] -= f * b[c];
            }
        }
    }
    for c in (0..n).rev() {
        let mut s = b[c];
        for j in (c + 1)..n {
            s -= a[c * n + j] * b[j];
        }
        b[c] = s / a[c * n + c];
    }
    b.iter().all(|v| v.is_finite()).then_some(b)
}

/// Structured symmetric system; see the module docs.
#[derive(Clone, Debug)]
pub struct StructuredMatrix {
    pub band: BandMatrix,
    /// `(w, u)` pairs contributing `w u uᵀ` to the core block.
    pub low_rank: Vec<(f64, Vec<(usize, f64)>)>,
    /// Core/border coupling, column-major `n1 × r`.
    pub h12: Vec<f64>,
    /// Border block, row-major `r × r`.
    pub h22: Vec<f64>,
    border: usize,
}

impl StructuredMatrix {
    pub fn zeros(core: usize, bandwidth: usize, border: usize) -> Self {
        StructuredMatrix {
            band: BandMatrix::zeros(core, bandwidth),
            low_rank: Vec::new(),
            h12: vec![0.0; core * border],
            h22: vec![0.0; border * border],
            border,
        }
    }

    pub fn core_dim(&self) -> usize {
        self.band.dim()
    }

    pub fn border(&self) -> usize {
        self.border
    }

    pub fn dim(&self) -> usize {
        self.core_dim() + self.border
    }

    /// Adds `v` at symmetric position `(i, j)` in full-matrix indexing.
    /// Core entries outside the band panic.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let n1 = self.core_dim();
        match (i < n1, j < n1) {
            (true, true) => self.band.add(i, j, v),
            (true, false) => self.h12[(j - n1) * n1 + i] += v,
            (false, true) => self.h12[(i - n1) * n1 + j] += v,
            (false, false) => {
                let (a, b) = (i - n1, j - n1);
                self.h22[a * self.border + b] += v;
                if a != b {
                    self.h22[b * self.border + a] += v;
                }
            }
        }
    }

    /// Adds `w g gᵀ` for a sparse `g`. Core parts wider than the band are
    /// kept as a low-rank term.
    pub fn add_outer(&mut self, w: f64, g: &[(usize, f64)]) {
        let n1 = self.core_dim();
        let (lo, hi) = g
            .iter()
            .filter(|e| e.0 < n1)
            .fold((usize::MAX, 0), |(lo, hi), e| (lo.min(e.0), hi.max(e.0)));
        let core_fits = lo == usize::MAX || hi - lo <= self.band.bandwidth();
        for (a, &(i, gi)) in g.iter().enumerate() {
            for &(j, gj) in &g[..=a] {
                if i < n1 && j < n1 && !core_fits {
                    continue;
                }
                self.add(i, j, w * gi * gj);
            }
        }
        if !core_fits {
            self.low_rank.push((w, g.iter().copied().filter(|e| e.0 < n1).collect()));
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n1 = self.core_dim();
        let r = self.border;
        let mut y = self.band.mul_vec(&x[..n1]);
        for (w, u) in &self.low_rank {
            let dot: f64 = u.iter().map(|&(i, v)| v * x[i]).sum();
            for &(i, v) in u {
                y[i] += w * dot * v;
            }
        }
        y.resize(n1 + r, 0.0);
        for b in 0..r {
            let col = &self.h12[b * n1..(b + 1) * n1];
            for i in 0..n1 {
                y[i] += col[i] * x[n1 + b];
                y[n1 + b] += col[i] * x[i];
            }
            for c in 0..r {
                y[n1 + b] += self.h22[b * r + c] * x[n1 + c];
            }
        }
        y
    }

    /// Solves `(H + shift I) x = rhs`, raising `shift` until the core block
    /// factorizes. Returns `None` if no shift up to a large multiple of the
    /// diagonal works.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let scale = self.band.max_diag().max(1e-300);
        let mut shift = 0.0;
        loop {
            if let Some(x) = self.solve_shifted(rhs, shift) {
                return Some(x);
            }
            shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
            if shift > 1e2 * scale {
                return None;
            }
        }
    }

    fn solve_shifted(&self, rhs: &[f64], shift: f64) -> Option<Vec<f64>> {
        let n1 = self.core_dim();
        let r = self.border;
        let chol = self.band.cholesky(shift)?;
        let core = CoreSolver::new(&chol, &self.low_rank, n1)?;
        if r == 0 {
            return Some(core.solve(rhs.to_vec()));
        }
        // Schur complement on the border block
        let x12: Vec<Vec<f64>> = (0..r).map(|b| core.solve(self.h12[b * n1..(b + 1) * n1].to_vec())).collect();
        let y1 = core.solve(rhs[..n1].to_vec());
        let mut s = vec![0.0; r * r];
        let mut rhs2 = vec![0.0; r];
        for a in 0..r {
            let col_a = &self.h12[a * n1..(a + 1) * n1];
            for b in 0..r {
                let dot: f64 = col_a.iter().zip(&x12[b]).map(|(p, q)| p * q).sum();
                s[a * r + b] = self.h22[a * r + b] - dot;
            }
            s[a * r + a] += shift;
            rhs2[a] = rhs[n1 + a] - col_a.iter().zip(&y1).map(|(p, q)| p * q).sum::<f64>();
        }
        let x2 = dense_solve(s, rhs2, r)?;
        let mut x1 = y1;
        for b in 0..r {
            for i in 0..n1 {
                x1[i] -= x12[b][i] * x2[b];
            }
        }
        x1.extend(x2);
        x1.iter().all(|v| v.is_finite()).then_some(x1)
    }
}

/// Applies `(B + U W Uᵀ)^{-1}` through the Woodbury identity.
struct CoreSolver<'a> {
    chol: &'a BandCholesky,
    u: &'a [(f64, Vec<(usize, f64)>)],
    /// `B^{-1} u_j` for every low-rank column.
    z: Vec<Vec<f64>>,
    /// Capacitance matrix `W^{-1} + Uᵀ B^{-1} U`, row-major.
    cap: Vec<f64>,
}

impl<'a> CoreSolver<'a> {
    fn new(chol: &'a BandCholesky, u: &'a [(f64, Vec<(usize, f64)>)], n1: usize) -> Option<Self> {
        let m = u.len();
        let z: Vec<Vec<f64>> = u
            .iter()
            .map(|(_, col)| {
                let mut v = vec![0.0; n1];
                for &(i, x) in col {
                    v[i] += x;
                }
                chol.solve_in_place(&mut v);
                v
            })
            .collect();
        let mut cap = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                cap[a * m + b] = u[a].1.iter().map(|&(i, v)| v * z[b][i]).sum();
            }
            let w = u[a].0;
            if !(w > 0.0) {
                return None;
            }
            cap[a * m + a] += 1.0 / w;
        }
        Some(CoreSolver { chol, u, z, cap })
    }

    fn solve(&self, mut v: Vec<f64>) -> Vec<f64> {
        self.chol.solve_in_place(&mut v);
        let m = self.u.len();
        if m == 0 {
            return v;
        }
        let proj: Vec<f64> = self.u.iter().map(|(_, col)| col.iter().map(|&(i, x)| x * v[i]).sum()).collect();
        if let Some(c) = dense_solve(self.cap.clone(), proj, m) {
            for (j, cj) in c.iter().enumerate() {
                for (vi, zi) in v.iter_mut().zip(&self.z[j]) {
                    *vi -= cj * zi;
                }
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_of(m: &StructuredMatrix) -> Vec<f64> {
        let n = m.dim();
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = m.mul_vec(&e);
            for i in 0..n {
                out[i * n + j] = col[i];
            }
        }
        out
    }

    #[test]
    fn structured_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n1, bw, r, m) in &[(12, 2, 0, 0), (15, 3, 1, 2), (20, 1, 2, 3), (6, 5, 0, 0), (9, 0, 1, 4)] {
            let mut h = StructuredMatrix::zeros(n1, bw, r);
            let n = n1 + r;
            for i in 0..n {
                h.add(i, i, 5.0 + rng.gen::<f64>());
            }
            for _ in 0..3 * n {
                let i = rng.gen_range(0..n1);
                let j = i.saturating_sub(rng.gen_range(0..=bw));
                let g = if i == j { vec![(i, rng.gen::<f64>())] } else { vec![(i, rng.gen::<f64>()), (j, rng.gen::<f64>())] };
                h.add_outer(rng.gen(), &g);
            }
            for _ in 0..m {
                let g: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.gen::<f64>() - 0.5)).collect();
                h.add_outer(rng.gen::<f64>() + 0.1, &g);
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let x = h.solve(&rhs).unwrap();
            let back = h.mul_vec(&x);
            for (a, b) in back.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
            let y = dense_solve(dense_of(&h), rhs.clone(), n).unwrap();
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn indefinite_core_is_rejected_by_cholesky() {
        let mut b = BandMatrix::zeros(2, 1);
        b.add(0, 0, 1.0);
        b.add(1, 1, 1.0);
        b.add(1, 0, 2.0);
        assert!(b.cholesky(0.0).is_none());
        assert!(b.cholesky(2.0).is_some());
    }
}
