//! Symmetric 3x3 tensor algebra: vectors, symmetric tensors, invariants,
//! and Haar-distributed orthogonal matrix sampling.
//!
//! Stresses are stored with six independent components since the Cauchy
//! stress is symmetric. All values are `f64` and all operations are pure.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entry-wise tolerance for accepting a matrix as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum Tensor3Error {
    #[error("matrix is not orthogonal: max |QᵀQ - I| entry = {max_dev:.3e}")]
    NotOrthogonal { max_dev: f64 },
}

/// A vector in three dimensions (density gradients, body forces).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A symmetric 3x3 tensor stored as its six independent components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymTensor3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl SymTensor3 {
    pub const ZERO: SymTensor3 = SymTensor3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: SymTensor3 = SymTensor3::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0);

    pub const fn new(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> Self {
        SymTensor3 { xx, yy, zz, xy, xz, yz }
    }

    /// `s * I`.
    pub const fn scaled_identity(s: f64) -> Self {
        SymTensor3::new(s, s, s, 0.0, 0.0, 0.0)
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy + self.zz
    }

    /// Matrix-vector product `T v`.
    pub fn apply(self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.xx * v.x + self.xy * v.y + self.xz * v.z,
            self.xy * v.x + self.yy * v.y + self.yz * v.z,
            self.xz * v.x + self.yz * v.y + self.zz * v.z,
        )
    }

    /// `T·T`, computed directly in symmetric storage (the square of a
    /// symmetric tensor is symmetric).
    pub fn square(self) -> SymTensor3 {
        let SymTensor3 { xx, yy, zz, xy, xz, yz } = self;
        SymTensor3::new(
            xx * xx + xy * xy + xz * xz,
            xy * xy + yy * yy + yz * yz,
            xz * xz + yz * yz + zz * zz,
            xx * xy + xy * yy + xz * yz,
            xx * xz + xy * yz + xz * zz,
            xy * xz + yy * yz + yz * zz,
        )
    }

    /// Max-abs norm over the tensor entries.
    pub fn norm_inf(self) -> f64 {
        self.xx
            .abs()
            .max(self.yy.abs())
            .max(self.zz.abs())
            .max(self.xy.abs())
            .max(self.xz.abs())
            .max(self.yz.abs())
    }

    pub fn is_finite(self) -> bool {
        self.as_array().iter().all(|c| c.is_finite())
    }

    /// Components in the fixed order `[xx, yy, zz, xy, xz, yz]`.
    pub fn as_array(self) -> [f64; 6] {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
    }

    pub fn from_array(c: [f64; 6]) -> Self {
        SymTensor3::new(c[0], c[1], c[2], c[3], c[4], c[5])
    }

    pub fn to_matrix(self) -> Mat3 {
        Mat3([
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ])
    }
}

impl Add for SymTensor3 {
    type Output = SymTensor3;
    fn add(self, o: SymTensor3) -> SymTensor3 {
        SymTensor3::new(
            self.xx + o.xx,
            self.yy + o.yy,
            self.zz + o.zz,
            self.xy + o.xy,
            self.xz + o.xz,
            self.yz + o.yz,
        )
    }
}

impl Sub for SymTensor3 {
    type Output = SymTensor3;
    fn sub(self, o: SymTensor3) -> SymTensor3 {
        SymTensor3::new(
            self.xx - o.xx,
            self.yy - o.yy,
            self.zz - o.zz,
            self.xy - o.xy,
            self.xz - o.xz,
            self.yz - o.yz,
        )
    }
}

impl Mul<f64> for SymTensor3 {
    type Output = SymTensor3;
    fn mul(self, s: f64) -> SymTensor3 {
        SymTensor3::new(
            self.xx * s,
            self.yy * s,
            self.zz * s,
            self.xy * s,
            self.xz * s,
            self.yz * s,
        )
    }
}

impl Neg for SymTensor3 {
    type Output = SymTensor3;
    fn neg(self) -> SymTensor3 {
        self * -1.0
    }
}

/// A general (possibly nonsymmetric) 3x3 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn transpose(self) -> Mat3 {
        let m = self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn apply(self, v: Vec3) -> Vec3 {
        let m = self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// `(M + Mᵀ)/2` in symmetric storage.
    pub fn symmetric_part(self) -> SymTensor3 {
        let m = self.0;
        SymTensor3::new(
            m[0][0],
            m[1][1],
            m[2][2],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            0.5 * (m[1][2] + m[2][1]),
        )
    }

    pub fn determinant(self) -> f64 {
        let m = self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn max_abs(self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, &v| acc.max(v.abs()))
    }
}

impl Mul for Mat3 {
    type Output = Mat3;

    fn mul(self, other: Mat3) -> Mat3 {
        let a = self.0;
        let b = other.0;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Mat3(out)
    }
}

/// Symmetrized outer product `(u⊗v + v⊗u)/2`; for `u == v` this is the
/// exact component-wise product `uᵢuⱼ`.
pub fn outer(u: Vec3, v: Vec3) -> SymTensor3 {
    SymTensor3::new(
        u.x * v.x,
        u.y * v.y,
        u.z * v.z,
        0.5 * (u.x * v.y + u.y * v.x),
        0.5 * (u.x * v.z + u.z * v.x),
        0.5 * (u.y * v.z + u.z * v.y),
    )
}

/// General matrix product of two symmetric tensors. The result is not
/// symmetric in general; use [`SymTensor3::square`] for `T·T`.
pub fn matmul(a: SymTensor3, b: SymTensor3) -> Mat3 {
    a.to_matrix() * b.to_matrix()
}

/// The six scalar invariants of a (stress, density-gradient) pair:
/// `tr T`, `tr T²`, `tr T³`, `g·g`, `g·(Tg)`, `g·(T²g)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantSet {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub i6: f64,
}

/// Evaluates the six invariants of `(t, g)`.
pub fn invariants(t: SymTensor3, g: Vec3) -> InvariantSet {
    let sq = t.square();
    // tr(T²·T) as the double contraction of T² with T (both symmetric).
    let i3 = sq.xx * t.xx
        + sq.yy * t.yy
        + sq.zz * t.zz
        + 2.0 * (sq.xy * t.xy + sq.xz * t.xz + sq.yz * t.yz);
    let tg = t.apply(g);
    InvariantSet {
        i1: t.trace(),
        i2: sq.trace(),
        i3,
        i4: g.dot(g),
        i5: g.dot(tg),
        // g·(T²g) = (Tg)·(Tg) for symmetric T; this form is nonnegative
        // by construction.
        i6: tg.dot(tg),
    }
}

/// An orthogonal 3x3 matrix (`QᵀQ = I` within [`ORTHOGONALITY_TOL`] per entry).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrthogonalMatrix(Mat3);

impl OrthogonalMatrix {
    /// Validates orthogonality before wrapping.
    pub fn try_new(m: Mat3) -> Result<Self, Tensor3Error> {
        let max_dev = orthogonality_deviation(m);
        if max_dev <= ORTHOGONALITY_TOL {
            Ok(OrthogonalMatrix(m))
        } else {
            Err(Tensor3Error::NotOrthogonal { max_dev })
        }
    }

    pub fn matrix(&self) -> Mat3 {
        self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn rotate_vec(&self, v: Vec3) -> Vec3 {
        self.0.apply(v)
    }

    /// `Q T Qᵀ`, symmetrized to absorb rounding.
    pub fn rotate_tensor(&self, t: SymTensor3) -> SymTensor3 {
        (self.0 * t.to_matrix() * self.0.transpose()).symmetric_part()
    }
}

fn orthogonality_deviation(m: Mat3) -> f64 {
    let mut max_dev = 0.0_f64;
    let qtq = (m.transpose() * m).0;
    for (i, row) in qtq.iter().enumerate() {
        for (j, &value) in row.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            max_dev = max_dev.max((value - expected).abs());
        }
    }
    max_dev
}

/// Draws an orthogonal matrix with Haar distribution on O(3), deterministic
/// for a given seed. Both determinant signs occur with equal probability.
pub fn random_orthogonal(seed: u64) -> OrthogonalMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_orthogonal_from(&mut rng)
}

/// Same as [`random_orthogonal`] but drawing from a caller-owned stream.
pub fn random_orthogonal_from<R: Rng>(rng: &mut R) -> OrthogonalMatrix {
    loop {
        let mut cols = [[0.0_f64; 3]; 3];
        for col in cols.iter_mut() {
            for entry in col.iter_mut() {
                *entry = rng.sample(StandardNormal);
            }
        }
        if let Some(q) = gram_schmidt(cols) {
            let m = Mat3([
                [q[0][0], q[1][0], q[2][0]],
                [q[0][1], q[1][1], q[2][1]],
                [q[0][2], q[1][2], q[2][2]],
            ]);
            debug_assert!(orthogonality_deviation(m) <= ORTHOGONALITY_TOL);
            return OrthogonalMatrix(m);
        }
        // near-degenerate draw; resample
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Returns `None`
/// when the columns are too close to linearly dependent.
#[allow(clippy::needless_range_loop)] // double indexing into one array
fn gram_schmidt(mut cols: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    for i in 0..3 {
        for _pass in 0..2 {
            for j in 0..i {
                let proj = dot3(cols[i], cols[j]);
                for k in 0..3 {
                    cols[i][k] -= proj * cols[j][k];
                }
            }
        }
        let norm = dot3(cols[i], cols[i]).sqrt();
        if norm < 1e-6 {
            return None;
        }
        for k in 0..3 {
            cols[i][k] /= norm;
        }
    }
    Some(cols)
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
