//! Quadratic scoring rules and the plane triangle each one induces.
//!
//! A rule `S(p, o) = (p - o)' L'L (p - o)` is represented by a 2x3 map
//! `Mhat` that sends simplex points into a triangle whose corners are the
//! three possible observations, with scores equal to squared Euclidean
//! distances there. The triangle is built from its side lengths: corner B
//! at the origin, corner A on the positive x-axis, corner N above the axis.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::simplex::TernaryProb;

const PD_EPS: f64 = 1e-12;
const DEGENERATE_EPS: f64 = 1e-12;

/// Named rules get their textbook closed forms in reports; the geometry is
/// always derived from `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Brier,
    RankedProbability,
    Custom,
}

/// Point in the plane of the induced triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaryPoint {
    pub x: f64,
    pub y: f64,
}

impl BaryPoint {
    pub fn new(x: f64, y: f64) -> Self {
        BaryPoint { x, y }
    }

    pub fn dist2(&self, other: &BaryPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &BaryPoint) -> f64 {
        self.dist2(other).sqrt()
    }
}

/// A 3-vector with unit sum that may lie outside the simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePoint {
    pub p: [f64; 3],
    pub on_simplex: bool,
}

impl AffinePoint {
    pub fn new(p: [f64; 3]) -> Self {
        let on_simplex = p.iter().all(|v| *v >= -crate::simplex::NEGATIVE_TOLERANCE)
            && (p.iter().sum::<f64>() - 1.0).abs() <= crate::simplex::SUM_TOLERANCE;
        AffinePoint { p, on_simplex }
    }

    pub fn to_ternary(&self) -> Option<TernaryProb> {
        if self.on_simplex {
            TernaryProb::from_array(self.p).ok()
        } else {
            None
        }
    }
}

/// Side lengths of the induced triangle, named after the opposite corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sides {
    /// |NA|
    pub b: f64,
    /// |AB|
    pub n: f64,
    /// |BN|
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringRule {
    kind: RuleKind,
    l: Matrix3<f64>,
    gram: Matrix3<f64>,
    sides: Sides,
    phi: f64,
    mhat: [[f64; 3]; 2],
    minv: [[f64; 2]; 3],
    q0: [f64; 3],
    u0: f64,
}

impl ScoringRule {
    /// Brier score: half the squared Euclidean distance; unit equilateral triangle.
    pub fn brier() -> Self {
        let l = Matrix3::identity() * std::f64::consts::FRAC_1_SQRT_2;
        Self::build(l, RuleKind::Brier).expect("Brier rule is well formed")
    }

    /// Ranked probability score over the ordered categories; right-angled
    /// triangle with legs 1/sqrt(2).
    pub fn rps() -> Self {
        let l = Matrix3::new(1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0) * std::f64::consts::FRAC_1_SQRT_2;
        Self::build(l, RuleKind::RankedProbability).expect("RPS rule is well formed")
    }

    /// Any rule with positive definite `L'L`. `l` is given row-major.
    pub fn custom(l: [[f64; 3]; 3]) -> Result<Self> {
        for row in &l {
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        what: "scoring matrix",
                        value: v,
                    });
                }
            }
        }
        let m = Matrix3::from_fn(|i, j| l[i][j]);
        Self::build(m, RuleKind::Custom)
    }

    fn build(l: Matrix3<f64>, kind: RuleKind) -> Result<Self> {
        let raw = l.transpose() * l;
        let gram = (raw + raw.transpose()) * 0.5;
        let eig = SymmetricEigen::new(gram);
        let min_eigenvalue = eig.eigenvalues.min();
        if min_eigenvalue <= PD_EPS {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }

        let form = |d: [f64; 3]| {
            let v = Vector3::from(d);
            (v.transpose() * gram * v)[(0, 0)]
        };
        let b = form([0.0, 1.0, -1.0]).sqrt();
        let n = form([-1.0, 0.0, 1.0]).sqrt();
        let a = form([1.0, -1.0, 0.0]).sqrt();

        let cos_phi = ((n * n + a * a - b * b) / (2.0 * a * n)).clamp(-1.0, 1.0);
        let phi = cos_phi.acos();
        let sin_phi = phi.sin();
        if sin_phi <= DEGENERATE_EPS {
            return Err(Error::DegenerateTriangle { sin_phi });
        }

        let mhat = [[0.0, a * cos_phi, n], [0.0, a * sin_phi, 0.0]];
        let k = 1.0 / (a * n * sin_phi);
        let minv = [
            [-a * sin_phi * k, (a * cos_phi - n) * k],
            [0.0, n * k],
            [a * sin_phi * k, -a * cos_phi * k],
        ];

        // U(q) = rho^2 - |Q - O|^2 on the plane, with O the circumcentre of
        // the triangle and rho its circumradius. Working from the sides keeps
        // full accuracy when L'L is badly conditioned.
        let (b2, n2, a2) = (b * b, n * n, a * a);
        let w = [b2 * (n2 + a2 - b2), n2 * (b2 + a2 - n2), a2 * (b2 + n2 - a2)];
        let total: f64 = w.iter().sum();
        let q0 = w.map(|x| x / total);
        let u0 = b2 / (4.0 * sin_phi * sin_phi);

        Ok(ScoringRule {
            kind,
            l,
            gram,
            sides: Sides { b, n, a },
            phi,
            mhat,
            minv,
            q0,
            u0,
        })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    /// Row-major copy of `L`.
    pub fn l(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.l[(i, j)];
            }
        }
        out
    }

    pub fn sides(&self) -> Sides {
        self.sides
    }

    /// Interior angle at corner B.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn mhat(&self) -> [[f64; 3]; 2] {
        self.mhat
    }

    pub fn minv(&self) -> [[f64; 2]; 3] {
        self.minv
    }

    /// Climatology of maximal uncertainty (on the plane sum = 1).
    pub fn q0(&self) -> [f64; 3] {
        self.q0
    }

    pub fn max_uncertainty(&self) -> f64 {
        self.u0
    }

    /// `d' L'L d` for an arbitrary 3-vector.
    pub fn quadratic_form(&self, d: [f64; 3]) -> f64 {
        let g = &self.gram;
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += d[i] * g[(i, j)] * d[j];
            }
        }
        s
    }

    pub fn score(&self, p: &TernaryProb, o: &TernaryProb) -> f64 {
        self.score_vec(p.as_array(), o.as_array())
    }

    pub fn score_vec(&self, p: [f64; 3], o: [f64; 3]) -> f64 {
        self.quadratic_form([p[0] - o[0], p[1] - o[1], p[2] - o[2]])
    }

    pub fn to_bary(&self, p: &TernaryProb) -> BaryPoint {
        self.to_bary_vec(p.as_array())
    }

    /// `Mhat p` for any 3-vector; distances are scores only along sum-zero
    /// differences.
    pub fn to_bary_vec(&self, p: [f64; 3]) -> BaryPoint {
        let m = &self.mhat;
        BaryPoint {
            x: m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            y: m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
        }
    }

    /// `M P + o_B`, flagged when the point falls outside the triangle.
    pub fn from_bary(&self, pt: &BaryPoint) -> AffinePoint {
        let m = &self.minv;
        let mut p = [0.0; 3];
        for (i, v) in p.iter_mut().enumerate() {
            *v = m[i][0] * pt.x + m[i][1] * pt.y;
        }
        p[0] += 1.0;
        AffinePoint::new(p)
    }

    /// Triangle corners in B, N, A order.
    pub fn corners(&self) -> [BaryPoint; 3] {
        [
            BaryPoint::new(self.mhat[0][0], self.mhat[1][0]),
            BaryPoint::new(self.mhat[0][1], self.mhat[1][1]),
            BaryPoint::new(self.mhat[0][2], self.mhat[1][2]),
        ]
    }

    /// Expected score when `q` is issued and observations follow `q`.
    pub fn uncertainty(&self, q: &TernaryProb) -> f64 {
        self.uncertainty_vec(q.as_array())
    }

    pub fn uncertainty_vec(&self, q: [f64; 3]) -> f64 {
        let g = &self.gram;
        let v = [g[(0, 0)], g[(1, 1)], g[(2, 2)]];
        let lin: f64 = v.iter().zip(q.iter()).map(|(a, b)| a * b).sum();
        (lin - self.quadratic_form(q)).max(0.0)
    }

    /// Squared plane distance between `q` and the maximal-uncertainty climatology.
    pub fn uncertainty_reduction(&self, q: &TernaryProb) -> f64 {
        let p = q.as_array();
        let d = [p[0] - self.q0[0], p[1] - self.q0[1], p[2] - self.q0[2]];
        let pt = self.to_bary_vec(d);
        pt.x * pt.x + pt.y * pt.y
    }
}
