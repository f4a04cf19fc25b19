//! Independent reference implementation of the plate chain, written with
//! plain arrays and matrix products so it shares no code path with the crate.

#![allow(dead_code)]

pub type M3 = [[f64; 3]; 3];

pub struct Constituents {
    pub fe1: f64,
    pub fe2: f64,
    pub fg12: f64,
    pub fnu12: f64,
    pub me: f64,
    pub mnu: f64,
}

pub const AS4D_9310: Constituents = Constituents {
    fe1: 241.0,
    fe2: 40.0,
    fg12: 24.0,
    fnu12: 0.2,
    me: 3.12,
    mnu: 0.38,
};

pub const ANGLES: [f64; 4] = [0.0, 90.0, 45.0, -45.0];

fn matmul(a: &M3, b: &M3) -> M3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn matvec(a: &M3, x: &[f64; 3]) -> [f64; 3] {
    let mut y = [0.0; 3];
    for i in 0..3 {
        for k in 0..3 {
            y[i] += a[i][k] * x[k];
        }
    }
    y
}

fn det(a: &M3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Cramer's rule.
pub fn solve(a: &M3, b: &[f64; 3]) -> [f64; 3] {
    let d = det(a);
    let mut x = [0.0; 3];
    for (col, xi) in x.iter_mut().enumerate() {
        let mut m = *a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *xi = det(&m) / d;
    }
    x
}

fn halpin_tsai(pf: f64, pm: f64, xi: f64, vf: f64) -> f64 {
    let eta = (pf / pm - 1.0) / (pf / pm + xi);
    pm * (1.0 + xi * eta * vf) / (1.0 - eta * vf)
}

/// (E1, E2, G12, nu12) in GPa.
pub fn lamina(c: &Constituents, vf: f64) -> [f64; 4] {
    let gm = c.me / (2.0 * (1.0 + c.mnu));
    [
        vf * c.fe1 + (1.0 - vf) * c.me,
        halpin_tsai(c.fe2, c.me, 2.0, vf),
        halpin_tsai(c.fg12, gm, 1.0, vf),
        vf * c.fnu12 + (1.0 - vf) * c.mnu,
    ]
}

/// Reduced stiffness in MPa, obtained by inverting the compliance.
pub fn q_matrix(p: [f64; 4]) -> M3 {
    let (e1, e2, g12, nu12) = (p[0] * 1000.0, p[1] * 1000.0, p[2] * 1000.0, p[3]);
    let s = [[1.0 / e1, -nu12 / e1, 0.0], [-nu12 / e1, 1.0 / e2, 0.0], [0.0, 0.0, 1.0 / g12]];
    invert(&s)
}

pub fn invert(a: &M3) -> M3 {
    let mut inv = [[0.0; 3]; 3];
    for col in 0..3 {
        let mut e = [0.0; 3];
        e[col] = 1.0;
        let x = solve(a, &e);
        for row in 0..3 {
            inv[row][col] = x[row];
        }
    }
    inv
}

/// Stress transformation matrix T(θ) for [σx, σy, τxy].
pub fn t_matrix(deg: f64) -> M3 {
    let (s, c) = deg.to_radians().sin_cos();
    [
        [c * c, s * s, 2.0 * s * c],
        [s * s, c * c, -2.0 * s * c],
        [-s * c, s * c, c * c - s * s],
    ]
}

const REUTER: M3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
const REUTER_INV: M3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]];

/// Q̄ = T⁻¹ Q R T R⁻¹.
pub fn q_bar(q: &M3, deg: f64) -> M3 {
    let t = t_matrix(deg);
    let t_inv = invert(&t);
    matmul(&matmul(&matmul(&matmul(&t_inv, q), &REUTER), &t), &REUTER_INV)
}

/// Engineering strain in the laminate frame to the material frame.
pub fn rotate_strain(eps: &[f64; 3], deg: f64) -> [f64; 3] {
    let t = t_matrix(deg);
    matvec(&matmul(&matmul(&REUTER, &t), &REUTER_INV), eps)
}

/// Stacking order (angle, thickness) of the symmetric laminate, bottom first.
pub fn stack(angles: [f64; 4], t: [f64; 4]) -> Vec<(f64, f64)> {
    let half: Vec<(f64, f64)> = angles.iter().copied().zip(t.iter().copied()).collect();
    half.iter().chain(half.iter().rev()).copied().collect()
}

pub fn a_b_matrices(q: &M3, plies: &[(f64, f64)]) -> (M3, M3) {
    let h: f64 = plies.iter().map(|p| p.1).sum();
    let mut a = [[0.0; 3]; 3];
    let mut b = [[0.0; 3]; 3];
    let mut z0 = -h / 2.0;
    for &(ang, t) in plies {
        let z1 = z0 + t;
        let qb = q_bar(q, ang);
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += qb[i][j] * (z1 - z0);
                b[i][j] += qb[i][j] * (z1 * z1 - z0 * z0) / 2.0;
            }
        }
        z0 = z1;
    }
    (a, b)
}

/// Material-frame σ6 of every ply under membrane resultants `n`.
pub fn ply_sigma6(c: &Constituents, angles: [f64; 4], vf: f64, t: [f64; 4], n: [f64; 3]) -> Vec<f64> {
    let q = q_matrix(lamina(c, vf));
    let plies = stack(angles, t);
    let (a, _) = a_b_matrices(&q, &plies);
    let eps = solve(&a, &n);
    plies
        .iter()
        .map(|&(ang, _)| matvec(&q, &rotate_strain(&eps, ang))[2])
        .collect()
}

/// Max |σ6| for design (vf, t1..t4, Nx).
pub fn sigma6(design: &[f64; 6]) -> f64 {
    let t = [design[1], design[2], design[3], design[4]];
    ply_sigma6(&AS4D_9310, ANGLES, design[0], t, [design[5], 0.0, 0.0])
        .into_iter()
        .fold(0.0, |m, s: f64| m.max(s.abs()))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Deterministic pseudo-random source for test case generation.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn design(&mut self) -> [f64; 6] {
        [
            self.uniform(0.1, 0.9),
            self.uniform(1.2, 1.3),
            self.uniform(1.2, 1.3),
            self.uniform(1.2, 1.3),
            self.uniform(1.2, 1.3),
            self.uniform(90.0, 110.0),
        ]
    }
}
