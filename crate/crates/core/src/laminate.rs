//! Classical laminate theory for the symmetric `[0/90/±45]s` plate under
//! membrane loading.
//!
//! Lamina constants come in GPa and are converted to MPa here, so stiffness
//! matrices are in MPa, `A` in N/mm, `B` in N and `D` in N·mm. Stresses are
//! reported in MPa (N/mm²).

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{homogenize, ConstituentSet, LaminaProperties, VolumeFraction};
use crate::stochastic::DesignPoint;

const GPA_TO_MPA: f64 = 1.0e3;
/// Largest accepted condition number of the extensional stiffness `A`.
const MAX_CONDITION: f64 = 1.0e12;

/// One ply group: fiber angle in degrees and thickness in mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ply {
    pub angle_deg: f64,
    pub thickness: f64,
}

/// Stacking sequence. With `symmetric` set, `groups` is the half stack from
/// the outer surface to the midplane and is mirrored on expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct Layup {
    pub groups: Vec<Ply>,
    pub symmetric: bool,
}

impl Layup {
    pub fn new(groups: Vec<Ply>, symmetric: bool) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Domain("layup needs at least one ply".into()));
        }
        for (i, ply) in groups.iter().enumerate() {
            if !(ply.thickness.is_finite() && ply.thickness > 0.0) {
                return Err(Error::Domain(format!(
                    "ply group {i} thickness must be positive, got {}",
                    ply.thickness
                )));
            }
            if !ply.angle_deg.is_finite() {
                return Err(Error::Domain(format!("ply group {i} angle is not finite")));
            }
        }
        Ok(Layup { groups, symmetric })
    }

    /// The `[0/90/45/-45]s` stack with per-group thicknesses.
    pub fn quasi_isotropic(thickness: [f64; 4]) -> Result<Self> {
        Self::with_angles([0.0, 90.0, 45.0, -45.0], thickness)
    }

    pub fn with_angles(angles_deg: [f64; 4], thickness: [f64; 4]) -> Result<Self> {
        let groups = angles_deg
            .iter()
            .zip(thickness)
            .map(|(&angle_deg, thickness)| Ply { angle_deg, thickness })
            .collect();
        Self::new(groups, true)
    }

    /// Full stack from top to bottom, together with the group index of every ply.
    pub fn expand(&self) -> Vec<(usize, Ply)> {
        let mut plies: Vec<(usize, Ply)> = self.groups.iter().copied().enumerate().collect();
        if self.symmetric {
            let mirrored: Vec<_> = plies.iter().rev().copied().collect();
            plies.extend(mirrored);
        }
        plies
    }

    pub fn total_thickness(&self) -> f64 {
        let half: f64 = self.groups.iter().map(|p| p.thickness).sum();
        if self.symmetric {
            2.0 * half
        } else {
            half
        }
    }
}

/// Force resultants (N/mm) and moment resultants (N).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadState {
    pub nx: f64,
    pub ny: f64,
    pub nxy: f64,
    pub mx: f64,
    pub my: f64,
    pub mxy: f64,
}

impl LoadState {
    pub fn uniaxial(nx: f64) -> Self {
        LoadState {
            nx,
            ..Default::default()
        }
    }

    pub fn forces(&self) -> Vector3<f64> {
        Vector3::new(self.nx, self.ny, self.nxy)
    }

    pub fn has_moments(&self) -> bool {
        self.mx != 0.0 || self.my != 0.0 || self.mxy != 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbdMatrix {
    pub a: Matrix3<f64>,
    pub b: Matrix3<f64>,
    pub d: Matrix3<f64>,
}

/// Stress state of a single ply in its material frame (MPa).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlyStress {
    pub ply: usize,
    pub angle_deg: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma6: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlyStressReport {
    pub plies: Vec<PlyStress>,
    /// Largest |σ6| over all plies.
    pub objective_sigma6: f64,
}

impl PlyStressReport {
    /// Fixed-width text table, one row per ply.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>4} {:>8} {:>14} {:>14} {:>14}\n",
            "ply", "angle", "sigma1_mpa", "sigma2_mpa", "sigma6_mpa"
        );
        for p in &self.plies {
            out.push_str(&format!(
                "{:>4} {:>8.1} {:>14.6} {:>14.6} {:>14.6}\n",
                p.ply + 1,
                p.angle_deg,
                p.sigma1,
                p.sigma2,
                p.sigma6
            ));
        }
        out.push_str(&format!("max |sigma6| = {:.6} MPa\n", self.objective_sigma6));
        out
    }
}

/// Plane-stress reduced stiffness `Q` in MPa.
pub fn reduced_stiffness(p: &LaminaProperties) -> Result<Matrix3<f64>> {
    p.validate()?;
    let (e1, e2, g12) = (p.e1 * GPA_TO_MPA, p.e2 * GPA_TO_MPA, p.g12 * GPA_TO_MPA);
    let nu21 = p.nu12 * e2 / e1;
    let denom = 1.0 - p.nu12 * nu21;
    if denom <= 0.0 {
        return Err(Error::Domain(format!("1 - nu12*nu21 = {denom} is not positive")));
    }
    let q11 = e1 / denom;
    let q22 = e2 / denom;
    let q12 = p.nu12 * e2 / denom;
    Ok(Matrix3::new(q11, q12, 0.0, q12, q22, 0.0, 0.0, 0.0, g12))
}

/// Rotates `Q` from the material frame into the laminate frame for a ply at
/// `angle_deg`.
pub fn transform_stiffness(q: &Matrix3<f64>, angle_deg: f64) -> Matrix3<f64> {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let (c2, s2) = (c * c, s * s);
    let (c4, s4, c2s2) = (c2 * c2, s2 * s2, c2 * s2);
    let (q11, q12, q22, q66) = (q[(0, 0)], q[(0, 1)], q[(1, 1)], q[(2, 2)]);

    let b11 = q11 * c4 + 2.0 * (q12 + 2.0 * q66) * c2s2 + q22 * s4;
    let b22 = q11 * s4 + 2.0 * (q12 + 2.0 * q66) * c2s2 + q22 * c4;
    let b12 = (q11 + q22 - 4.0 * q66) * c2s2 + q12 * (c4 + s4);
    let b66 = (q11 + q22 - 2.0 * q12 - 2.0 * q66) * c2s2 + q66 * (c4 + s4);
    let b16 = (q11 - q12 - 2.0 * q66) * c2 * c * s - (q22 - q12 - 2.0 * q66) * s2 * s * c;
    let b26 = (q11 - q12 - 2.0 * q66) * s2 * s * c - (q22 - q12 - 2.0 * q66) * c2 * c * s;
    Matrix3::new(b11, b12, b16, b12, b22, b26, b16, b26, b66)
}

/// Integrates the per-group transformed stiffness through the thickness, with
/// `z` measured from the midplane.
pub fn assemble_abd(layup: &Layup, q_bar: &[Matrix3<f64>]) -> Result<AbdMatrix> {
    if q_bar.len() != layup.groups.len() {
        return Err(Error::Domain(format!(
            "expected {} stiffness matrices, got {}",
            layup.groups.len(),
            q_bar.len()
        )));
    }
    let mut abd = AbdMatrix {
        a: Matrix3::zeros(),
        b: Matrix3::zeros(),
        d: Matrix3::zeros(),
    };
    let mut z_bot = -0.5 * layup.total_thickness();
    for (group, ply) in layup.expand() {
        let z_top = z_bot + ply.thickness;
        let q = &q_bar[group];
        abd.a += q * (z_top - z_bot);
        abd.b += q * (0.5 * (z_top * z_top - z_bot * z_bot));
        abd.d += q * ((z_top.powi(3) - z_bot.powi(3)) / 3.0);
        z_bot = z_top;
    }
    Ok(abd)
}

/// Midplane strains `[εx, εy, γxy]` for a membrane-only load.
pub fn solve_membrane(abd: &AbdMatrix, load: &LoadState) -> Result<Vector3<f64>> {
    if load.has_moments() {
        return Err(Error::Domain(
            "moment resultants are not supported; only membrane loads are solved".into(),
        ));
    }
    let eig = SymmetricEigen::new(abd.a);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(Error::Singular(format!(
            "extensional stiffness has condition number {:.3e}",
            max / min
        )));
    }
    let lu = abd.a.lu();
    lu.solve(&load.forces())
        .ok_or_else(|| Error::Singular("extensional stiffness is not invertible".into()))
}

/// Rotates laminate-frame engineering strain `[εx, εy, γxy]` into the
/// material frame of a ply at `angle_deg`.
pub fn strain_to_material(strain: &Vector3<f64>, angle_deg: f64) -> Vector3<f64> {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let (ex, ey, gxy) = (strain[0], strain[1], strain[2]);
    Vector3::new(
        c * c * ex + s * s * ey + c * s * gxy,
        s * s * ex + c * c * ey - c * s * gxy,
        -2.0 * c * s * ex + 2.0 * c * s * ey + (c * c - s * s) * gxy,
    )
}

/// Material-frame stresses of every ply for a uniform midplane strain.
/// `q` holds the untransformed stiffness of each ply group.
pub fn ply_stresses(
    layup: &Layup,
    q: &[Matrix3<f64>],
    strain: &Vector3<f64>,
) -> Result<PlyStressReport> {
    if q.len() != layup.groups.len() {
        return Err(Error::Domain(format!(
            "expected {} stiffness matrices, got {}",
            layup.groups.len(),
            q.len()
        )));
    }
    let plies: Vec<PlyStress> = layup
        .expand()
        .into_iter()
        .enumerate()
        .map(|(index, (group, ply))| {
            let stress = q[group] * strain_to_material(strain, ply.angle_deg);
            PlyStress {
                ply: index,
                angle_deg: ply.angle_deg,
                sigma1: stress[0],
                sigma2: stress[1],
                sigma6: stress[2],
            }
        })
        .collect();
    let objective_sigma6 = plies.iter().fold(0.0f64, |m, p| m.max(p.sigma6.abs()));
    Ok(PlyStressReport {
        plies,
        objective_sigma6,
    })
}

/// The deterministic micro → meso → macro chain for one design point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateModel {
    pub constituents: ConstituentSet,
    /// Half-stack fiber angles, outermost group first.
    pub angles_deg: [f64; 4],
    /// Load components not driven by the design; `nx` is ignored in favor
    /// of the design's load gene.
    pub base_load: LoadState,
}

impl PlateModel {
    pub fn case_study(constituents: ConstituentSet) -> Self {
        PlateModel {
            constituents,
            angles_deg: [0.0, 90.0, 45.0, -45.0],
            base_load: LoadState::default(),
        }
    }

    pub fn load_for(&self, design: &DesignPoint) -> LoadState {
        LoadState {
            nx: design.load(),
            ..self.base_load
        }
    }

    pub fn evaluate(&self, design: &DesignPoint) -> Result<PlyStressReport> {
        let vf = VolumeFraction::new(design.volume_fraction())?;
        let lamina = homogenize(&self.constituents, vf)?;
        let q = reduced_stiffness(&lamina)?;
        let layup = Layup::with_angles(self.angles_deg, design.thicknesses())?;
        let q_bar: Vec<_> = self.angles_deg.iter().map(|&a| transform_stiffness(&q, a)).collect();
        let abd = assemble_abd(&layup, &q_bar)?;
        let strain = solve_membrane(&abd, &self.load_for(design))?;
        ply_stresses(&layup, &vec![q; layup.groups.len()], &strain)
    }

    pub fn sigma6(&self, design: &DesignPoint) -> Result<f64> {
        Ok(self.evaluate(design)?.objective_sigma6)
    }
}

/// Max |σ6| of the case-study plate at `design`.
pub fn evaluate_sigma6(c: &ConstituentSet, design: &DesignPoint) -> Result<f64> {
    PlateModel::case_study(*c).sigma6(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn barbero_lamina() -> LaminaProperties {
        LaminaProperties {
            e1: 133.86,
            e2: 7.706,
            g12: 4.306,
            nu12: 0.301,
        }
    }

    fn max_abs(m: &Matrix3<f64>) -> f64 {
        m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn isotropic_reduced_stiffness() {
        let (e, nu) = (70.0, 0.3);
        let q = reduced_stiffness(&LaminaProperties {
            e1: e,
            e2: e,
            g12: e / (2.0 * (1.0 + nu)),
            nu12: nu,
        })
        .unwrap();
        let e_mpa = e * 1e3;
        assert!(rel(q[(0, 0)], e_mpa / (1.0 - nu * nu)) < 1e-14);
        assert!(rel(q[(1, 1)], e_mpa / (1.0 - nu * nu)) < 1e-14);
        assert!(rel(q[(2, 2)], e_mpa / (2.0 * (1.0 + nu))) < 1e-14);
    }

    // Frozen from a hand evaluation of the four reduced-stiffness formulas.
    #[test]
    fn orthotropic_reduced_stiffness() {
        let q = reduced_stiffness(&barbero_lamina()).unwrap();
        assert!(rel(q[(0, 0)], 134561.83183828092) < 1e-13);
        assert!(rel(q[(1, 1)], 7746.402780112004) < 1e-13);
        assert!(rel(q[(0, 1)], 2331.6672368137133) < 1e-13);
        assert_eq!(q[(2, 2)], 4306.0);
        assert_eq!(q[(0, 2)], 0.0);
        let eig = SymmetricEigen::new(q);
        assert!(eig.eigenvalues.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn reduced_stiffness_rejects_nonphysical_poisson() {
        let mut p = barbero_lamina();
        p.e1 = 10.0;
        p.e2 = 10.0;
        p.nu12 = 1.2;
        assert!(reduced_stiffness(&p).is_err());
    }

    #[test]
    fn rotation_special_angles() {
        let q = reduced_stiffness(&barbero_lamina()).unwrap();
        assert_eq!(transform_stiffness(&q, 0.0), q);

        let r = transform_stiffness(&q, 90.0);
        let tol = 1e-9 * max_abs(&q);
        assert!((r[(0, 0)] - q[(1, 1)]).abs() < tol);
        assert!((r[(1, 1)] - q[(0, 0)]).abs() < tol);
        assert!((r[(0, 1)] - q[(0, 1)]).abs() < tol);
        assert!((r[(2, 2)] - q[(2, 2)]).abs() < tol);

        let p = transform_stiffness(&q, 45.0);
        let m = transform_stiffness(&q, -45.0);
        for i in 0..3 {
            assert!((p[(i, i)] - m[(i, i)]).abs() < tol);
        }
        assert!((p[(0, 2)] + m[(0, 2)]).abs() < tol);
        assert!((p[(1, 2)] + m[(1, 2)]).abs() < tol);
        assert!(p[(0, 2)].abs() > 1.0);
    }

    #[test]
    fn single_ply_integrals() {
        let q = reduced_stiffness(&barbero_lamina()).unwrap();
        let t = 2.5;
        let layup = Layup::new(vec![Ply { angle_deg: 0.0, thickness: t }], false).unwrap();
        let abd = assemble_abd(&layup, &[q]).unwrap();
        assert!(max_abs(&(abd.a - q * t)) < 1e-12 * max_abs(&q) * t);
        assert!(max_abs(&abd.b) < 1e-12 * max_abs(&q) * t);
        assert!(max_abs(&(abd.d - q * (t.powi(3) / 12.0))) < 1e-12 * max_abs(&q) * t.powi(3));
    }

    #[test]
    fn expansion_mirrors_half_stack() {
        let layup = Layup::quasi_isotropic([1.0, 2.0, 3.0, 4.0]).unwrap();
        let full = layup.expand();
        let angles: Vec<f64> = full.iter().map(|(_, p)| p.angle_deg).collect();
        let thick: Vec<f64> = full.iter().map(|(_, p)| p.thickness).collect();
        assert_eq!(angles, vec![0.0, 90.0, 45.0, -45.0, -45.0, 45.0, 90.0, 0.0]);
        assert_eq!(thick, vec![1.0, 2.0, 3.0, 4.0, 4.0, 3.0, 2.0, 1.0]);
        assert_eq!(layup.total_thickness(), 20.0);
        assert!(Layup::quasi_isotropic([1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn quasi_isotropic_membrane() {
        let q = reduced_stiffness(&barbero_lamina()).unwrap();
        let layup = Layup::quasi_isotropic([1.25; 4]).unwrap();
        let q_bar: Vec<_> = layup.groups.iter().map(|p| transform_stiffness(&q, p.angle_deg)).collect();
        let abd = assemble_abd(&layup, &q_bar).unwrap();
        let scale = max_abs(&abd.a);
        assert!((abd.a[(0, 0)] - abd.a[(1, 1)]).abs() <= 1e-9 * scale);
        assert!(abd.a[(0, 2)].abs() <= 1e-9 * scale);
        assert!(abd.a[(1, 2)].abs() <= 1e-9 * scale);
        assert!(max_abs(&abd.b) <= 1e-9 * scale * layup.total_thickness());

        let strain = solve_membrane(&abd, &LoadState::uniaxial(100.0)).unwrap();
        assert!(strain[2].abs() < 1e-12 * strain[0].abs());
        let residual = (abd.a * strain - LoadState::uniaxial(100.0).forces()).norm();
        assert!(residual <= 1e-10 * 100.0);

        let report = ply_stresses(&layup, &[q; 4], &strain).unwrap();
        assert_eq!(report.plies.len(), 8);
        // 0° and 90° plies see no shear strain under Nx.
        assert!(report.plies[0].sigma6.abs() < 1e-9);
        assert!(report.plies[1].sigma6.abs() < 1e-9);
        let (p45, m45) = (report.plies[2].sigma6, report.plies[3].sigma6);
        assert!((p45 + m45).abs() < 1e-12 * p45.abs());
        assert!(rel(report.objective_sigma6, p45.abs()) < 1e-12);
    }

    #[test]
    fn membrane_solve_is_linear_and_guards() {
        let q = reduced_stiffness(&barbero_lamina()).unwrap();
        let layup = Layup::quasi_isotropic([1.2, 1.3, 1.25, 1.22]).unwrap();
        let q_bar: Vec<_> = layup.groups.iter().map(|p| transform_stiffness(&q, p.angle_deg)).collect();
        let abd = assemble_abd(&layup, &q_bar).unwrap();
        assert_eq!(solve_membrane(&abd, &LoadState::default()).unwrap(), Vector3::zeros());
        let load = LoadState {
            nx: 37.0,
            ny: -4.0,
            nxy: 11.0,
            ..Default::default()
        };
        let double = LoadState {
            nx: 74.0,
            ny: -8.0,
            nxy: 22.0,
            ..Default::default()
        };
        let e1 = solve_membrane(&abd, &load).unwrap();
        let e2 = solve_membrane(&abd, &double).unwrap();
        assert!((e2 - e1 * 2.0).norm() <= 1e-14 * e2.norm());

        let mut with_moment = load;
        with_moment.mx = 1.0;
        assert!(solve_membrane(&abd, &with_moment).is_err());

        let degenerate = AbdMatrix {
            a: Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0),
            b: Matrix3::zeros(),
            d: Matrix3::zeros(),
        };
        assert!(matches!(solve_membrane(&degenerate, &load), Err(Error::Singular(_))));
    }

    // Nominal and published-optimum values frozen from an independent numpy
    // CLT script that builds Q̄ as T⁻¹·Q·R·T·R⁻¹.
    #[test]
    fn frozen_chain_values() {
        let c = ConstituentSet::AS4D_9310;
        let nominal = DesignPoint::new([0.5, 1.25, 1.25, 1.25, 1.25, 100.0]);
        assert!(rel(evaluate_sigma6(&c, &nominal).unwrap(), 0.8693552207836953) < 1e-8);
        let published = DesignPoint::new([0.887444, 1.222475, 1.252724, 1.230146, 1.206935, 96.861233]);
        assert!(rel(evaluate_sigma6(&c, &published).unwrap(), 1.5360910121628908) < 1e-8);
    }

    #[test]
    fn report_table_has_every_ply() {
        let c = ConstituentSet::AS4D_9310;
        let report = PlateModel::case_study(c)
            .evaluate(&DesignPoint::new([0.5, 1.25, 1.25, 1.25, 1.25, 100.0]))
            .unwrap();
        let table = report.to_table();
        assert_eq!(table.lines().count(), 10);
        assert!(table.contains("-45.0"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn symmetric_layups_have_no_coupling(
            t in proptest::array::uniform4(0.05f64..5.0),
            angles in proptest::array::uniform4(-90.0f64..90.0),
        ) {
            let q = reduced_stiffness(&barbero_lamina()).unwrap();
            let layup = Layup::with_angles(angles, t).unwrap();
            let q_bar: Vec<_> = angles.iter().map(|&a| transform_stiffness(&q, a)).collect();
            let abd = assemble_abd(&layup, &q_bar).unwrap();
            let a_max = max_abs(&abd.a);
            prop_assert!(max_abs(&abd.b) <= 1e-9 * a_max * layup.total_thickness());
            for m in [&abd.a, &abd.b, &abd.d] {
                let scale = max_abs(m).max(1e-300);
                prop_assert!(max_abs(&(m - m.transpose())) <= 1e-12 * scale);
            }
            prop_assert!(SymmetricEigen::new(abd.a).eigenvalues.iter().all(|&v| v > 0.0));
        }

        #[test]
        fn transformed_stiffness_stays_positive_definite(angle in -180.0f64..180.0) {
            let q = reduced_stiffness(&barbero_lamina()).unwrap();
            let r = transform_stiffness(&q, angle);
            prop_assert!(max_abs(&(r - r.transpose())) == 0.0);
            prop_assert!(SymmetricEigen::new(r).eigenvalues.iter().all(|&v| v > 0.0));
        }
    }
}
