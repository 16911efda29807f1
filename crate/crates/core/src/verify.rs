//! Identity suite for the basis and the model operators on random states.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{quad_inner, quad_norm_sq, Vec3};
use crate::model::ModelParams;
use crate::spectral::{synthesize_coeffs, FieldCoeffs, PhysicalField, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub orthogonality: f64,
    pub identity: f64,
    pub gradient_fd: f64,
    pub hessian_fd: f64,
    pub drift_identity: f64,
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            orthogonality: 1e-12,
            identity: 1e-9,
            gradient_fd: 1e-6,
            hessian_fd: 1e-5,
            drift_identity: 1e-8,
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Samples {
    pub identity_states: usize,
    pub fd_triples: usize,
    pub drift_states: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Self {
            identity_states: 100,
            fd_triples: 50,
            drift_states: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    /// Worst relative defect seen.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Random state with coefficients decaying like `1/(1+k)`.
pub fn random_state(basis: &Arc<SpectralBasis>, rng: &mut impl Rng) -> FieldCoeffs {
    let coeffs = (0..basis.n_modes())
        .map(|k| {
            let s = 1.0 / (1.0 + k as f64);
            Vec3::new(
                rng.random_range(-s..s),
                rng.random_range(-s..s),
                rng.random_range(-s..s),
            )
        })
        .collect();
    FieldCoeffs::from_coeffs(basis.clone(), coeffs).expect("one coefficient per mode")
}

fn rel(defect: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        defect.abs()
    } else {
        defect.abs() / scale
    }
}

fn values_cross(a: &[Vec3], b: &[Vec3]) -> Vec<Vec3> {
    a.iter().zip(b).map(|(x, y)| x.cross(*y)).collect()
}

pub fn run_suite(
    m: &ModelParams,
    seed: u64,
    samples: Samples,
    tol: Tolerances,
) -> Result<VerifyReport> {
    let basis = m.basis().clone();
    let w = basis.weights().to_vec();
    let n = basis.n_modes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // Orthonormality of the basis under the quadrature.
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let ei = FieldCoeffs::mode(basis.clone(), i, Vec3::X)?.to_physical();
            let ej = FieldCoeffs::mode(basis.clone(), j, Vec3::X)?.to_physical();
            let ip = quad_inner(&w, ei.values(), ej.values());
            worst = worst.max((ip - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    checks.push(CheckResult::new(
        "basis_orthonormality",
        worst,
        tol.orthogonality,
    ));

    let mut round: f64 = 0.0;
    let mut f_orth = [0.0f64; 4];
    let mut g_anti: f64 = 0.0;
    let mut aa_zero: f64 = 0.0;
    let mut aa_double: f64 = 0.0;
    let mut weak1: f64 = 0.0;
    let mut weak2: f64 = 0.0;
    let mut ito_bal: f64 = 0.0;
    for _ in 0..samples.identity_states {
        let u = random_state(&basis, &mut rng);
        let v = random_state(&basis, &mut rng);
        let back = PhysicalField::from_values(basis.clone(), synthesize_coeffs(&u)).to_coeffs();
        round = round.max(rel(back.add_scaled(-1.0, &u)?.norm_l2(), u.norm_l2()));

        let un = u.norm_l2();
        for (i, f) in [
            m.drift_f1(&u),
            m.drift_f2(&u),
            m.drift_f3(&u),
            m.drift_f4(&u),
        ]
        .iter()
        .enumerate()
        {
            f_orth[i] = f_orth[i].max(rel(f.inner(&u)?, f.norm_l2() * un));
        }
        for j in 1..=m.n_channels() {
            let gu = m.noise_g(&u, j)?;
            let gv = m.noise_g(&v, j)?;
            let s = gu.norm_l2() * v.norm_l2() + u.norm_l2() * gv.norm_l2();
            g_anti = g_anti.max(rel(gu.inner(&v)? + u.inner(&gv)?, s));
        }
        if m.n_channels() > 0 {
            let c = m.ito_correction(&u);
            let want: f64 = (1..=m.n_channels())
                .map(|j| m.noise_g(&u, j).map(|g| -0.5 * g.norm_l2_sq()))
                .sum::<Result<f64>>()?;
            ito_bal = ito_bal.max(rel(c.inner(&u)? - want, want.abs().max(f64::MIN_POSITIVE)));
        }

        // ⟨u×Au, Au⟩ = 0 and ⟨u×(u×Au), Au⟩ = −‖u×Au‖².
        let up = synthesize_coeffs(&u);
        let au = synthesize_coeffs(&u.apply_a());
        let uau = values_cross(&up, &au);
        let uuau = values_cross(&up, &uau);
        let scale = quad_norm_sq(&w, &uau).sqrt() * quad_norm_sq(&w, &au).sqrt();
        aa_zero = aa_zero.max(rel(quad_inner(&w, &uau, &au), scale.max(f64::MIN_POSITIVE)));
        let nsq = quad_norm_sq(&w, &uau);
        aa_double = aa_double.max(rel(quad_inner(&w, &uuau, &au) + nsq, nsq));

        // Strong against integrated-by-parts pairings with Δu.
        let lap = synthesize_coeffs(&u.apply_laplacian());
        let du = crate::spectral::synthesize_derivative(&u);
        let vp = synthesize_coeffs(&v);
        let dv = crate::spectral::synthesize_derivative(&v);
        let ulap = values_cross(&up, &lap);
        let strong1 = quad_inner(&w, &ulap, &vp);
        let weak1_val: f64 = (0..up.len())
            .map(|q| w[q] * du[q].dot(up[q].cross(dv[q])))
            .sum();
        let s1 = quad_norm_sq(&w, &ulap).sqrt() * quad_norm_sq(&w, &vp).sqrt();
        weak1 = weak1.max(rel(strong1 - weak1_val, s1));
        let uulap = values_cross(&up, &ulap);
        let strong2 = quad_inner(&w, &uulap, &vp);
        let weak2_val: f64 = (0..up.len())
            .map(|q| {
                let d = dv[q].cross(up[q]) + vp[q].cross(du[q]);
                -w[q] * du[q].dot(d.cross(up[q]))
            })
            .sum();
        let s2 = quad_norm_sq(&w, &uulap).sqrt() * quad_norm_sq(&w, &vp).sqrt();
        weak2 = weak2.max(rel(strong2 - weak2_val, s2));
    }
    checks.push(CheckResult::new(
        "transform_round_trip",
        round,
        tol.orthogonality,
    ));
    for (i, worst) in f_orth.iter().enumerate() {
        checks.push(CheckResult::new(
            &format!("drift_f{}_orthogonal", i + 1),
            *worst,
            tol.identity,
        ));
    }
    checks.push(CheckResult::new(
        "noise_antisymmetric",
        g_anti,
        tol.identity,
    ));
    checks.push(CheckResult::new(
        "ito_correction_balance",
        ito_bal,
        tol.identity,
    ));
    checks.push(CheckResult::new(
        "precession_orthogonal_to_au",
        aa_zero,
        tol.identity,
    ));
    checks.push(CheckResult::new(
        "damping_pairing_with_au",
        aa_double,
        tol.identity,
    ));
    checks.push(CheckResult::new(
        "exchange_precession_weak_form",
        weak1,
        tol.identity,
    ));
    checks.push(CheckResult::new(
        "exchange_damping_weak_form",
        weak2,
        tol.identity,
    ));

    // Φ′ and Φ″ against central differences.
    let h = tol.fd_step;
    let mut grad: f64 = 0.0;
    let mut hess: f64 = 0.0;
    for _ in 0..samples.fd_triples {
        let u = random_state(&basis, &mut rng);
        let g = random_state(&basis, &mut rng);
        let k = random_state(&basis, &mut rng);
        let fd = (m.energy(&u.add_scaled(h, &g)?) - m.energy(&u.add_scaled(-h, &g)?)) / (2.0 * h);
        let pairing = m.energy_gradient_pairing(&u, &g)?;
        grad = grad.max(rel(fd - pairing, pairing.abs().max(1e-3)));
        let fd2 = (m.energy_gradient_pairing(&u.add_scaled(h, &k)?, &g)?
            - m.energy_gradient_pairing(&u.add_scaled(-h, &k)?, &g)?)
            / (2.0 * h);
        let hp = m.energy_hessian_pairing(&u, &g, &k)?;
        hess = hess.max(rel(fd2 - hp, hp.abs().max(1e-3)));
    }
    checks.push(CheckResult::new(
        "energy_gradient_fd",
        grad,
        tol.gradient_fd,
    ));
    checks.push(CheckResult::new("energy_hessian_fd", hess, tol.hessian_fd));

    let mut drift: f64 = 0.0;
    for _ in 0..samples.drift_states {
        let u = random_state(&basis, &mut rng);
        let lhs = m.energy_drift_identity_lhs(&u);
        let rhs = m.energy_drift_identity_rhs(&u);
        drift = drift.max(rel(lhs - rhs, lhs.abs().max(rhs.abs())));
    }
    checks.push(CheckResult::new(
        "energy_drift_identity",
        drift,
        tol.drift_identity,
    ));

    Ok(VerifyReport { checks })
}
