//! Two interferometers coupled by their mutual gravity: couplings, the
//! two-mode protocol, the joint qubit state, PPT negativity and witnesses.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::dd::{self, Dd, DdMat};
use crate::interferometer::TrapSetup;
use crate::linalg::{CMat, Mat};
use crate::phase_space::{
    gaussian_unitary_compose, symplectic_product, GaussianUnitary, PhaseVector, QuadraticHamiltonian,
    SegmentKind,
};
use crate::units::G;
use crate::{Error, Result};

/// Dimensionless gravitational constants of a pair of traps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GravCouplings {
    /// Entangling coupling g_G.
    pub g: f64,
    /// Constant pull f_G.
    pub f: f64,
    pub theta: f64,
}

impl GravCouplings {
    pub fn new(g: f64, f: f64) -> Self {
        GravCouplings { g, f, theta: 0.0 }
    }
}

/// g_G(θ) = GM(1 + 3cos 2θ)/(2ω²d³) and f_G(θ) = GM d cos θ/(√2 x0 ω²d³).
pub fn grav_couplings(setup: &TrapSetup) -> Result<GravCouplings> {
    grav_couplings_with(setup, G)
}

/// [`grav_couplings`] with an explicit Newton constant.
pub fn grav_couplings_with(setup: &TrapSetup, newton: f64) -> Result<GravCouplings> {
    let d = setup.d.ok_or(Error::OutOfRange { name: "d", value: 0.0 })?;
    if !(d > 0.0) {
        return Err(Error::OutOfRange { name: "d", value: d });
    }
    let base = newton * setup.mass / (setup.omega * setup.omega * d * d * d);
    let th = setup.theta;
    let g = 0.5 * base * (1.0 + 3.0 * libm::cos(2.0 * th));
    let f = base * d / (core::f64::consts::SQRT_2 * setup.x0()) * libm::cos(th);
    Ok(GravCouplings { g, f, theta: th })
}

/// Size of the neglected cubic term relative to the kept quadratic one,
/// x0·Δx/d, for a given maximal dimensionless superposition.
pub fn truncation_ratio(setup: &TrapSetup, delta_x_max: f64) -> Option<f64> {
    setup.d.map(|d| setup.x0() * delta_x_max / d)
}

/// Harmonic and inverted two-mode Hamiltonians plus their equilibria.
#[derive(Clone, Debug, PartialEq)]
pub struct GravHamiltonians {
    pub plus: QuadraticHamiltonian,
    pub minus: QuadraticHamiltonian,
    pub r_plus: PhaseVector,
    pub r_minus: PhaseVector,
}

fn check_coupling(g: f64) -> Result<()> {
    if !(g.abs() < 0.5) {
        return Err(Error::OutOfRange { name: "g_G", value: g });
    }
    Ok(())
}

fn grav_h(diag: f64, g: f64, f: f64, label: SegmentKind) -> Result<QuadraticHamiltonian> {
    let h = Mat::from_rows(&[
        &[diag, 0.0, g, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[g, 0.0, diag, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
    ]);
    QuadraticHamiltonian::new(h, alloc::vec![f, 0.0, -f, 0.0], label)
}

/// H_± with x-diagonal ±(1 ∓ g), x₁x₂ entry g and linear term
/// (f, 0, −f, 0); equilibria from the linear solve −H⁻¹r̄, which works out
/// to r_± = f/(2g ∓ 1)·(1, 0, −1, 0).
pub fn grav_hamiltonians(c: &GravCouplings) -> Result<GravHamiltonians> {
    check_coupling(c.g)?;
    let plus = grav_h(1.0 - c.g, c.g, c.f, SegmentKind::GravQho)?;
    let minus = grav_h(-(1.0 + c.g), c.g, c.f, SegmentKind::GravIho)?;
    let r_plus = PhaseVector::new(plus.equilibrium()?)?;
    let r_minus = PhaseVector::new(minus.equilibrium()?)?;
    Ok(GravHamiltonians { plus, minus, r_plus, r_minus })
}

// Moment maps of the two-mode segments in double-double. The centre of
// mass (x₁ + x₂)/√2 sees the bare oscillator; the relative coordinate sees
// frequency √(1 − 2g) or rate √(1 + 2g). Both deviations from 1 are formed
// as ∓2g/(1 + √·) so nothing cancels.
fn rel_freq_minus_one(two_g_signed: Dd) -> (Dd, Dd) {
    let w = (dd::ONE + two_g_signed).sqrt();
    (w, two_g_signed / (dd::ONE + w))
}

fn join_modes(com: &DdMat, rel: &DdMat) -> DdMat {
    // With T = (1/√2)[[1, 1], [1, −1]] on (x₁, x₂) and on (p₁, p₂), the
    // blocks of T·diag(C, R)·T are ½(C ± R); no √2 is ever formed.
    DdMat::from_fn(4, |i, j| {
        let (a, b) = (i % 2, j % 2);
        let c = com.get(a, b);
        let r = rel.get(a, b);
        let s = if i / 2 == j / 2 { c + r } else { c - r };
        s.mul_f64(0.5)
    })
}

/// Two-mode harmonic segment map for duration t.
pub fn grav_qho_map(g: f64, t: f64) -> Result<DdMat> {
    check_coupling(g)?;
    let q = libm::round(t / FRAC_PI_2);
    let rem = Dd::new(t) - Dd::prod(q, FRAC_PI_2);
    let com = crate::phase_space::qho_moment_map_dd(q as i64, rem);
    let (w, wm1) = rel_freq_minus_one(Dd::new(-2.0 * g));
    // ω't = q·π/2 + [(ω' − 1)·q·π/2 + ω'·rem]
    let shift = wm1 * dd::PI_2.mul_f64(q) + w * rem;
    let (s, c) = Dd::sincos_quarters(q as i64, shift);
    let rel = DdMat::from_fn(2, |i, j| match (i, j) {
        (0, 0) | (1, 1) => c,
        (0, 1) => s / w,
        _ => -(w * s),
    });
    Ok(join_modes(&com, &rel))
}

/// Two-mode inverted segment map for duration t.
pub fn grav_iho_map(g: f64, t: f64) -> Result<DdMat> {
    check_coupling(g)?;
    let com = crate::phase_space::iho_moment_map_dd(Dd::new(t));
    let (k, _) = rel_freq_minus_one(Dd::new(2.0 * g));
    let kt = k * Dd::new(t);
    let (ch, sh) = (kt.cosh(), kt.sinh());
    let rel = DdMat::from_fn(2, |i, j| match (i, j) {
        (0, 0) | (1, 1) => ch,
        (0, 1) => sh / k,
        _ => k * sh,
    });
    Ok(join_modes(&com, &rel))
}

/// Unitary of the gravitational expansion protocol, harmonic π/2 then
/// inverted t_−, twice, each segment displaced about its equilibrium.
pub fn gie_total_unitary(c: &GravCouplings, t_minus: f64) -> Result<GaussianUnitary> {
    if !(t_minus >= 0.0) {
        return Err(Error::NegativeTime(t_minus));
    }
    let hs = grav_hamiltonians(c)?;
    let up = GaussianUnitary::from_precise_moment_map(&grav_qho_map(c.g, FRAC_PI_2)?).displaced_about(&hs.plus, FRAC_PI_2)?;
    let dn = GaussianUnitary::from_precise_moment_map(&grav_iho_map(c.g, t_minus)?).displaced_about(&hs.minus, t_minus)?;
    gaussian_unitary_compose(&[up.clone(), dn.clone(), up, dn])
}

/// Total displacement as the five-term sum
/// −r₋ + F₋(r₋ − r₊) − F₋F₊(r₋ − r₊) + F₋F₊F₋(r₋ − r₊) + F r₊,
/// with F = F₋F₊F₋F₊ the total moment map.
pub fn five_term_displacement(c: &GravCouplings, t_minus: f64) -> Result<PhaseVector> {
    let hs = grav_hamiltonians(c)?;
    let fp = grav_qho_map(c.g, FRAC_PI_2)?.to_mat();
    let fm = grav_iho_map(c.g, t_minus)?.to_mat();
    let rp = hs.r_plus.as_slice();
    let rm = hs.r_minus.as_slice();
    let diff: Vec<f64> = rm.iter().zip(rp).map(|(a, b)| a - b).collect();
    let f1 = fm.clone();
    let f2 = &fm * &fp;
    let f3 = &f2 * &fm;
    let f4 = &f3 * &fp;
    let a = f1.mul_vec(&diff);
    let b = f2.mul_vec(&diff);
    let c3 = f3.mul_vec(&diff);
    let d = f4.mul_vec(rp);
    PhaseVector::new((0..4).map(|i| -rm[i] + a[i] - b[i] + c3[i] + d[i]).collect())
}

/// Joint branch labels in basis order: (+,+), (+,−), (−,+), (−,−).
pub const BRANCHES: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

fn branch_index(j: i8, k: i8) -> usize {
    (if j < 0 { 2 } else { 0 }) + if k < 0 { 1 } else { 0 }
}

/// 4×4 state of the two qubits after tracing out both masses.
#[derive(Clone, Debug, PartialEq)]
pub struct JointQubitDensity(CMat);

impl JointQubitDensity {
    /// Checks Hermiticity, unit trace and positivity to 1e-10.
    pub fn new(m: CMat) -> Result<Self> {
        if m.dim() != 4 {
            return Err(Error::Dimension { expected: 4, got: m.dim() });
        }
        crate::interferometer::check_density(&m, 1e-10)?;
        Ok(JointQubitDensity(m))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    /// ρ_{(j,k),(m,n)} with labels ±1.
    pub fn element(&self, jk: (i8, i8), mn: (i8, i8)) -> Complex64 {
        self.0[(branch_index(jk.0, jk.1), branch_index(mn.0, mn.1))]
    }

    pub(crate) fn from_unchecked(m: CMat) -> Self {
        JointQubitDensity(m)
    }

    /// Bell state ½(|++⟩ + |−−⟩)(⟨++| + ⟨−−|).
    pub fn bell() -> Self {
        JointQubitDensity(CMat::from_fn(4, |i, j| {
            let on = |k: usize| k == 0 || k == 3;
            Complex64::new(if on(i) && on(j) { 0.5 } else { 0.0 }, 0.0)
        }))
    }

    /// |++⟩⟨++| in the x basis, i.e. every element ¼.
    pub fn product_plus() -> Self {
        JointQubitDensity(CMat::from_fn(4, |_, _| Complex64::new(0.25, 0.0)))
    }
}

/// ρ_{jk}^{mn} = ¼ exp[−¼‖(S + 1)(r_mn − r_jk)‖² − (i/2)Φ] with
/// Φ = [S(r_jk − r_mn)]ᵀΩ(r_mn + r_jk) + 2(r_jk − r_mn)ᵀΩ r_tot and
/// r_jk = (j x, j p, k x, k p) built from the single-mass vector `r0`.
/// S is the symplectic label of `u` (the inverse of its moment map), the
/// same matrix that appears in the decay term.
pub fn joint_qubit_density(r0: &PhaseVector, u: &GaussianUnitary) -> Result<JointQubitDensity> {
    if r0.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: r0.dim() });
    }
    if u.modes() != 2 {
        return Err(Error::Dimension { expected: 4, got: 2 * u.modes() });
    }
    // S v = (S + 1) v − v, with S + 1 free of cancellation.
    let sp1 = u.s_plus_one();
    let rv = |j: i8, k: i8| {
        let (j, k) = (j as f64, k as f64);
        [j * r0[0], j * r0[1], k * r0[0], k * r0[1]]
    };
    let rtot = u.displacement.as_slice();
    let mut m = CMat::zeros(4);
    for (a, &(j, k)) in BRANCHES.iter().enumerate() {
        for (b, &(mm, n)) in BRANCHES.iter().enumerate() {
            let rjk = rv(j, k);
            let rmn = rv(mm, n);
            let diff: Vec<f64> = (0..4).map(|i| rmn[i] - rjk[i]).collect();
            let neg: Vec<f64> = diff.iter().map(|v| -v).collect();
            let sum: Vec<f64> = (0..4).map(|i| rmn[i] + rjk[i]).collect();
            let w = sp1.mul_vec(&diff);
            let hump = crate::linalg::norm2_sq(&w);
            let sd = sp1.mul_vec(&neg);
            let phi = symplectic_product(&sd, &sum) - symplectic_product(&neg, &sum)
                + 2.0 * symplectic_product(&neg, rtot);
            m[(a, b)] = Complex64::from_polar(0.25 * libm::exp(-0.25 * hump), -0.5 * phi);
        }
    }
    Ok(JointQubitDensity(m))
}

/// Partial transpose on the second qubit: (j,k),(m,n) → (j,n),(m,k).
pub fn partial_transpose(m: &CMat) -> CMat {
    let mut out = CMat::zeros(4);
    for &(j, k) in &BRANCHES {
        for &(mm, n) in &BRANCHES {
            out[(branch_index(j, n), branch_index(mm, k))] = m[(branch_index(j, k), branch_index(mm, n))];
        }
    }
    out
}

/// Minimum eigenvalue λ^PT of the partial transpose and its eigenvector.
pub fn ppt_negativity(rho: &JointQubitDensity) -> Result<(f64, Vec<Complex64>)> {
    let h = rho.0.hermitian_defect();
    if h > 1e-10 {
        return Err(Error::NotHermitian(h));
    }
    let pt = partial_transpose(&rho.0);
    let (vals, mut vecs) = pt.herm_eigen();
    Ok((vals[0], vecs.swap_remove(0)))
}

/// W = (|λ⟩⟨λ|)^{T_B}; Tr(Wρ) equals the eigenvalue belonging to |λ⟩.
pub fn witness_matrix(eigvec: &[Complex64]) -> Result<CMat> {
    if eigvec.len() != 4 {
        return Err(Error::Dimension { expected: 4, got: eigvec.len() });
    }
    let n2: f64 = eigvec.iter().map(|c| c.norm_sqr()).sum();
    if !(n2 > 0.0) {
        return Err(Error::ZeroVector);
    }
    let inv = 1.0 / n2;
    let proj = CMat::from_fn(4, |i, j| eigvec[i] * eigvec[j].conj() * inv);
    Ok(partial_transpose(&proj))
}

/// Tr(W ρ).
pub fn witness_expectation(w: &CMat, rho: &JointQubitDensity) -> f64 {
    (w * &rho.0).trace().re
}

/// The four Pauli matrices I, X, Y, Z.
pub fn pauli(k: usize) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match k {
        0 => [[o, z], [z, o]],
        1 => [[z, o], [o, z]],
        2 => [[z, -i], [i, z]],
        _ => [[o, z], [z, -o]],
    }
}

/// σ_a ⊗ σ_b in the joint basis.
pub fn pauli_string(a: usize, b: usize) -> CMat {
    let (pa, pb) = (pauli(a), pauli(b));
    CMat::from_fn(4, |i, j| pa[i / 2][j / 2] * pb[i % 2][j % 2])
}

/// Real coefficients c_ab with W = Σ c_ab σ_a ⊗ σ_b, i.e. the local
/// measurement settings of the witness.
pub fn pauli_decomposition(w: &CMat) -> [[f64; 4]; 4] {
    let mut c = [[0.0; 4]; 4];
    for (a, row) in c.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = 0.25 * (&pauli_string(a, b) * w).trace().re;
        }
    }
    c
}

/// Σ c_ab σ_a ⊗ σ_b.
pub fn pauli_reconstruct(c: &[[f64; 4]; 4]) -> CMat {
    let mut out = CMat::zeros(4);
    for (a, row) in c.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            let p = pauli_string(a, b);
            for i in 0..4 {
                for j in 0..4 {
                    out[(i, j)] += p[(i, j)] * v;
                }
            }
        }
    }
    out
}

/// Outcome of one pipeline evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct GieResult {
    pub lambda_pt: f64,
    pub witness: CMat,
    pub t_minus: f64,
    pub couplings: GravCouplings,
    pub rho: JointQubitDensity,
}

/// Full pipeline for two identical traps at separation d.
pub fn gie_evaluate(setup: &TrapSetup, t_minus: f64) -> Result<GieResult> {
    let c = grav_couplings(setup)?;
    gie_evaluate_couplings(&c, setup.branch_offset(), t_minus)
}

/// Pipeline for explicit couplings and initial half-superposition δx.
pub fn gie_evaluate_couplings(c: &GravCouplings, delta_x: f64, t_minus: f64) -> Result<GieResult> {
    let u = gie_total_unitary(c, t_minus)?;
    let rho = joint_qubit_density(&PhaseVector::xp(delta_x, 0.0), &u)?;
    let (lambda_pt, v) = ppt_negativity(&rho)?;
    let witness = witness_matrix(&v)?;
    Ok(GieResult { lambda_pt, witness, t_minus, couplings: *c, rho })
}

/// λ^PT only.
pub fn gie_lambda(c: &GravCouplings, delta_x: f64, t_minus: f64) -> Result<f64> {
    let u = gie_total_unitary(c, t_minus)?;
    let rho = joint_qubit_density(&PhaseVector::xp(delta_x, 0.0), &u)?;
    Ok(ppt_negativity(&rho)?.0)
}

/// Grid points covering `range` with step π/`per_pi`.
pub fn time_grid(range: (f64, f64), per_pi: usize) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo >= 0.0 && hi <= 8.0 * PI + 1e-12) {
        return Err(Error::OutOfRange { name: "t_range", value: if lo < 0.0 { lo } else { hi } });
    }
    if !(hi > lo) {
        return Err(Error::EmptyRange);
    }
    if per_pi < 200 {
        return Err(Error::OutOfRange { name: "grid points per π", value: per_pi as f64 });
    }
    let step = PI / per_pi as f64;
    let n = libm::ceil((hi - lo) / step) as usize;
    Ok((0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect())
}

/// Golden-section refinement of the first global grid maximum of `f`.
///
/// `values[i]` must equal `f(ts[i])`. Ties go to the smaller t. The
/// refinement stays inside the neighbouring grid cells and never returns
/// a point worse than the grid maximum.
pub fn refine_grid_maximum(
    ts: &[f64],
    values: &[f64],
    f: impl Fn(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    if ts.is_empty() || ts.len() != values.len() {
        return Err(Error::EmptyRange);
    }
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let lo = ts[best.saturating_sub(1)];
    let hi = ts[(best + 1).min(ts.len() - 1)];
    let (t, v) = golden_max(&f, lo, hi, 1e-10)?;
    if v > values[best] {
        Ok((t, v))
    } else {
        Ok((ts[best], values[best]))
    }
}

fn golden_max(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Grid scan then golden-section refinement of the maximum of `f`.
pub fn maximize_on_grid(range: (f64, f64), per_pi: usize, f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let ts = time_grid(range, per_pi)?;
    let vals = ts.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    refine_grid_maximum(&ts, &vals, f)
}

/// Optimal expansion time T_o^G: the first global minimiser of λ^PT over
/// `t_range`. Returns (T_o^G, λ^PT there).
pub fn optimal_time_gie(setup: &TrapSetup, t_range: (f64, f64), per_pi: usize) -> Result<(f64, f64)> {
    let c = grav_couplings(setup)?;
    let dx = setup.branch_offset();
    let (t, v) = maximize_on_grid(t_range, per_pi, |t| Ok(-gie_lambda(&c, dx, t)?))?;
    Ok((t, -v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coupling_maps_are_uncoupled() {
        let m = grav_iho_map(0.0, 1.3).unwrap().to_mat();
        assert!(m[(0, 2)] == 0.0 && m[(1, 3)] == 0.0);
        let q = grav_qho_map(0.0, FRAC_PI_2).unwrap().to_mat();
        assert!((q[(0, 1)] - 1.0).abs() < 1e-16 && q[(0, 0)].abs() < 1e-16);
    }

    #[test]
    fn bell_negativity() {
        let (l, _) = ppt_negativity(&JointQubitDensity::bell()).unwrap();
        assert!((l + 0.5).abs() < 1e-15);
    }
}
