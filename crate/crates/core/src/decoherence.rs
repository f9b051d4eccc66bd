//! Open-system corrections: diffusion of the second moments, qubit
//! dephasing, quasi-static force noise and gas collisions.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::gie::{self, GieResult, GravCouplings, JointQubitDensity, BRANCHES};
use crate::interferometer::{self, ProtocolSchedule, QubitDensity, TrapSetup};
use crate::linalg::{CMat, Mat};
use crate::phase_space::{segment_moment_map, CovarianceMatrix, Oscillator, PhaseVector};
use crate::units::{HBAR, K_B, M_AIR};
use crate::{Error, Result};

/// How the mean molecular speed v̄ is defined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MeanSpeed {
    /// √(3k_BT/m)
    #[default]
    Rms,
    /// √(8k_BT/(πm))
    Mean,
}

impl MeanSpeed {
    pub fn speed(self, temperature: f64, molecule_mass: f64) -> f64 {
        match self {
            MeanSpeed::Rms => libm::sqrt(3.0 * K_B * temperature / molecule_mass),
            MeanSpeed::Mean => libm::sqrt(8.0 * K_B * temperature / (PI * molecule_mass)),
        }
    }
}

/// Background gas around the particle, SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gas {
    pub pressure: f64,
    /// Particle radius.
    pub radius: f64,
    pub temperature: f64,
    pub molecule_mass: f64,
    pub speed: MeanSpeed,
}

impl Gas {
    /// Air at the given pressure and temperature.
    pub fn air(pressure: f64, radius: f64, temperature: f64) -> Self {
        Gas { pressure, radius, temperature, molecule_mass: M_AIR, speed: MeanSpeed::Rms }
    }

    pub fn validate(&self) -> Result<()> {
        positive("radius", self.radius)?;
        positive("temperature", self.temperature)?;
        positive("molecule_mass", self.molecule_mass)?;
        non_negative("pressure", self.pressure)
    }

    pub fn mean_speed(&self) -> f64 {
        self.speed.speed(self.temperature, self.molecule_mass)
    }
}

/// Every noise source the simulator knows about. Absent sources are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseModel {
    /// Position-decoherence rate Γ_x in units of ω.
    pub gamma_x: f64,
    /// Qubit dephasing rate Γ_q = 1/T₂ in Hz.
    pub gamma_q: f64,
    /// Standard deviation of the run-to-run force, N.
    pub sigma_f: f64,
    pub gas: Option<Gas>,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        non_negative("gamma_x", self.gamma_x)?;
        non_negative("gamma_q", self.gamma_q)?;
        non_negative("sigma_f", self.sigma_f)?;
        match &self.gas {
            Some(g) => g.validate(),
            None => Ok(()),
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value })
    }
}

/// Linear open dynamics ṙ = A r + d, σ̇ = Aσ + σAᵀ + D.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftDiffusion {
    pub drift: Mat,
    pub diffusion: Mat,
    pub drive: Vec<f64>,
    label: Option<(Oscillator, f64)>,
}

impl DriftDiffusion {
    /// Checks shapes and that D is symmetric positive semidefinite.
    pub fn new(drift: Mat, diffusion: Mat, drive: Vec<f64>) -> Result<Self> {
        let n = drift.dim();
        if n == 0 || n % 2 != 0 {
            return Err(Error::Dimension { expected: 2, got: n });
        }
        if diffusion.dim() != n {
            return Err(Error::Dimension { expected: n, got: diffusion.dim() });
        }
        if drive.len() != n {
            return Err(Error::Dimension { expected: n, got: drive.len() });
        }
        let scale = diffusion.max_abs().max(1.0);
        if !diffusion.is_symmetric(1e-12 * scale) {
            return Err(Error::NotSymmetric);
        }
        let (vals, _) = diffusion.sym_eigen();
        if vals[0] < -1e-12 * scale {
            return Err(Error::OutOfRange { name: "diffusion eigenvalue", value: vals[0] });
        }
        Ok(DriftDiffusion { drift, diffusion, drive, label: None })
    }

    /// Single-mode segment under Γ_x[x̂,[x̂,ρ]] noise: A = ΩH and
    /// D = diag(0, Γ_x). Integrals for this case use closed forms.
    pub fn position_noise(kind: Oscillator, gamma_x: f64) -> Result<Self> {
        non_negative("gamma_x", gamma_x)?;
        let a = match kind {
            Oscillator::Qho => Mat::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]),
            Oscillator::Iho => Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
        };
        let mut dd = DriftDiffusion::new(a, Mat::diag(&[0.0, gamma_x]), vec![0.0; 2])?;
        dd.label = Some((kind, gamma_x));
        Ok(dd)
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    /// e^{At}.
    pub fn propagator(&self, t: f64) -> Result<Mat> {
        match self.label {
            Some((kind, _)) => segment_moment_map(kind, t),
            None => Ok(self.drift.scale(t).expm()),
        }
    }

    /// ∫₀ᵗ e^{As} D e^{Aᵀs} ds.
    pub fn diffusion_integral(&self, t: f64) -> Result<Mat> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        match self.label {
            Some((Oscillator::Qho, g)) => Ok(qho_diffusion(g, t)),
            Some((Oscillator::Iho, g)) => Ok(iho_diffusion(g, t)),
            None => diffusion_quadrature(self, t, 1e-10),
        }
    }

    /// ∫₀ᵗ e^{As} d ds, read off the exponential of the bordered matrix
    /// [[A, d], [0, 0]].
    fn drive_integral(&self, t: f64) -> Vec<f64> {
        let n = self.dim();
        if self.drive.iter().all(|&x| x == 0.0) {
            return vec![0.0; n];
        }
        let big = Mat::from_fn(n + 1, |i, j| match (i < n, j < n) {
            (true, true) => self.drift[(i, j)] * t,
            (true, false) => self.drive[i] * t,
            _ => 0.0,
        });
        let e = big.expm();
        (0..n).map(|i| e[(i, n)]).collect()
    }
}

/// Position-noise diffusion accumulated over a harmonic segment of length t:
/// Γ[[t/2 − sin 2t/4, sin²t/2], [sin²t/2, t/2 + sin 2t/4]]. At t = π/2 this
/// is (Γ/4)[[π, 2], [2, π]].
pub fn qho_diffusion(gamma: f64, t: f64) -> Mat {
    let s2 = libm::sin(2.0 * t) / 4.0;
    let s = libm::sin(t);
    let off = gamma * s * s / 2.0;
    Mat::from_rows(&[&[gamma * (t / 2.0 - s2), off], &[off, gamma * (t / 2.0 + s2)]])
}

/// Same for an inverted segment:
/// (Γ/4)[[sinh 2t − 2t, 2sinh²t], [2sinh²t, sinh 2t + 2t]].
pub fn iho_diffusion(gamma: f64, t: f64) -> Mat {
    let sh = libm::sinh(t);
    let sinh2 = libm::sinh(2.0 * t);
    let q = gamma / 4.0;
    let off = q * 2.0 * sh * sh;
    Mat::from_rows(&[&[q * sinh_minus_x(2.0 * t), off], &[off, q * (sinh2 + 2.0 * t)]])
}

/// sinh x − x without cancellation for small x.
fn sinh_minus_x(x: f64) -> f64 {
    if x.abs() > 0.5 {
        return libm::sinh(x) - x;
    }
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut sum = term;
    let mut k = 3.0;
    while term.abs() > 1e-17 * sum.abs() {
        term *= x2 / ((k + 1.0) * (k + 2.0));
        sum += term;
        k += 2.0;
    }
    sum
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights on the odd Kronrod nodes 1, 3, 5, 7.
const G_WEIGHTS: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15(f: &impl Fn(f64) -> Mat, a: f64, b: f64, n: usize) -> (Mat, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = Mat::zeros(n);
    let mut g = Mat::zeros(n);
    for (i, (&x, &w)) in GK_NODES.iter().zip(GK_WEIGHTS.iter()).enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[x, -x] };
        for &p in pts {
            let v = f(c + h * p);
            k = &k + &v.scale(w);
            if i % 2 == 1 {
                g = &g + &v.scale(G_WEIGHTS[i / 2]);
            }
        }
    }
    let k = k.scale(h);
    let g = g.scale(h);
    let err = k.max_diff(&g);
    (k, err)
}

/// ∫₀ᵗ e^{As} D e^{Aᵀs} ds by globally adaptive Gauss-Kronrod (7, 15),
/// stopping when the summed error estimate is below `tol`·max|result|.
pub fn diffusion_quadrature(dd: &DriftDiffusion, t: f64, tol: f64) -> Result<Mat> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let n = dd.dim();
    if t == 0.0 {
        return Ok(Mat::zeros(n));
    }
    let f = |s: f64| {
        let e = dd.drift.scale(s).expm();
        &(&e * &dd.diffusion) * &e.transpose()
    };
    let (v, e) = gk15(&f, 0.0, t, n);
    let mut parts = vec![(0.0, t, v, e)];
    for _ in 0..2000 {
        let total = parts.iter().fold(Mat::zeros(n), |acc, p| &acc + &p.2);
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= tol * total.max_abs() || total.max_abs() == 0.0 {
            return Ok(total);
        }
        let worst = (0..parts.len()).fold(0, |w, i| if parts[i].3 > parts[w].3 { i } else { w });
        let (a, b, _, _) = parts.swap_remove(worst);
        let m = 0.5 * (a + b);
        let (l, le) = gk15(&f, a, m, n);
        let (r, re) = gk15(&f, m, b, n);
        parts.push((a, m, l, le));
        parts.push((m, b, r, re));
    }
    Err(Error::OutOfRange { name: "quadrature error", value: parts.iter().map(|p| p.3).sum() })
}

/// Moments after time t: r(t) = e^{At} r0 + ∫₀ᵗ e^{As} d ds and
/// σ(t) = e^{At} σ0 e^{Aᵀt} + ∫₀ᵗ e^{As} D e^{Aᵀs} ds.
pub fn lyapunov_evolve(
    dd: &DriftDiffusion,
    r0: &PhaseVector,
    sigma0: &CovarianceMatrix,
    t: f64,
) -> Result<(PhaseVector, CovarianceMatrix)> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let n = dd.dim();
    if r0.dim() != n {
        return Err(Error::Dimension { expected: n, got: r0.dim() });
    }
    if sigma0.matrix().dim() != n {
        return Err(Error::Dimension { expected: n, got: sigma0.matrix().dim() });
    }
    let e = dd.propagator(t)?;
    let shift = dd.drive_integral(t);
    let r: Vec<f64> = e.mul_vec(r0.as_slice()).iter().zip(&shift).map(|(a, b)| a + b).collect();
    let carried = &(&e * sigma0.matrix()) * &e.transpose();
    let sigma = &carried + &dd.diffusion_integral(t)?;
    // e σ0 eᵀ is symmetric by construction; rounding in a contracting
    // product can exceed the constructor's relative tolerance.
    let sigma = (&sigma + &sigma.transpose()).scale(0.5);
    Ok((PhaseVector::new(r)?, CovarianceMatrix::new(sigma)?))
}

/// Branch covariance at the end of the expansion protocol under position
/// noise, starting from the vacuum. Each segment's diffusion is carried to
/// t_f by the moment maps of the segments that follow it:
/// σ = D₋ + F₋D₊F₋ᵀ + (F₋F₊)D₋(F₋F₊)ᵀ + (F₋F₊F₋)D₊(F₋F₊F₋)ᵀ + F σ0 Fᵀ.
/// Since F₋F₊F₋ = F₊, the third term is F₊(F₋⁻¹D₋F₋⁻ᵀ)F₊ᵀ, where the
/// bracket is D₋ with its off-diagonal negated. This avoids the e^{2t_−}
/// cancellation of the direct products.
pub fn protocol_covariance_with_diffusion(gamma_x: f64, t_minus: f64) -> Result<CovarianceMatrix> {
    non_negative("gamma_x", gamma_x)?;
    let sched = ProtocolSchedule::expansion(t_minus)?;
    let fp = segment_moment_map(Oscillator::Qho, FRAC_PI_2)?;
    let fm = segment_moment_map(Oscillator::Iho, t_minus)?;
    let dp = qho_diffusion(gamma_x, FRAC_PI_2);
    let dm = iho_diffusion(gamma_x, t_minus);
    let mut dm_back = dm.clone();
    dm_back[(0, 1)] = -dm[(0, 1)];
    dm_back[(1, 0)] = -dm[(1, 0)];
    let carry = |f: &Mat, d: &Mat| &(f * d) * &f.transpose();
    let total = sched.moment_map().to_mat();
    let mut sigma = dm;
    sigma = &sigma + &carry(&fm, &dp);
    sigma = &sigma + &carry(&fp, &dm_back);
    sigma = &sigma + &carry(&fp, &dp);
    sigma = &sigma + &carry(&total, &Mat::identity(2));
    CovarianceMatrix::new(sigma)
}

/// Qubit state at the end of the ideal protocol with position noise acting
/// throughout.
pub fn close_with_position_noise(r0: &PhaseVector, t_minus: f64, gamma_x: f64) -> Result<QubitDensity> {
    let u = ProtocolSchedule::expansion(t_minus)?.unitary(0.0)?;
    let sigma = protocol_covariance_with_diffusion(gamma_x, t_minus)?;
    interferometer::close_interferometer_with_covariance(r0, &u, &sigma)
}

/// Decay law for the qubit coherences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DephasingRate {
    /// e^{−Γ_q t/ω} per flipped qubit, as stated for the model.
    #[default]
    Stated,
    /// e^{−4Γ_q t/ω} per flipped qubit, which is what the double
    /// commutator Γ_q[σ_z,[σ_z,ρ]] gives.
    StrictLindblad,
}

impl DephasingRate {
    fn multiplier(self) -> f64 {
        match self {
            DephasingRate::Stated => 1.0,
            DephasingRate::StrictLindblad => 4.0,
        }
    }
}

/// Qubit density matrices that can lose coherence in the σ_z basis.
pub trait Dephasable: Sized {
    /// Scales every element by e^{−k·x}, where k counts the qubits whose
    /// row and column labels differ.
    fn dephased(&self, x: f64) -> Self;
}

impl Dephasable for QubitDensity {
    fn dephased(&self, x: f64) -> Self {
        let f = libm::exp(-x);
        let m = self.matrix();
        QubitDensity::from_unchecked(CMat::from_fn(2, |i, j| if i == j { m[(i, j)] } else { m[(i, j)] * f }))
    }
}

impl Dephasable for JointQubitDensity {
    fn dephased(&self, x: f64) -> Self {
        let m = self.matrix();
        JointQubitDensity::from_unchecked(CMat::from_fn(4, |a, b| {
            let ((j, k), (mm, n)) = (BRANCHES[a], BRANCHES[b]);
            let flips = (j != mm) as i32 + (k != n) as i32;
            m[(a, b)] * libm::exp(-(flips as f64) * x)
        }))
    }
}

/// Dephasing accumulated over a dimensionless time t_f at rate Γ_q (Hz) in
/// a trap of angular frequency ω.
pub fn qubit_dephase<R: Dephasable>(rho: &R, gamma_q: f64, omega: f64, t_f: f64, rate: DephasingRate) -> Result<R> {
    non_negative("gamma_q", gamma_q)?;
    positive("omega", omega)?;
    if !(t_f >= 0.0) {
        return Err(Error::NegativeTime(t_f));
    }
    Ok(rho.dephased(rate.multiplier() * gamma_q * t_f / omega))
}

/// GIE pipeline with both qubits dephasing for the expansion time
/// t_f = π + 2t_−. `gamma_ratio` is Γ_q/ω.
pub fn gie_evaluate_dephased(
    c: &GravCouplings,
    delta_x: f64,
    t_minus: f64,
    gamma_ratio: f64,
    rate: DephasingRate,
) -> Result<GieResult> {
    let ideal = gie::gie_evaluate_couplings(c, delta_x, t_minus)?;
    let rho = qubit_dephase(&ideal.rho, gamma_ratio, 1.0, interferometer::t_final(t_minus), rate)?;
    let (lambda_pt, v) = gie::ppt_negativity(&rho)?;
    let witness = gie::witness_matrix(&v)?;
    Ok(GieResult { lambda_pt, witness, t_minus, couplings: *c, rho })
}

/// λ^PT only, with dephasing.
pub fn gie_lambda_dephased(
    c: &GravCouplings,
    delta_x: f64,
    t_minus: f64,
    gamma_ratio: f64,
    rate: DephasingRate,
) -> Result<f64> {
    let u = gie::gie_total_unitary(c, t_minus)?;
    let rho = gie::joint_qubit_density(&PhaseVector::xp(delta_x, 0.0), &u)?;
    let rho = qubit_dephase(&rho, gamma_ratio, 1.0, interferometer::t_final(t_minus), rate)?;
    Ok(gie::ppt_negativity(&rho)?.0)
}

/// T_o^G and λ^PT there when the qubits dephase at Γ_q (Hz).
pub fn optimal_time_gie_dephased(
    setup: &TrapSetup,
    t_range: (f64, f64),
    per_pi: usize,
    gamma_q: f64,
    rate: DephasingRate,
) -> Result<(f64, f64)> {
    non_negative("gamma_q", gamma_q)?;
    let c = gie::grav_couplings(setup)?;
    let (dx, ratio) = (setup.branch_offset(), gamma_q / setup.omega);
    let (t, v) = gie::maximize_on_grid(t_range, per_pi, |t| Ok(-gie_lambda_dephased(&c, dx, t, ratio, rate)?))?;
    Ok((t, -v))
}

/// Coherence loss from a Gaussian run-to-run force.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasiStatic {
    /// Half the variance of the force phase: 8x0²δx²σ_f²(e^{t_−} − 1)²/(ħω)².
    pub gamma_f: f64,
    /// Visibility factor e^{−Γ_f}.
    pub factor: f64,
    /// The unsquared variant 8x0²δx²σ_f²(e^{t_−} − 1)/(ħω)².
    pub gamma_f_printed: f64,
}

pub fn quasi_static_suppression(sigma_f: f64, setup: &TrapSetup, t_minus: f64) -> Result<QuasiStatic> {
    non_negative("sigma_f", sigma_f)?;
    if !(t_minus >= 0.0) {
        return Err(Error::NegativeTime(t_minus));
    }
    let a = setup.x0() * setup.delta_x * sigma_f / (HBAR * setup.omega);
    let a = 8.0 * a * a;
    let e = libm::expm1(t_minus);
    let gamma_f = a * e * e;
    Ok(QuasiStatic { gamma_f, factor: libm::exp(-gamma_f), gamma_f_printed: a * e })
}

/// Leading-order σ_f for which Γ_f ≈ 1: ħω e^{−t_−}/(2√2 x0 δx).
pub fn quasi_static_bound(setup: &TrapSetup, t_minus: f64) -> f64 {
    HBAR * setup.omega * libm::exp(-t_minus) / (2.0 * SQRT_2 * setup.x0() * setup.delta_x)
}

/// Γ_air = 16π√(2π/3) P R²/(m v̄), in Hz.
pub fn gas_decoherence(gas: &Gas) -> Result<f64> {
    gas.validate()?;
    let c = 16.0 * PI * libm::sqrt(2.0 * PI / 3.0);
    Ok(c * gas.pressure * gas.radius * gas.radius / (gas.molecule_mass * gas.mean_speed()))
}

/// Pressure bound in the form used for the comparison table:
/// √(3 m k_B T)·t_tot/(16π√π ω R²) with t_tot the dimensionless run
/// time. The pressure in `gas` is ignored.
pub fn pressure_bound(setup: &TrapSetup, gas: &Gas, t_tot: f64) -> Result<f64> {
    gas.validate()?;
    positive("t_tot", t_tot)?;
    let num = libm::sqrt(3.0 * gas.molecule_mass * K_B * gas.temperature) * t_tot;
    Ok(num / (16.0 * PI * libm::sqrt(PI) * setup.omega * gas.radius * gas.radius))
}

/// Pressure at which Γ_air equals 1/t_tot for a run of `t_tot_seconds`.
pub fn pressure_bound_consistent(gas: &Gas, t_tot_seconds: f64) -> Result<f64> {
    positive("t_tot", t_tot_seconds)?;
    let unit = Gas { pressure: 1.0, ..*gas };
    Ok(1.0 / (gas_decoherence(&unit)? * t_tot_seconds))
}

/// Radius of a homogeneous sphere.
pub fn sphere_radius(mass: f64, density: f64) -> Result<f64> {
    positive("mass", mass)?;
    positive("density", density)?;
    Ok(libm::cbrt(3.0 * mass / (4.0 * PI * density)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turn_diffusion_is_exact() {
        let g = 0.37;
        let d = qho_diffusion(g, FRAC_PI_2);
        let want = Mat::from_rows(&[&[PI, 2.0], &[2.0, PI]]).scale(g / 4.0);
        assert_eq!(d, want);
    }

    #[test]
    fn small_argument_series() {
        for x in [1e-8, 1e-3, 0.3, 0.5] {
            let direct = libm::sinh(x) - x;
            assert!((sinh_minus_x(x) - direct).abs() <= 1e-15 * x.max(direct));
        }
    }
}
