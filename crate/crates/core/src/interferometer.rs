//! Single-interferometer pipeline: cat creation, the expansion protocol,
//! force sensing and closure to a qubit density matrix.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::dd::{Dd, DdMat};
use crate::linalg::{CMat, Mat};
use crate::phase_space::{
    evolve_numeric_oracle, evolve_with_matrix, gaussian_unitary_compose, iho_moment_map_dd, omega,
    qho_moment_map_dd, symplectic_inverse, symplectic_product, CovarianceMatrix, GaussianUnitary,
    Oscillator, PhaseVector, QuadraticHamiltonian,
};
use crate::units::HBAR;
use crate::{Error, Result};

/// Unit in which [`TrapSetup::delta_x`] is quoted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LengthUnit {
    /// Phase-space units √2·x0, in which the vacuum covariance is the
    /// identity. The branch offset is δx itself.
    #[default]
    PhaseSpace,
    /// Ground-state spreads x0. The branch offset is δx/√2.
    GroundStateSpread,
}

impl LengthUnit {
    /// Branch offset in phase-space units for a separation quoted in `self`.
    pub fn offset(self, delta_x: f64) -> f64 {
        match self {
            LengthUnit::PhaseSpace => delta_x,
            LengthUnit::GroundStateSpread => delta_x / core::f64::consts::SQRT_2,
        }
    }
}

/// SI description of one trapped mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapSetup {
    /// Mass in kg.
    pub mass: f64,
    /// Trap angular frequency in rad/s.
    pub omega: f64,
    /// Dimensionless initial half-superposition, in units of `unit`.
    pub delta_x: f64,
    pub unit: LengthUnit,
    /// Distance between neighbouring traps in m, if any.
    pub d: Option<f64>,
    /// Orientation of the trap axis relative to the separation, rad.
    pub theta: f64,
}

impl TrapSetup {
    pub fn new(mass: f64, omega: f64, delta_x: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::OutOfRange { name: "mass", value: mass });
        }
        if !(omega > 0.0) {
            return Err(Error::OutOfRange { name: "omega", value: omega });
        }
        if !(delta_x >= 0.0) {
            return Err(Error::OutOfRange { name: "delta_x", value: delta_x });
        }
        Ok(TrapSetup { mass, omega, delta_x, unit: LengthUnit::PhaseSpace, d: None, theta: 0.0 })
    }

    pub fn with_distance(mut self, d: f64) -> Self {
        self.d = Some(d);
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_unit(mut self, unit: LengthUnit) -> Self {
        self.unit = unit;
        self
    }

    /// Initial half-superposition in phase-space units, the x entry of r0.
    pub fn branch_offset(&self) -> f64 {
        self.unit.offset(self.delta_x)
    }

    /// Ground-state spread x0 = √(ħ / 2Mω) in m.
    pub fn x0(&self) -> f64 {
        libm::sqrt(HBAR / (2.0 * self.mass * self.omega))
    }

    /// Initial half-superposition in m, x0·δx.
    pub fn initial_superposition_si(&self) -> f64 {
        self.x0() * self.delta_x
    }

    /// Dimensionless coupling g = f x0 / (ħω) of a constant force f (N).
    pub fn force_coupling(&self, f: f64) -> f64 {
        f * self.x0() / (HBAR * self.omega)
    }
}

/// Piecewise-constant sequence of harmonic and inverted segments.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSchedule {
    pub segments: Vec<(Oscillator, f64)>,
}

impl ProtocolSchedule {
    /// Quarter period, expansion, quarter period, expansion.
    pub fn expansion(t_minus: f64) -> Result<Self> {
        if !(t_minus >= 0.0) {
            return Err(Error::NegativeTime(t_minus));
        }
        Ok(ProtocolSchedule {
            segments: alloc::vec![
                (Oscillator::Qho, FRAC_PI_2),
                (Oscillator::Iho, t_minus),
                (Oscillator::Qho, FRAC_PI_2),
                (Oscillator::Iho, t_minus),
            ],
        })
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.1).sum()
    }

    /// Double-double moment map from 0 to `t`.
    pub fn moment_map_at(&self, t: f64) -> Result<DdMat> {
        if !(t >= 0.0) || t > self.duration() * (1.0 + 1e-15) {
            return Err(Error::OutOfRange { name: "sample time", value: t });
        }
        let mut left = t;
        let mut acc = DdMat::identity(2);
        for &(kind, dur) in &self.segments {
            if left <= 0.0 {
                break;
            }
            let tau = if left >= dur { dur } else { left };
            left -= tau;
            acc = segment_map(kind, tau).mul(&acc);
        }
        Ok(acc)
    }

    /// Total moment map.
    pub fn moment_map(&self) -> DdMat {
        self.segments
            .iter()
            .fold(DdMat::identity(2), |acc, &(k, d)| segment_map(k, d).mul(&acc))
    }

    /// Unitary of the schedule with an optional constant force g.
    pub fn unitary(&self, g: f64) -> Result<GaussianUnitary> {
        let segs = self
            .segments
            .iter()
            .map(|&(kind, dur)| {
                let h = QuadraticHamiltonian::with_force(kind, g);
                GaussianUnitary::from_precise_moment_map(&segment_map(kind, dur)).displaced_about(&h, dur)
            })
            .collect::<Result<Vec<_>>>()?;
        gaussian_unitary_compose(&segs)
    }
}

fn segment_map(kind: Oscillator, t: f64) -> DdMat {
    match kind {
        Oscillator::Qho => {
            let q = libm::round(t / FRAC_PI_2);
            qho_moment_map_dd(q as i64, Dd::new(t) - Dd::prod(q, FRAC_PI_2))
        }
        Oscillator::Iho => iho_moment_map_dd(Dd::new(t)),
    }
}

/// Moments of one branch of the cat.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub r: PhaseVector,
    pub sigma: CovarianceMatrix,
}

/// Qubit-tagged pair of coherent branches: index 0 is |+1⟩, index 1 is |−1⟩.
#[derive(Clone, Debug, PartialEq)]
pub struct CatState {
    pub branches: [Branch; 2],
    pub amplitudes: [Complex64; 2],
}

impl CatState {
    pub fn amplitude_norm(&self) -> f64 {
        libm::sqrt(self.amplitudes.iter().map(|a| a.norm_sqr()).sum())
    }

    fn evolved(&self, f: &Mat) -> Result<CatState> {
        let mut out = self.clone();
        for (b, src) in out.branches.iter_mut().zip(&self.branches) {
            let (r, s) = evolve_with_matrix(&src.r, &src.sigma, f)?;
            b.r = r;
            b.sigma = s;
        }
        Ok(out)
    }
}

/// Cat after a qubit-conditioned push of duration t0: branches at
/// ±(δx/2)(1 − cos t0, −sin t0) with vacuum covariance.
pub fn create_cat(setup: &TrapSetup, t0: f64) -> Result<CatState> {
    if !(t0 >= 0.0) {
        return Err(Error::NegativeTime(t0));
    }
    let q = libm::round(t0 / FRAC_PI_2);
    let (s, c) = Dd::sincos_quarters(q as i64, Dd::new(t0) - Dd::prod(q, FRAC_PI_2));
    let (s, c) = (s.to_f64(), c.to_f64());
    let half = 0.5 * setup.branch_offset();
    let r0 = PhaseVector::xp(half * (1.0 - c), -half * s);
    let amp = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    Ok(CatState {
        branches: [
            Branch { r: r0.clone(), sigma: CovarianceMatrix::vacuum(1) },
            Branch { r: r0.scaled(-1.0), sigma: CovarianceMatrix::vacuum(1) },
        ],
        amplitudes: [amp, amp],
    })
}

/// Snapshots of the cat at the requested times of the expansion protocol.
pub fn protocol_trajectory(cat: &CatState, t_minus: f64, sample_times: &[f64]) -> Result<Vec<(f64, CatState)>> {
    let sched = ProtocolSchedule::expansion(t_minus)?;
    sample_times
        .iter()
        .map(|&t| {
            let f = sched.moment_map_at(t)?.to_mat();
            Ok((t, cat.evolved(&f)?))
        })
        .collect()
}

/// Time of maximal separation, t_− + 3π/4.
pub fn t_max(t_minus: f64) -> f64 {
    t_minus + 0.75 * PI
}

/// End of the expansion protocol, 2(π/2 + t_−).
pub fn t_final(t_minus: f64) -> f64 {
    PI + 2.0 * t_minus
}

/// Dimensionless duration of a full run: creation π, expansion
/// π + 2t_−, recombination π.
pub fn total_protocol_time(t_minus: f64) -> f64 {
    3.0 * PI + 2.0 * t_minus
}

/// Maximal dimensionless superposition Δx = √2 e^{t_−} δx.
pub fn max_superposition(delta_x: f64, t_minus: f64) -> f64 {
    core::f64::consts::SQRT_2 * libm::exp(t_minus) * delta_x
}

/// Maximal superposition in m, x0·Δx.
pub fn max_superposition_si(setup: &TrapSetup, t_minus: f64) -> f64 {
    setup.x0() * max_superposition(setup.delta_x, t_minus)
}

/// Protocol unitary under a constant force g (dimensionless).
pub fn force_protocol_unitary(g: f64, t_minus: f64) -> Result<GaussianUnitary> {
    ProtocolSchedule::expansion(t_minus)?.unitary(g)
}

/// Closed-form total displacement of the forced protocol,
/// (−2g e^{t_−}, −2g(e^{t_−} − 1)).
pub fn force_displacement(g: f64, t_minus: f64) -> PhaseVector {
    let e = libm::exp(t_minus);
    PhaseVector::xp(-2.0 * g * e, -2.0 * g * libm::expm1(t_minus))
}

/// The displacement as printed in the derivation it is usually quoted
/// from, (−2g e^{t_−}, −2g(e^{t_−} + 1)). Kept for comparison only.
pub fn force_displacement_printed(g: f64, t_minus: f64) -> PhaseVector {
    let e = libm::exp(t_minus);
    PhaseVector::xp(-2.0 * g * e, -2.0 * g * (e + 1.0))
}

/// Qubit phase 2 r_totᵀΩ r0 picked up from a total displacement.
pub fn displacement_phase(r_tot: &PhaseVector, r0: &PhaseVector) -> f64 {
    2.0 * symplectic_product(r_tot.as_slice(), r0.as_slice())
}

/// Force phase φ_f = 4 f x0 δx (e^{t_−} − 1)/(ħω), f in N.
pub fn force_phase(f: f64, setup: &TrapSetup, t_minus: f64) -> f64 {
    force_phase_dimensionless(setup.force_coupling(f), setup.delta_x, t_minus)
}

/// φ_f = 4 g δx (e^{t_−} − 1).
pub fn force_phase_dimensionless(g: f64, delta_x: f64, t_minus: f64) -> f64 {
    4.0 * g * delta_x * libm::expm1(t_minus)
}

/// Which closed form the fine-step oracle sides with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForcePhaseVerdict {
    /// Only the (e^{t_−} − 1) law agrees.
    ClosedForm,
    /// Only the printed-displacement route agrees.
    PrintedDisplacement,
    Both,
    Neither,
}

/// Side-by-side force phases from the closed-form law, the printed
/// displacement, the composed unitary and the fine-step oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcePhaseReport {
    pub closed_form: f64,
    pub printed_displacement: f64,
    pub composed: f64,
    pub oracle: f64,
    pub closed_form_rel_err: f64,
    pub printed_rel_err: f64,
    pub verdict: ForcePhaseVerdict,
}

/// Builds a [`ForcePhaseReport`]; a route "agrees" when its relative
/// distance to the oracle is below `tol`.
pub fn force_phase_report(g: f64, delta_x: f64, t_minus: f64, steps: usize, tol: f64) -> Result<ForcePhaseReport> {
    let r0 = PhaseVector::xp(delta_x, 0.0);
    let sched = ProtocolSchedule::expansion(t_minus)?;
    let hs: Vec<(QuadraticHamiltonian, f64)> = sched
        .segments
        .iter()
        .map(|&(k, d)| (QuadraticHamiltonian::with_force(k, g), d))
        .collect();
    // A state starting at the origin ends at −r_tot.
    let traj = evolve_numeric_oracle(&hs, &PhaseVector::zeros(1), &CovarianceMatrix::vacuum(1), steps)?;
    let end = &traj.last().expect("oracle records the start point").r;
    let oracle_rtot = PhaseVector::xp(-end[0], -end[1]);
    let oracle = displacement_phase(&oracle_rtot, &r0);
    let closed_form = force_phase_dimensionless(g, delta_x, t_minus);
    let printed_displacement = displacement_phase(&force_displacement_printed(g, t_minus), &r0);
    let composed = displacement_phase(&force_protocol_unitary(g, t_minus)?.displacement, &r0);
    let rel = |a: f64| {
        let den = oracle.abs().max(f64::MIN_POSITIVE);
        (a - oracle).abs() / den
    };
    let ce = rel(closed_form);
    let pe = rel(printed_displacement);
    let verdict = match (ce < tol, pe < tol) {
        (true, true) => ForcePhaseVerdict::Both,
        (true, false) => ForcePhaseVerdict::ClosedForm,
        (false, true) => ForcePhaseVerdict::PrintedDisplacement,
        (false, false) => ForcePhaseVerdict::Neither,
    };
    Ok(ForcePhaseReport {
        closed_form,
        printed_displacement,
        composed,
        oracle,
        closed_form_rel_err: ce,
        printed_rel_err: pe,
        verdict,
    })
}

/// Late-time optimum T_o^f = −ln a for a = 4 g δx ∈ (0, 1).
pub fn optimal_time_force_arg(arg: f64) -> Result<f64> {
    if !(arg > 0.0 && arg < 1.0) {
        return Err(Error::OutOfRange { name: "4 f x0 δx / ħω", value: arg });
    }
    Ok(-libm::log(arg))
}

/// T_o^f for a force f (N) acting on `setup`.
pub fn optimal_time_force(f: f64, setup: &TrapSetup) -> Result<f64> {
    optimal_time_force_arg(4.0 * setup.force_coupling(f) * setup.delta_x)
}

/// Exact solution of φ_f = 1, ln(1 + 1/a).
pub fn unit_phase_time(arg: f64) -> f64 {
    libm::log1p(1.0 / arg)
}

/// Reduced 2×2 qubit state, basis order (|+1⟩, |−1⟩).
#[derive(Clone, Debug, PartialEq)]
pub struct QubitDensity(CMat);

impl QubitDensity {
    /// Validates Hermiticity, unit trace and eigenvalues in [0, 1].
    pub fn new(m: CMat) -> Result<Self> {
        if m.dim() != 2 {
            return Err(Error::Dimension { expected: 2, got: m.dim() });
        }
        check_density(&m, 1e-12)?;
        Ok(QubitDensity(m))
    }

    pub fn plus() -> Self {
        let h = Complex64::new(0.5, 0.0);
        QubitDensity(CMat::from_fn(2, |_, _| h))
    }

    pub fn maximally_mixed() -> Self {
        QubitDensity(CMat::from_fn(2, |i, j| Complex64::new(if i == j { 0.5 } else { 0.0 }, 0.0)))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub(crate) fn from_unchecked(m: CMat) -> Self {
        QubitDensity(m)
    }
}

pub(crate) fn check_density(m: &CMat, tol: f64) -> Result<()> {
    let h = m.hermitian_defect();
    if h > tol {
        return Err(Error::NotHermitian(h));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::OutOfRange { name: "trace", value: tr.re });
    }
    let (vals, _) = m.herm_eigen();
    if vals[0] < -tol || vals[vals.len() - 1] > 1.0 + tol {
        return Err(Error::OutOfRange { name: "eigenvalue", value: vals[0] });
    }
    Ok(())
}

/// Fringe visibility 2|ρ₀₁|.
pub fn visibility(rho: &QubitDensity) -> f64 {
    2.0 * rho.0[(0, 1)].norm()
}

fn qubit_from(magnitude_exponent: f64, phase: f64) -> QubitDensity {
    let off = Complex64::from_polar(0.5 * libm::exp(-magnitude_exponent), phase);
    let half = Complex64::new(0.5, 0.0);
    QubitDensity::from_unchecked(CMat::from_fn(2, |i, j| match (i, j) {
        (0, 1) => off,
        (1, 0) => off.conj(),
        _ => half,
    }))
}

fn check_single_mode(r0: &PhaseVector, total: &GaussianUnitary) -> Result<()> {
    if r0.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: r0.dim() });
    }
    if total.modes() != 1 {
        return Err(Error::Dimension { expected: 2, got: 2 * total.modes() });
    }
    Ok(())
}

/// ρ_{jk} = ½ exp[−½(1 − jk)‖(S_tot + 1) r0‖² + i(j − k) r_totᵀΩr0].
pub fn close_interferometer(r0: &PhaseVector, total: &GaussianUnitary) -> Result<QubitDensity> {
    check_single_mode(r0, total)?;
    let w = total.s_plus_one().mul_vec(r0.as_slice());
    let m = crate::linalg::norm2_sq(&w);
    Ok(qubit_from(m, displacement_phase(&total.displacement, r0)))
}

/// Same as [`close_interferometer`] but with the branch covariance at the
/// end of the protocol given explicitly (e.g. after diffusion). The
/// off-diagonal magnitude is exp(−uᵀΩᵀσΩu) with u = (S_tot⁻¹ + 1) r0; for
/// σ = S_tot⁻¹S_tot⁻ᵀ this reduces to the closed-system formula.
pub fn close_interferometer_with_covariance(
    r0: &PhaseVector,
    total: &GaussianUnitary,
    sigma_final: &CovarianceMatrix,
) -> Result<QubitDensity> {
    check_single_mode(r0, total)?;
    let f_plus_one = symplectic_inverse(&total.s_plus_one());
    let u = f_plus_one.mul_vec(r0.as_slice());
    let w = omega(1).mul_vec(&u);
    let m = crate::linalg::dot(&w, &sigma_final.matrix().mul_vec(&w));
    Ok(qubit_from(m, displacement_phase(&total.displacement, r0)))
}
