//! LOS-only and updated channel estimators.
//!
//! The LOS-only estimate of user `j` is `ĥ̄_j = β̄·α(φ_k)`, where `β̄` is the
//! projection `β_{t,l}` averaged over the user's pilots across subframes.
//! The updated estimate adds an MMSE estimate of the NLOS part, obtained by
//! detecting the data coherently with `ĥ̄`, cancelling the reconstructed LOS
//! contribution and regressing the residual on the detected symbols.

use ndarray::{s, Array1};
use num_complex::Complex64;

use crate::airlink::{qam4, HoppingCodebook};
use crate::error::{Error, Result};
use crate::identify::{IdentificationReport, ProjectionTable};
use crate::linalg::{frobenius, hermitian_defect, hermitian_transpose, norm_sqr, CMatrix, CVector, Lu};

/// Condition-number limit for the MMSE system.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct LosEstimate {
    pub user: usize,
    pub candidate: usize,
    pub beta_bar: Complex64,
    /// Unit-norm steering vector of the bound angle.
    pub steering: CVector,
    /// `ĥ̄ = β̄·α`.
    pub h_bar_hat: CVector,
}

/// `β̄ = (1/U) Σ_t β_{t,l_t}` along the user's pattern, `ĥ̄ = β̄·α(φ_k)`.
pub fn los_estimate(
    table: &ProjectionTable,
    report: &IdentificationReport,
    codebook: &HoppingCodebook,
    user: usize,
) -> Result<LosEstimate> {
    let k = report
        .find(user)
        .and_then(|m| m.candidate)
        .ok_or(Error::NotIdentified(user))?;
    let pilots = codebook.pattern(user);
    let sum: Complex64 = pilots.iter().enumerate().map(|(t, &l)| table.get(k, t, l)).sum();
    let beta_bar = sum / pilots.len() as f64;
    let steering = table.steering[k].clone();
    let h_bar_hat = steering.mapv(|z| z * beta_bar);
    Ok(LosEstimate {
        user,
        candidate: k,
        beta_bar,
        steering,
        h_bar_hat,
    })
}

/// Nearest unit-power 4-QAM point; zero components go to the positive side.
#[inline]
pub fn slice_qam4(z: Complex64) -> Complex64 {
    let bits = u8::from(z.re < 0.0) | (u8::from(z.im < 0.0) << 1);
    qam4(bits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedData {
    /// `G × τ` matched-filter outputs.
    pub soft: CMatrix,
    /// `soft` sliced to 4-QAM.
    pub hard: CMatrix,
}

/// `x̂_j = ĥ̄_jᴴ Y / (|β̄_j|² √p_t)` for each LOS estimate, stacked by row.
pub fn coherent_detect(y_data: &CMatrix, los: &[LosEstimate], power: f64) -> Result<DetectedData> {
    if !(power > 0.0) {
        return Err(Error::invalid("transmit power must be > 0"));
    }
    let m = y_data.nrows();
    let tau = y_data.ncols();
    let mut soft = CMatrix::zeros((los.len(), tau));
    for (row, est) in los.iter().enumerate() {
        if est.h_bar_hat.len() != m {
            return Err(Error::invalid("LOS estimate length differs from the antenna count"));
        }
        let amp2 = est.beta_bar.norm_sqr();
        if amp2 == 0.0 {
            return Err(Error::DegenerateEstimate(est.user));
        }
        let scale = 1.0 / (amp2 * power.sqrt());
        let hh = est.h_bar_hat.mapv(|z| z.conj());
        let out = hh.dot(y_data).mapv(|z| z * scale);
        soft.row_mut(row).assign(&out);
    }
    let hard = soft.mapv(slice_qam4);
    Ok(DetectedData { soft, hard })
}

fn stack_los(los: &[LosEstimate], m: usize) -> CMatrix {
    let mut h = CMatrix::zeros((m, los.len()));
    for (col, est) in los.iter().enumerate() {
        h.column_mut(col).assign(&est.h_bar_hat);
    }
    h
}

/// `Ỹ = Y − Ĥ̄ √p_t X̂`.
pub fn residual(y_data: &CMatrix, los: &[LosEstimate], x_hat: &CMatrix, power: f64) -> Result<CMatrix> {
    let g = los.len();
    let tau = y_data.ncols();
    if x_hat.nrows() != g || x_hat.ncols() != tau {
        return Err(Error::invalid(format!(
            "detected data is {}x{}, expected {g}x{tau}",
            x_hat.nrows(),
            x_hat.ncols()
        )));
    }
    if tau <= g {
        return Err(Error::invalid(format!(
            "need more data symbols than users (tau = {tau}, G = {g})"
        )));
    }
    let h = stack_los(los, y_data.nrows());
    Ok(y_data - &h.dot(x_hat).mapv(|z| z * power.sqrt()))
}

#[derive(Debug, Clone)]
pub struct NlosEstimate {
    /// `M × G`, column `j` is `ĥ̃_j`.
    pub h: CMatrix,
    /// One-norm condition number of the solved `G × G` system.
    pub condition: f64,
}

/// MMSE estimate `Ĥ̃ = Ỹ (√p X̂)ᴴ (p X̂ X̂ᴴ + σ_w² R_v⁻¹)⁻¹`.
///
/// Evaluated without inverting anything as `Ĥ̃ (A R_v + σ² I) = B R_v` with
/// `A = p X̂X̂ᴴ` and `B = Ỹ(√p X̂)ᴴ`, which is algebraically the same
/// expression and stays defined when a user's NLOS variance is zero. With
/// `σ² = 0` the regularizer vanishes and the system is `Ĥ̃ A = B`.
pub fn mmse_nlos(
    residual: &CMatrix,
    x_hat: &CMatrix,
    power: f64,
    noise_var: f64,
    r_v: &CMatrix,
) -> Result<NlosEstimate> {
    let g = x_hat.nrows();
    let tau = x_hat.ncols();
    if residual.ncols() != tau {
        return Err(Error::invalid("residual and detected data have different lengths"));
    }
    if r_v.nrows() != g || r_v.ncols() != g {
        return Err(Error::invalid(format!("R_v must be {g}x{g}")));
    }
    if tau <= g {
        return Err(Error::invalid(format!(
            "need more data symbols than users (tau = {tau}, G = {g})"
        )));
    }
    if !(power > 0.0) || !(noise_var >= 0.0) {
        return Err(Error::invalid("power must be > 0 and noise variance >= 0"));
    }
    if hermitian_defect(r_v.view()) > 1e-10 * frobenius(r_v.view()).max(1e-300) {
        return Err(Error::invalid("R_v is not Hermitian"));
    }
    let sqrt_p = power.sqrt();
    let xh = hermitian_transpose(x_hat.view());
    let b = residual.dot(&xh).mapv(|z| z * sqrt_p);
    let a = x_hat.dot(&xh).mapv(|z| z * power);
    let (system, rhs) = if noise_var == 0.0 {
        (a, b)
    } else {
        let mut s = a.dot(r_v);
        for i in 0..g {
            s[[i, i]] += noise_var;
        }
        (s, b.dot(r_v))
    };
    // Ĥ̃ S = rhs  ⇔  Sᴴ Ĥ̃ᴴ = rhsᴴ.
    let lu = Lu::new(hermitian_transpose(system.view()).view()).map_err(|_| Error::IllConditioned(f64::INFINITY))?;
    let condition = lu.condition();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let hh = lu.solve(hermitian_transpose(rhs.view()).view());
    Ok(NlosEstimate {
        h: hermitian_transpose(hh.view()),
        condition,
    })
}

/// `Ẽ = Ĥ̃ − H̃`.
pub fn estimation_error(estimate: &CMatrix, truth: &CMatrix) -> CMatrix {
    estimate - truth
}

/// Genie `R_v = diag(g_j²/(κ_j+1))` from the users' NLOS variances.
pub fn genie_rv(nlos_variances: &[f64]) -> CMatrix {
    CMatrix::from_diag(&Array1::from_iter(
        nlos_variances.iter().map(|&v| Complex64::new(v, 0.0)),
    ))
}

/// Diagonal `R_v` estimated from the residual: the per-element energy of
/// the least-squares projection `Ỹ x̂_j*/(τ√p)` less its noise share
/// `σ²/(τ p)`, floored at zero.
pub fn estimated_rv(residual: &CMatrix, x_hat: &CMatrix, power: f64, noise_var: f64) -> CMatrix {
    let m = residual.nrows() as f64;
    let tau = x_hat.ncols() as f64;
    let xh = hermitian_transpose(x_hat.view());
    let ls = residual.dot(&xh).mapv(|z| z / (tau * power.sqrt()));
    let vars: Vec<f64> = ls
        .columns()
        .into_iter()
        .map(|c| (norm_sqr(c) / m - noise_var / (tau * power)).max(0.0))
        .collect();
    genie_rv(&vars)
}

/// `‖ĥ − h‖² / ‖h‖²`.
pub fn nmse(h_hat: &CVector, h_true: &CVector) -> Result<f64> {
    if h_hat.len() != h_true.len() {
        return Err(Error::invalid("NMSE operands differ in length"));
    }
    let den = norm_sqr(h_true.view());
    if den == 0.0 {
        return Err(Error::invalid("NMSE of a zero channel is undefined"));
    }
    Ok(norm_sqr((h_hat - h_true).view()) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detection {
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RvMode {
    Genie,
    Estimated,
}

/// One subframe of the updated estimator for every LOS-estimated user.
#[derive(Debug, Clone)]
pub struct SubframeUpdate {
    pub detected: DetectedData,
    pub residual: CMatrix,
    pub nlos: NlosEstimate,
    /// `ĥ_j = ĥ̄_j + ĥ̃_j`, column per user.
    pub updated: CMatrix,
}

/// Detection, cancellation and MMSE on the first `tau` data columns of one
/// subframe. `nlos_variances` is used in genie mode only.
#[allow(clippy::too_many_arguments)]
pub fn update_subframe(
    y_data: &CMatrix,
    los: &[LosEstimate],
    tau: usize,
    power: f64,
    noise_var: f64,
    detection: Detection,
    rv_mode: RvMode,
    nlos_variances: &[f64],
) -> Result<SubframeUpdate> {
    if tau > y_data.ncols() {
        return Err(Error::invalid(format!(
            "tau = {tau} exceeds the {} data symbols per subframe",
            y_data.ncols()
        )));
    }
    let y = y_data.slice(s![.., ..tau]).to_owned();
    let detected = coherent_detect(&y, los, power)?;
    let x_hat = match detection {
        Detection::Hard => &detected.hard,
        Detection::Soft => &detected.soft,
    };
    let res = residual(&y, los, x_hat, power)?;
    let r_v = match rv_mode {
        RvMode::Genie => genie_rv(nlos_variances),
        RvMode::Estimated => estimated_rv(&res, x_hat, power, noise_var),
    };
    let nlos = mmse_nlos(&res, x_hat, power, noise_var, &r_v)?;
    let updated = stack_los(los, y.nrows()) + &nlos.h;
    Ok(SubframeUpdate {
        detected,
        residual: res,
        nlos,
        updated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::{build_pilot_book, despread, synthesize_superframe, FrameParams};
    use crate::channel::{ArrayGeometry, UserProfile};
    use crate::identify::identify_users;
    use crate::rng::{complex_normal, stream, Purpose};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Gauss-Jordan inverse, kept separate from the LU path under test.
    fn gj_inverse(a: &CMatrix) -> CMatrix {
        let n = a.nrows();
        let mut aug = CMatrix::zeros((n, 2 * n));
        aug.slice_mut(s![.., ..n]).assign(a);
        for i in 0..n {
            aug[[i, n + i]] = c(1.0, 0.0);
        }
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| aug[[x, col]].norm().total_cmp(&aug[[y, col]].norm()))
                .unwrap();
            for k in 0..2 * n {
                aug.swap([col, k], [piv, k]);
            }
            let d = aug[[col, col]];
            for k in 0..2 * n {
                aug[[col, k]] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = aug[[r, col]];
                    for k in 0..2 * n {
                        let v = aug[[col, k]];
                        aug[[r, k]] -= f * v;
                    }
                }
            }
        }
        aug.slice(s![.., n..]).to_owned()
    }

    /// Direct evaluation with explicit inverses.
    fn mmse_direct(res: &CMatrix, x: &CMatrix, p: f64, s2: f64, rv: &CMatrix) -> CMatrix {
        let xh = hermitian_transpose(x.view());
        let gram = x.dot(&xh).mapv(|z| z * p) + gj_inverse(rv).mapv(|z| z * s2);
        res.dot(&xh.mapv(|z| z * p.sqrt())).dot(&gj_inverse(&gram))
    }

    fn random_qam(g: usize, tau: usize, seed: u64) -> CMatrix {
        let mut rng = stream(seed, Purpose::Test, &[1]);
        CMatrix::from_shape_fn((g, tau), |_| slice_qam4(complex_normal(&mut rng)))
    }

    fn random_matrix(r: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = stream(seed, Purpose::Test, &[2]);
        CMatrix::from_shape_fn((r, cols), |_| complex_normal(&mut rng))
    }

    #[test]
    fn nmse_examples() {
        let h = CVector::from(vec![c(1.0, 2.0), c(-0.5, 0.1)]);
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        assert!((nmse(&CVector::zeros(2), &h).unwrap() - 1.0).abs() < 1e-15);
        assert!((nmse(&h.mapv(|z| z * 2.0), &h).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmse(&h, &CVector::zeros(2)).is_err());
    }

    #[test]
    fn slicer_and_degenerate_detection() {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(slice_qam4(c(0.0, 0.0)), c(a, a));
        assert_eq!(slice_qam4(c(-0.2, 0.3)), c(-a, a));
        for bits in 0..4 {
            assert_eq!(slice_qam4(qam4(bits)), qam4(bits));
        }
        let los = LosEstimate {
            user: 0,
            candidate: 0,
            beta_bar: c(2.0, 0.0),
            steering: CVector::from_elem(4, c(0.5, 0.0)),
            h_bar_hat: CVector::from_elem(4, c(1.0, 0.0)),
        };
        let det = coherent_detect(&CMatrix::zeros((4, 3)), std::slice::from_ref(&los), 1.0).unwrap();
        assert!(det.soft.iter().all(|z| z.norm() == 0.0));
        assert!(det.hard.iter().all(|z| *z == c(a, a)));
        let zero = LosEstimate {
            beta_bar: c(0.0, 0.0),
            ..los
        };
        assert!(matches!(
            coherent_detect(&CMatrix::zeros((4, 3)), &[zero], 1.0),
            Err(Error::DegenerateEstimate(0))
        ));
    }

    #[test]
    fn residual_needs_more_symbols_than_users() {
        let los: Vec<LosEstimate> = (0..2)
            .map(|u| LosEstimate {
                user: u,
                candidate: u,
                beta_bar: c(1.0, 0.0),
                steering: CVector::zeros(3),
                h_bar_hat: CVector::zeros(3),
            })
            .collect();
        let y = CMatrix::zeros((3, 2));
        assert!(residual(&y, &los, &CMatrix::zeros((2, 2)), 1.0).is_err());
    }

    #[test]
    fn perturbing_one_symbol_changes_one_column() {
        let m = 5;
        let tau = 6;
        let los: Vec<LosEstimate> = (0..2)
            .map(|u| {
                let h = random_matrix(m, 1, 30 + u as u64).column(0).to_owned();
                LosEstimate {
                    user: u,
                    candidate: u,
                    beta_bar: c(1.0, 0.0),
                    steering: h.clone(),
                    h_bar_hat: h,
                }
            })
            .collect();
        let y = random_matrix(m, tau, 3);
        let x = random_qam(2, tau, 4);
        let p: f64 = 2.0;
        let base = residual(&y, &los, &x, p).unwrap();
        let mut x2 = x.clone();
        let dx = c(-0.3, 0.9);
        x2[[1, 4]] += dx;
        let pert = residual(&y, &los, &x2, p).unwrap();
        let diff = &base - &pert;
        for col in 0..tau {
            let expect: CVector = if col == 4 {
                los[1].h_bar_hat.mapv(|z| z * p.sqrt() * dx)
            } else {
                CVector::zeros(m)
            };
            assert!(norm_sqr((&diff.column(col) - &expect).view()) < 1e-24, "col {col}");
        }
    }

    #[test]
    fn mmse_matches_direct_inverse() {
        for seed in 0..20u64 {
            let g = 1 + (seed as usize % 6);
            let tau = g + 3 + (seed as usize * 7) % 40;
            let m = 2 + (seed as usize * 5) % 20;
            let x = random_qam(g, tau, seed);
            let res = random_matrix(m, tau, seed + 100);
            let mut rng = stream(seed, Purpose::Test, &[3]);
            let f = CMatrix::from_shape_fn((g, g), |_| complex_normal(&mut rng));
            let rv = f.dot(&hermitian_transpose(f.view())) + CMatrix::eye(g) * c(0.5, 0.0);
            let (p, s2) = (1.7, 0.3);
            let fast = mmse_nlos(&res, &x, p, s2, &rv).unwrap().h;
            let slow = mmse_direct(&res, &x, p, s2, &rv);
            let rel = frobenius((&fast - &slow).view()) / frobenius(slow.view());
            assert!(rel < 1e-10, "seed {seed}: {rel}");
        }
    }

    #[test]
    fn mmse_zero_residual_and_noiseless_limit() {
        let (g, tau, m) = (3, 12, 6);
        let x = random_qam(g, tau, 8);
        let rv = genie_rv(&[0.2, 0.1, 0.05]);
        let est = mmse_nlos(&CMatrix::zeros((m, tau)), &x, 1.0, 0.5, &rv).unwrap();
        assert!(est.h.iter().all(|z| z.norm() == 0.0));

        // Residual generated exactly by H̃ √p X: the σ² → 0 limit returns H̃.
        let h = random_matrix(m, g, 9);
        let p: f64 = 3.0;
        let res = h.dot(&x).mapv(|z| z * p.sqrt());
        let est = mmse_nlos(&res, &x, p, 0.0, &rv).unwrap();
        assert!(frobenius((&est.h - &h).view()) <= 1e-6 * frobenius(h.view()));
        let est = mmse_nlos(&res, &x, p, 1e-12, &rv).unwrap();
        assert!(frobenius((&est.h - &h).view()) <= 1e-6 * frobenius(h.view()));
    }

    #[test]
    fn mmse_zero_variance_user_gets_zero_estimate() {
        let (g, tau, m) = (2, 10, 4);
        let x = random_qam(g, tau, 10);
        let res = random_matrix(m, tau, 11);
        let est = mmse_nlos(&res, &x, 1.0, 0.1, &genie_rv(&[0.0, 0.3])).unwrap();
        assert!(norm_sqr(est.h.column(0)) < 1e-24 * norm_sqr(est.h.column(1)));
        assert!(norm_sqr(est.h.column(1)) > 0.0);
    }

    #[test]
    fn mmse_rejects_rank_deficient_noiseless_system() {
        let (g, tau, m) = (2, 6, 3);
        let mut x = random_qam(g, tau, 12);
        let row0 = x.row(0).to_owned();
        x.row_mut(1).assign(&row0);
        let res = random_matrix(m, tau, 13);
        assert!(matches!(
            mmse_nlos(&res, &x, 1.0, 0.0, &genie_rv(&[1.0, 1.0])),
            Err(Error::IllConditioned(_))
        ));
    }

    fn los_frame(
        kappa: f64,
        noise_var: f64,
    ) -> (
        crate::airlink::SuperframeRealization,
        Vec<LosEstimate>,
        Vec<UserProfile>,
    ) {
        let m = 32;
        let geometry = ArrayGeometry::ula(m, 0.5).unwrap();
        let pop = vec![
            UserProfile::new(0, 0.9, kappa, 0.7).unwrap(),
            UserProfile::new(1, 0.4, kappa, 1.9).unwrap(),
        ];
        let cb = crate::airlink::HoppingCodebook::from_patterns(4, 3, vec![vec![0, 1, 2], vec![3, 2, 1]]).unwrap();
        let book = build_pilot_book(4).unwrap();
        let params = FrameParams {
            geometry,
            subframes: 3,
            data_len: 20,
            noise_var,
            power: 1.0,
        };
        let f = synthesize_superframe(&pop, &[0, 1], &cb, &book, &params, 4, 0).unwrap();
        let d = despread(&f.y_pilot, &book, 1.0).unwrap();
        let angles = [0.7, 1.9];
        let (table, _, report) = identify_users(&d, &angles, &geometry, &cb).unwrap();
        assert_eq!(report.users(), vec![0, 1]);
        let los = report
            .matches
            .iter()
            .map(|mm| los_estimate(&table, &report, &cb, mm.user).unwrap())
            .collect();
        (f, los, pop)
    }

    #[test]
    fn los_only_and_updated_are_exact_in_the_los_limit() {
        let (f, los, pop) = los_frame(f64::INFINITY, 0.0);
        for (g, est) in los.iter().enumerate() {
            let truth = &f.channels[0][g].h;
            assert!(nmse(&est.h_bar_hat, truth).unwrap() < 1e-18);
            assert!((est.beta_bar.norm_sqr() - norm_sqr(est.h_bar_hat.view())).abs() < 1e-12);
        }
        let vars: Vec<f64> = pop.iter().map(|p| p.nlos_variance()).collect();
        for t in 0..3 {
            let up = update_subframe(&f.y_data[t], &los, 12, 1.0, 0.0, Detection::Hard, RvMode::Genie, &vars).unwrap();
            // Exact detection and zero residual.
            assert_eq!(up.detected.hard, f.symbols[t].slice(s![.., ..12]).to_owned());
            assert!(frobenius(up.residual.view()) < 1e-12);
            for g in 0..2 {
                let col = up.updated.column(g).to_owned();
                assert!(nmse(&col, &f.channels[t][g].h).unwrap() < 1e-12);
                // Updated = LOS-only + NLOS estimate.
                let sum = &los[g].h_bar_hat + &up.nlos.h.column(g);
                assert_eq!(col, sum);
            }
        }
    }

    #[test]
    fn residual_is_noise_with_perfect_cancellation() {
        let (f, los, _) = los_frame(f64::INFINITY, 0.2);
        // Use the true LOS channels and symbols: Ỹ = W exactly.
        let truth: Vec<LosEstimate> = los
            .iter()
            .enumerate()
            .map(|(g, e)| LosEstimate {
                beta_bar: c(1.0, 0.0),
                h_bar_hat: f.channels[0][g].h_los.clone(),
                ..e.clone()
            })
            .collect();
        let res = residual(&f.y_data[1], &truth, &f.symbols[1], 1.0).unwrap();
        assert!(frobenius((&res - &f.noise_data[1]).view()) < 1e-12);
    }

    #[test]
    fn los_estimate_requires_identification() {
        let (f, _, _) = los_frame(f64::INFINITY, 0.0);
        let _ = f;
        let cb = crate::airlink::HoppingCodebook::from_patterns(4, 1, vec![vec![0], vec![1]]).unwrap();
        let table = ProjectionTable {
            angles: vec![],
            steering: vec![],
            beta: vec![],
        };
        let report = crate::identify::match_patterns(&[], &cb, &table);
        assert_eq!(los_estimate(&table, &report, &cb, 1), Err(Error::NotIdentified(1)));
    }

    #[test]
    fn averaging_identity() {
        let cb = crate::airlink::HoppingCodebook::from_patterns(2, 3, vec![vec![1, 0, 1]]).unwrap();
        let b = c(0.3, -0.4);
        let mut beta = CMatrix::zeros((3, 2));
        for (t, &l) in cb.pattern(0).iter().enumerate() {
            beta[[t, l]] = b;
        }
        let table = ProjectionTable {
            angles: vec![1.0],
            steering: vec![CVector::from_elem(2, c(0.5f64.sqrt(), 0.0))],
            beta: vec![beta],
        };
        let pats = vec![crate::identify::extract_pattern(&table, 0)];
        let report = crate::identify::match_patterns(&pats, &cb, &table);
        let est = los_estimate(&table, &report, &cb, 0).unwrap();
        assert!((est.beta_bar - b).norm() < 1e-15);
    }
}
