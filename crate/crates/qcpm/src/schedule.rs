//! Closed-form time schedules for the annealing run: the endpoint-flat gauge
//! g(t), the interpolation mu(t), the width parameter h(t), the kinetic
//! ratio theta(t), the slowness eta, and the Fourier truncation rule.

use crate::error::{Error, Result};

/// Which formula supplies `h` as a function of `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HMode {
    /// `h = gamma^2 mu^2 / (2 R1 (sqrt(nbar)/2 + 3 ln(2/delta)/4))`.
    Algorithm1,
    /// `h = mu^2 / (sqrt(2 (nbar - 2)) R1)`; the dimension here is the
    /// original `m + n = nbar - 2`, so this mode needs `nbar >= 3`.
    Proposition2,
}

impl HMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            HMode::Algorithm1 => "algorithm1",
            HMode::Proposition2 => "proposition2",
        }
    }
}

/// Smooth bump `exp(-1/(t (1 - t)))` on (0, 1), zero elsewhere.
fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let d = t * (1.0 - t);
    (-1.0 / d).exp()
}

fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(
    f: fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integrate the bump over `[a, b] ⊆ [0, 1]` to absolute tolerance `tol`.
fn bump_integral(a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (bump(a), bump(m), bump(b));
    let whole = simpson(fa, fm, fb, b - a);
    adaptive_simpson(bump, a, b, fa, fm, fb, whole, tol, 48)
}

/// Normalization constant `c_e = ∫_0^1 exp(-1/(t(1-t))) dt`, computed once
/// to 1e-14 absolute.
pub fn c_e() -> f64 {
    // split at the symmetry point for an exactly symmetric evaluation
    bump_integral(0.0, 0.5, 5e-15) + bump_integral(0.5, 1.0, 5e-15)
}

/// Slowness parameter `eta = 1 / ln(8 C / delta)`.
pub fn eta_choice(delta: f64, c_adiabatic: f64) -> Result<f64> {
    let arg = 8.0 * c_adiabatic / delta;
    if arg <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "8 C / delta = {arg} <= 1; eta undefined"
        )));
    }
    Ok(1.0 / arg.ln())
}

/// Spectral truncation number `n = ceil(2 (ln(4/eta_err)/ln(1/r) - 1))`,
/// clamped at 0; guarantees truncation error `2 r^(n/2 + 1) <= eta_err`.
pub fn fourier_truncation(eta_err: f64, r: f64) -> Result<usize> {
    if !(0.0 < eta_err && eta_err < 1.0) {
        return Err(Error::InvalidParameter("eta_err must be in (0, 1)".into()));
    }
    if !(0.0 < r && r < 0.5) {
        return Err(Error::InvalidParameter("r must be in (0, 1/2)".into()));
    }
    let raw = 2.0 * ((4.0 / eta_err).ln() / (1.0 / r).ln() - 1.0);
    Ok(raw.ceil().max(0.0) as usize)
}

/// All schedule parameters for one annealing run.
#[derive(Debug, Clone)]
pub struct AdiabaticSchedule {
    pub mu_f: f64,
    pub gamma: f64,
    pub delta: f64,
    pub eta: f64,
    pub c_adiabatic: f64,
    pub r1: f64,
    pub nbar: usize,
    pub c_e: f64,
    pub h_mode: HMode,
}

impl AdiabaticSchedule {
    pub fn new(
        mu_f: f64,
        gamma: f64,
        delta: f64,
        r1: f64,
        nbar: usize,
        c_adiabatic: f64,
        h_mode: HMode,
    ) -> Result<Self> {
        if !(0.0 < mu_f && mu_f < 1.0) {
            return Err(Error::InvalidParameter("mu_f must be in (0, 1)".into()));
        }
        if !(0.0 < gamma && gamma < 1.0) || !(0.0 < delta && delta < 1.0) {
            return Err(Error::InvalidParameter(
                "gamma and delta must be in (0, 1)".into(),
            ));
        }
        if r1 <= 0.0 || c_adiabatic <= 0.0 {
            return Err(Error::InvalidParameter(
                "R1 and C must be positive".into(),
            ));
        }
        if h_mode == HMode::Proposition2 && nbar < 3 {
            return Err(Error::InvalidParameter(
                "proposition2 h-mode needs nbar >= 3".into(),
            ));
        }
        let eta = eta_choice(delta, c_adiabatic)?;
        Ok(AdiabaticSchedule {
            mu_f,
            gamma,
            delta,
            eta,
            c_adiabatic,
            r1,
            nbar,
            c_e: c_e(),
            h_mode,
        })
    }

    /// Normalized gauge `g(t) = c_e^{-1} ∫_0^t exp(-1/(tau(1-tau))) dtau`.
    /// Errors outside [0, 1].
    pub fn g(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("t = {t} outside [0, 1]")));
        }
        Ok(self.g_clamped(t))
    }

    /// Smooth extension of `g` by constancy outside [0, 1]; used by the
    /// endpoint-flatness finite-difference checks.
    pub fn g_clamped(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        // integrate over the shorter side for symmetric accuracy
        if t <= 0.5 {
            bump_integral(0.0, t, 1e-13) / self.c_e
        } else {
            1.0 - bump_integral(t, 1.0, 1e-13) / self.c_e
        }
    }

    /// `mu(t) = 1 - (1 - mu_f) g(t)`, extended by constancy outside [0, 1].
    pub fn mu_of_t(&self, t: f64) -> f64 {
        1.0 - (1.0 - self.mu_f) * self.g_clamped(t)
    }

    /// Closed-form derivative `mu'(t) = -(1 - mu_f) g'(t)`.
    pub fn mu_dot(&self, t: f64) -> f64 {
        -(1.0 - self.mu_f) * bump(t) / self.c_e
    }

    /// `h` as a function of `mu`, per the configured mode.
    pub fn h_at_mu(&self, mu: f64) -> f64 {
        match self.h_mode {
            HMode::Algorithm1 => {
                let nbar = self.nbar as f64;
                let denom =
                    2.0 * self.r1 * (nbar.sqrt() / 2.0 + 0.75 * (2.0 / self.delta).ln());
                self.gamma * self.gamma * mu * mu / denom
            }
            HMode::Proposition2 => {
                let mn = (self.nbar - 2) as f64;
                mu * mu / ((2.0 * mn).sqrt() * self.r1)
            }
        }
    }

    pub fn h_of_t(&self, t: f64) -> f64 {
        self.h_at_mu(self.mu_of_t(t))
    }

    /// Kinetic ratio `theta(t) = h(t) / mu(t)`.
    pub fn theta(&self, t: f64) -> f64 {
        self.h_of_t(t) / self.mu_of_t(t)
    }
}
