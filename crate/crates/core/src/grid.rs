//! Time-frequency tiling of one signaling packet.
//!
//! A packet of duration `T` and two-sided bandwidth `W` is split into `N_t`
//! time slots of length `T_o` and `N_f` tones spaced `F_o` apart, with
//! `T_o * F_o = 1`, giving `N = N_t * N_f = T * W` signaling dimensions.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("channel is overspread: tau_max * 2 * nu_max = {product} (must be < 1)")]
    Overspread { product: f64 },
    #[error("grid needs at least 3 subcarriers, got {0}")]
    TooFewSubcarriers(usize),
    #[error("grid needs at least one time slot")]
    NoTimeSlots,
    #[error("number of time slots must be given explicitly (no selection rule is applied)")]
    MissingSlotCount,
    #[error("number of subcarriers must be odd for an OSTF grid, got {0}")]
    EvenSubcarriers(usize),
}

/// Dimensions and spacings of the OSTF lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDesign {
    /// Pulse duration and time shift, seconds.
    pub t_o: f64,
    /// Tone spacing, hertz.
    pub f_o: f64,
    pub n_t: usize,
    pub n_f: usize,
    pub n: usize,
    /// Two-sided bandwidth, hertz.
    pub bandwidth: f64,
    /// Packet duration, seconds.
    pub duration: f64,
    /// Critical time (and delay) sampling interval `1/W`.
    pub delta_t: f64,
    /// Critical frequency (and Doppler) sampling interval `1/T`.
    pub delta_f: f64,
}

/// Continuous optimum `(T_o, F_o)` that balances delay and Doppler
/// interference: `T_o / F_o = tau_max / (2 nu_max)` with `T_o F_o = 1`.
pub fn optimal_shifts(tau_max: f64, nu_max: f64) -> (f64, f64) {
    let t_o = (tau_max / (2.0 * nu_max)).sqrt();
    (t_o, 1.0 / t_o)
}

/// Nearest odd integer to `x` (ties resolved upward).
fn nearest_odd(x: f64) -> usize {
    let k = ((x - 1.0) / 2.0).round().max(0.0);
    2 * k as usize + 1
}

fn positive(name: &'static str, value: f64) -> Result<(), GridError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GridError::NonPositive { name, value })
    }
}

/// Designs the OSTF grid for a channel with spreads `(tau_max, nu_max)` over
/// bandwidth `bandwidth`.
///
/// The tone count is snapped to the odd integer nearest `W / F_o`, after which
/// `F_o = W / N_f` and `T_o = 1 / F_o` hold exactly. The slot count must be
/// supplied through `n_t_hint`.
pub fn design_grid(
    tau_max: f64,
    nu_max: f64,
    bandwidth: f64,
    n_t_hint: Option<usize>,
) -> Result<GridDesign, GridError> {
    positive("tau_max", tau_max)?;
    positive("nu_max", nu_max)?;
    positive("bandwidth", bandwidth)?;
    let product = tau_max * 2.0 * nu_max;
    if product >= 1.0 {
        return Err(GridError::Overspread { product });
    }
    let (_, f_opt) = optimal_shifts(tau_max, nu_max);
    let n_f = nearest_odd(bandwidth / f_opt);
    if n_f < 3 {
        return Err(GridError::TooFewSubcarriers(n_f));
    }
    let n_t = n_t_hint.ok_or(GridError::MissingSlotCount)?;
    GridDesign::from_counts(n_t, n_f, bandwidth)
}

impl GridDesign {
    /// Builds a grid directly from slot and tone counts. `n_f` must be odd.
    pub fn from_counts(n_t: usize, n_f: usize, bandwidth: f64) -> Result<Self, GridError> {
        if n_f.is_multiple_of(2) {
            return Err(GridError::EvenSubcarriers(n_f));
        }
        Self::build(n_t, n_f, bandwidth)
    }

    fn build(n_t: usize, n_f: usize, bandwidth: f64) -> Result<Self, GridError> {
        positive("bandwidth", bandwidth)?;
        if n_t < 1 {
            return Err(GridError::NoTimeSlots);
        }
        if n_f < 1 {
            return Err(GridError::TooFewSubcarriers(n_f));
        }
        let f_o = bandwidth / n_f as f64;
        let t_o = 1.0 / f_o;
        let n = n_t * n_f;
        let duration = n_t as f64 * t_o;
        Ok(Self {
            t_o,
            f_o,
            n_t,
            n_f,
            n,
            bandwidth,
            duration,
            delta_t: 1.0 / bandwidth,
            delta_f: 1.0 / duration,
        })
    }

    /// OFDM special case: one slot spanning the packet, `N` tones.
    ///
    /// Tone-count parity is not enforced here.
    pub fn ofdm(&self) -> Self {
        let f_o = self.bandwidth / self.n as f64;
        Self {
            t_o: self.duration,
            f_o,
            n_t: 1,
            n_f: self.n,
            n: self.n,
            bandwidth: self.bandwidth,
            duration: self.duration,
            delta_t: self.delta_t,
            delta_f: self.delta_f,
        }
    }

    /// Half-width of the symmetric tone index range, `(N_f - 1) / 2`.
    pub fn half_tones(&self) -> usize {
        (self.n_f - 1) / 2
    }

    /// Physical tone index for storage index `m` in `0..N_f`: indices above
    /// the half-width wrap to negative tones.
    pub fn physical_tone(&self, m: usize) -> i64 {
        if m <= self.half_tones() {
            m as i64
        } else {
            m as i64 - self.n_f as i64
        }
    }

    /// Column index of slot `n`, tone `m` in the column-stacked symbol vector.
    #[inline]
    pub fn vec_index(&self, n: usize, m: usize) -> usize {
        n + m * self.n_t
    }
}

/// Ofdm wrapper matching the free-function style of [`design_grid`].
pub fn ofdm_grid(grid: &GridDesign) -> GridDesign {
    grid.ofdm()
}
