//! Controllable-canonical realizations of `G_s`, `G_p`, `G_q` and their
//! frequency responses.
//!
//! States are ordered by ascending power: the transfer function from the
//! input to state `i` is `s^i / d(s)`. `A` carries the negated denominator in
//! its last row, `B = e_k`, and `C` lists remainder coefficients in ascending
//! order. The Toeplitz bands act in the descending `s_{m+n-1}` basis, so
//! their column-reversed form (`x_map`, `y_map`) is what perturbs `C`.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::{convolve_slices, is_strictly_hurwitz, toeplitz_band, Controller, IntervalPlant, Polynomial};

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `(C + dc)(sI - A)^{-1} B + D` by LU solve.
    pub fn eval_at(&self, s: Complex64, delta_row: Option<&RowDVector<f64>>) -> Result<Complex64> {
        let k = self.order();
        let mut m = self.a.map(|v| Complex64::new(-v, 0.0));
        for i in 0..k {
            m[(i, i)] += s;
        }
        let rhs = self.b.map(|v| Complex64::new(v, 0.0));
        let z = m.lu().solve(&rhs).ok_or(Error::Singular(s.im))?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(s.im));
        }
        let mut out = Complex64::new(self.d, 0.0);
        for i in 0..k {
            let mut ci = self.c[i];
            if let Some(dr) = delta_row {
                ci += dr[i];
            }
            out += z[i] * ci;
        }
        Ok(out)
    }
}

/// Response at `s = j omega`.
pub fn freq_response(ss: &StateSpace, delta_row: Option<&RowDVector<f64>>, omega: f64) -> Result<Complex64> {
    if !omega.is_finite() || omega < 0.0 {
        return Err(Error::InvalidFrequency(format!("omega = {omega}")));
    }
    ss.eval_at(Complex64::new(0.0, omega), delta_row)
}

/// Companion pair `(A, B)` for a monic denominator of degree `k`.
pub fn companion(den: &Polynomial) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if !den.is_monic() {
        return Err(Error::DegenerateInput("denominator must be monic".into()));
    }
    let k = den.degree();
    let c = den.coeffs();
    let mut a = DMatrix::zeros(k, k);
    for i in 0..k.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..k {
        a[(k - 1, j)] = -c[k - j];
    }
    let mut b = DVector::zeros(k);
    if k > 0 {
        b[k - 1] = 1.0;
    }
    Ok((a, b))
}

/// Feedthrough and ascending-order output row for `num / den`.
pub(crate) fn output_row(num: &[f64], den: &[f64]) -> (f64, Vec<f64>) {
    let k = den.len() - 1;
    let d = num[0];
    let c = (0..k).map(|i| num[k - i] - d * den[k - i]).collect();
    (d, c)
}

pub fn realize_canonical(num: &Polynomial, den: &Polynomial) -> Result<StateSpace> {
    let (a, b) = companion(den)?;
    let num = num.trimmed();
    if num.degree() > den.degree() && !num.is_zero() {
        return Err(Error::Dimension(format!(
            "improper transfer function: numerator degree {} exceeds {}",
            num.degree(),
            den.degree()
        )));
    }
    let padded = num.padded(den.coeffs().len())?;
    let (d, c) = output_row(padded.coeffs(), den.coeffs());
    Ok(StateSpace {
        a,
        b,
        c: RowDVector::from_vec(c),
        d,
    })
}

/// Column reversal: maps a row in the descending coefficient basis onto
/// the ascending state order.
pub(crate) fn reverse_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    DMatrix::from_fn(m.nrows(), cols, |i, j| m[(i, cols - 1 - j)])
}

/// Nominal realizations of `G_s`, `G_p`, `G_q` sharing `A`, `B`, plus the
/// Toeplitz bands carrying the interval uncertainty into the output row.
#[derive(Debug, Clone)]
pub struct ConstructedSystems {
    pub gs: StateSpace,
    pub gp: StateSpace,
    pub gq: StateSpace,
    /// `toeplitz_band(x, n)`, descending basis.
    pub x_band: DMatrix<f64>,
    /// `toeplitz_band(y, n)`, descending basis.
    pub y_band: DMatrix<f64>,
    /// `x_band` in state order.
    pub x_map: DMatrix<f64>,
    /// `y_band` in state order.
    pub y_map: DMatrix<f64>,
    pub a_d: Vec<f64>,
    pub b_d: Vec<f64>,
}

/// Which constructed transfer function an output perturbation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constructed {
    S,
    P,
    Q,
}

impl ConstructedSystems {
    /// `a_d Δ_a X` in state order.
    pub fn a_row(&self, delta_a: &[f64]) -> RowDVector<f64> {
        weighted_rows(&self.x_map, &self.a_d, delta_a)
    }

    /// `b_d Δ_b Y` in state order.
    pub fn b_row(&self, delta_b: &[f64]) -> RowDVector<f64> {
        weighted_rows(&self.y_map, &self.b_d, delta_b)
    }

    pub fn perturbation(&self, which: Constructed, delta_a: &[f64], delta_b: &[f64]) -> RowDVector<f64> {
        match which {
            Constructed::S => self.a_row(delta_a) + self.b_row(delta_b),
            Constructed::P => self.a_row(delta_a),
            Constructed::Q => self.b_row(delta_b),
        }
    }

    pub fn system(&self, which: Constructed) -> &StateSpace {
        match which {
            Constructed::S => &self.gs,
            Constructed::P => &self.gp,
            Constructed::Q => &self.gq,
        }
    }

    /// Sensitivity `G_p / G_s` and complementary sensitivity `G_q / G_s` at
    /// `j omega` for one uncertainty sample.
    pub fn sensitivities(&self, delta_a: &[f64], delta_b: &[f64], omega: f64) -> Result<(Complex64, Complex64)> {
        let ra = self.a_row(delta_a);
        let rb = self.b_row(delta_b);
        let rs = &ra + &rb;
        let gs = freq_response(&self.gs, Some(&rs), omega)?;
        let gp = freq_response(&self.gp, Some(&ra), omega)?;
        let gq = freq_response(&self.gq, Some(&rb), omega)?;
        Ok((gp / gs, gq / gs))
    }
}

fn weighted_rows(map: &DMatrix<f64>, dev: &[f64], delta: &[f64]) -> RowDVector<f64> {
    let mut row = RowDVector::zeros(map.ncols());
    for i in 0..map.nrows() {
        let w = dev[i] * delta[i];
        if w != 0.0 {
            row += map.row(i) * w;
        }
    }
    row
}

pub fn build_constructed_systems(
    plant: &IntervalPlant,
    ctrl: &Controller,
    dc: &Polynomial,
) -> Result<ConstructedSystems> {
    let n = plant.order();
    let m = ctrl.order();
    if dc.degree() != m + n {
        return Err(Error::Dimension(format!(
            "d_c has degree {} but m + n = {}",
            dc.degree(),
            m + n
        )));
    }
    if !is_strictly_hurwitz(dc)? {
        return Err(Error::NotHurwitz(format!("{:?}", dc.coeffs())));
    }
    let ax = convolve_slices(&plant.a_c, &ctrl.x);
    let by = convolve_slices(&plant.b_c, &ctrl.y);
    let sum: Vec<f64> = ax.iter().zip(&by).map(|(p, q)| p + q).collect();

    let gs = realize_canonical(&Polynomial::new(sum), dc)?;
    let gp = realize_canonical(&Polynomial::new(ax), dc)?;
    let gq = realize_canonical(&Polynomial::new(by), dc)?;
    // one companion pair shared bit-for-bit
    let gp = StateSpace {
        a: gs.a.clone(),
        b: gs.b.clone(),
        ..gp
    };
    let gq = StateSpace {
        a: gs.a.clone(),
        b: gs.b.clone(),
        ..gq
    };

    let x_band = toeplitz_band(&ctrl.x, n);
    let y_band = toeplitz_band(&ctrl.y, n);
    Ok(ConstructedSystems {
        gs,
        gp,
        gq,
        x_map: reverse_columns(&x_band),
        y_map: reverse_columns(&y_band),
        x_band,
        y_band,
        a_d: plant.a_d.clone(),
        b_d: plant.b_d.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paper() -> (IntervalPlant, Controller, Polynomial) {
        let plant = IntervalPlant::from_bounds(&[[0.5, 1.0], [-1.0, 1.0]], &[[0.5, 1.0], [1.0, 1.5]]).unwrap();
        let ctrl = Controller::from_free(&[0.8213, 0.0], &[20.0270, 18.3422, 18.4318]).unwrap();
        let dc = Polynomial::new(vec![1.0, 4.5, 6.225, 4.525, 1.5]);
        (plant, ctrl, dc)
    }

    #[test]
    fn unity_realization() {
        let dc = Polynomial::new(vec![1.0, 4.5, 6.225, 4.525, 1.5]);
        let ss = realize_canonical(&dc, &dc).unwrap();
        assert_eq!(ss.d, 1.0);
        assert!(ss.c.iter().all(|&v| v == 0.0));
        let h = freq_response(&ss, None, 3.7).unwrap();
        assert_relative_eq!(h.re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(h.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn realization_rejects_bad_input() {
        let den = Polynomial::new(vec![2.0, 1.0]);
        assert!(realize_canonical(&Polynomial::new(vec![1.0]), &den).is_err());
        let den = Polynomial::new(vec![1.0, 1.0]);
        assert!(realize_canonical(&Polynomial::new(vec![1.0, 1.0, 1.0]), &den).is_err());
    }

    #[test]
    fn companion_layout() {
        let (a, b) = companion(&Polynomial::new(vec![1.0, 4.5, 6.225, 4.525, 1.5])).unwrap();
        let want = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.5, -4.525, -6.225, -4.5,
            ],
        );
        assert_eq!(a, want);
        assert_eq!(b.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn constructed_systems_share_dynamics() {
        let (plant, ctrl, dc) = paper();
        let sys = build_constructed_systems(&plant, &ctrl, &dc).unwrap();
        assert_eq!(sys.gs.a, sys.gp.a);
        assert_eq!(sys.gs.a, sys.gq.a);
        assert_eq!(sys.gs.b, sys.gq.b);
        assert_eq!(sys.gs.a.nrows(), 4);
        assert_eq!(sys.gs.d, 1.0);
        assert_eq!(sys.gp.d, 1.0);
        assert_eq!(sys.gq.d, 0.0);
        assert_eq!(sys.gs.c.len(), 4);
        assert_eq!(sys.gq.c.len(), 4);
    }

    #[test]
    fn dc_gain_of_gs() {
        let (plant, ctrl, dc) = paper();
        let sys = build_constructed_systems(&plant, &ctrl, &dc).unwrap();
        // constant term of a^c*x + b^c*y is 1.25 * 18.4318, of d_c is 1.5
        let h = freq_response(&sys.gs, None, 0.0).unwrap();
        assert_relative_eq!(h.re, 1.25 * 18.4318 / 1.5, max_relative = 1e-12);
        assert_relative_eq!(h.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn build_rejects_bad_dc() {
        let (plant, ctrl, _) = paper();
        let short = Polynomial::new(vec![1.0, 2.0, 1.0]);
        assert!(matches!(
            build_constructed_systems(&plant, &ctrl, &short),
            Err(Error::Dimension(_))
        ));
        let unstable = Polynomial::new(vec![1.0, 1.0, 1.0, -1.0, 1.0]);
        assert!(matches!(
            build_constructed_systems(&plant, &ctrl, &unstable),
            Err(Error::NotHurwitz(_))
        ));
    }

    #[test]
    fn zero_deviation_plant_has_zero_perturbation() {
        let (_, ctrl, dc) = paper();
        let plant = IntervalPlant::nominal(&[0.75, 0.0], &[0.75, 1.25]).unwrap();
        let sys = build_constructed_systems(&plant, &ctrl, &dc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let da = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let db = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            assert!(sys.perturbation(Constructed::S, &da, &db).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn vertex_output_row_matches_vertex_polynomial() {
        let (plant, ctrl, dc) = paper();
        let sys = build_constructed_systems(&plant, &ctrl, &dc).unwrap();
        let ones = [1.0, 1.0];
        let c = &sys.gs.c + sys.perturbation(Constructed::S, &ones, &ones);
        let (a, b) = plant.sample(&ones, &ones);
        let num: Vec<f64> = convolve_slices(a.coeffs(), &ctrl.x)
            .iter()
            .zip(convolve_slices(b.coeffs(), &ctrl.y))
            .map(|(p, q)| p + q)
            .collect();
        let vertex = realize_canonical(&Polynomial::new(num), &dc).unwrap();
        for (g, w) in c.iter().zip(vertex.c.iter()) {
            assert_relative_eq!(*g, *w, epsilon = 1e-12);
        }
        assert_eq!(vertex.d, sys.gs.d);
    }

    #[test]
    fn conjugate_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let k = rng.random_range(1..6);
            let mut den = vec![1.0];
            den.extend((0..k).map(|_| rng.random_range(-2.0..2.0)));
            let num: Vec<f64> = (0..=k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let ss = realize_canonical(&Polynomial::new(num), &Polynomial::new(den)).unwrap();
            let w = rng.random_range(0.01..10.0);
            let hp = ss.eval_at(Complex64::new(0.0, w), None).unwrap();
            let hm = ss.eval_at(Complex64::new(0.0, -w), None).unwrap();
            assert_relative_eq!(hp.re, hm.re, max_relative = 1e-9);
            assert_relative_eq!(hp.im, -hm.im, max_relative = 1e-9);
        }
    }

    #[test]
    fn negative_frequency_rejected() {
        let dc = Polynomial::new(vec![1.0, 1.0]);
        let ss = realize_canonical(&dc, &dc).unwrap();
        assert!(freq_response(&ss, None, -1.0).is_err());
        assert!(freq_response(&ss, None, f64::NAN).is_err());
    }
}
