use super::*;
use crate::realize::build_constructed_systems;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn plant() -> IntervalPlant {
    IntervalPlant::from_bounds(&[[0.5, 1.0], [-1.0, 1.0]], &[[0.5, 1.0], [1.0, 1.5]]).unwrap()
}

fn dc() -> Polynomial {
    Polynomial::new(vec![1.0, 4.5, 6.225, 4.525, 1.5])
}

fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn middle_range_psi() {
    let r = table1_psi(RangeKind::Middle, Some(0.01), Some(0.1)).unwrap();
    let want = [
        re(-1.0),
        Complex64::new(0.0, 0.055),
        Complex64::new(0.0, -0.055),
        re(-0.001),
    ];
    for (g, w) in r.psi.iter().zip(CMat::from_row_slice(2, 2, &want).iter()) {
        assert!((g - w).norm() < 1e-15);
    }
    assert_eq!(r.phi, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
}

#[test]
fn high_range_psi() {
    let r = table1_psi(RangeKind::High, None, Some(50.0)).unwrap();
    assert_eq!(
        r.psi,
        CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-2500.0)])
    );
    assert!(!r.is_complex());
}

#[test]
fn low_range_psi() {
    let r = table1_psi(RangeKind::Low, Some(0.3), None).unwrap();
    assert_eq!(
        r.psi,
        CMat::from_row_slice(2, 2, &[re(-1.0), re(0.0), re(0.0), re(0.09)])
    );
}

#[test]
fn psi_is_hermitian_for_every_kind() {
    for kind in [RangeKind::Low, RangeKind::Middle, RangeKind::High] {
        let r = FrequencyRange::from_band(kind, (2.0, 7.0)).unwrap();
        assert_eq!(hermitian_defect(&r.psi), 0.0);
    }
}

#[test]
fn bad_frequencies_rejected() {
    assert!(table1_psi(RangeKind::Middle, Some(0.1), Some(0.01)).is_err());
    assert!(table1_psi(RangeKind::Middle, Some(0.0), Some(0.01)).is_err());
    assert!(table1_psi(RangeKind::High, None, Some(-1.0)).is_err());
    assert!(table1_psi(RangeKind::Low, None, Some(1.0)).is_err());
    assert!(FrequencyRange::from_band(RangeKind::Middle, (5.0, 5.0)).is_err());
}

#[test]
fn range_membership() {
    let mid = FrequencyRange::from_band(RangeKind::Middle, (50.0, 100.0)).unwrap();
    assert!(mid.contains(75.0) && !mid.contains(20.0) && !mid.contains(101.0));
    let high = FrequencyRange::from_band(RangeKind::High, (50.0, 100.0)).unwrap();
    assert!(high.contains(500.0) && !high.contains(49.0));
    let low = FrequencyRange::from_band(RangeKind::Low, (0.01, 0.1)).unwrap();
    assert!(low.contains(0.0) && !low.contains(0.2));
}

#[test]
fn xi_with_identity_p() {
    let r = FrequencyRange::from_band(RangeKind::Middle, (0.01, 0.1)).unwrap();
    let p = AffineMatrix::constant_real(&DMatrix::identity(2, 2));
    let q = AffineMatrix::zeros(2, 2);
    let xi = gkyp_xi(&r, &p, &q).unwrap().evaluate(&[]);
    let want = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
        ],
    );
    assert_eq!(xi, want.map(re));
}

#[test]
fn xi_with_unit_q_is_psi() {
    let r = FrequencyRange::from_band(RangeKind::Middle, (0.01, 0.1)).unwrap();
    let p = AffineMatrix::zeros(1, 1);
    let q = AffineMatrix::constant_real(&DMatrix::identity(1, 1));
    assert_eq!(gkyp_xi(&r, &p, &q).unwrap().evaluate(&[]), r.psi);
}

#[test]
fn xi_hermitian_for_random_hermitian_pq() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = FrequencyRange::from_band(RangeKind::Middle, (1.0, 4.0)).unwrap();
    let mut vars = VariableTable::new();
    let p = vars.hermitian("P", 3, None).unwrap();
    let q = vars.hermitian("Q", 3, None).unwrap();
    let xi = gkyp_xi(&r, &vars.expr(p), &vars.expr(q)).unwrap();
    for _ in 0..20 {
        let v: Vec<f64> = (0..vars.scalar_count()).map(|_| rng.random_range(-2.0..2.0)).collect();
        assert!(hermitian_defect(&xi.evaluate(&v)) < 1e-14);
    }
}

#[test]
fn xi_dimension_mismatch() {
    let r = FrequencyRange::from_band(RangeKind::High, (1.0, 4.0)).unwrap();
    assert!(gkyp_xi(&r, &AffineMatrix::zeros(2, 2), &AffineMatrix::zeros(3, 3)).is_err());
}

#[test]
fn db_conversion() {
    assert!((db_to_linear(-3.0) - 0.707_945_784_384_137_9).abs() < 1e-15);
    assert_eq!(db_to_linear(0.0), 1.0);
}

/// Free controller, random values: affine systems evaluated at the values
/// equal the direct realization.
#[test]
fn affine_systems_match_realization() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let mut vars = VariableTable::new();
        let cv = ControllerVars::declare(&mut vars, &PinMask::free(2)).unwrap();
        let sys = AffineSystems::new(&plant(), &cv, &dc()).unwrap();
        let v: Vec<f64> = (0..vars.scalar_count()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ctrl = cv.controller(&vars, &v, &PinMask::free(2)).unwrap();
        let cs = build_constructed_systems(&plant(), &ctrl, &dc()).unwrap();
        let close = |a: &AffineMatrix, b: &DMatrix<f64>| {
            let e = a.evaluate(&v);
            assert_eq!(e.shape(), b.shape());
            for (x, y) in e.iter().zip(b.iter()) {
                assert!((x.re - y).abs() < 1e-12 && x.im == 0.0);
            }
        };
        let row = |r: &nalgebra::RowDVector<f64>| DMatrix::from_row_slice(1, r.len(), r.as_slice());
        close(&sys.c_s, &row(&cs.gs.c));
        close(&sys.c_p, &row(&cs.gp.c));
        close(&sys.c_q, &row(&cs.gq.c));
        close(&sys.x_map, &cs.x_map);
        close(&sys.y_map, &cs.y_map);
        assert_eq!(sys.a, cs.gs.a);
        assert_eq!((sys.d_s, sys.d_p, sys.d_q), (cs.gs.d, cs.gp.d, cs.gq.d));
    }
}

#[test]
fn pinned_coefficients_are_constants() {
    let mut vars = VariableTable::new();
    let mut pins = PinMask::free(2);
    pins.set("x2", 0.0).unwrap();
    let cv = ControllerVars::declare(&mut vars, &pins).unwrap();
    assert_eq!(vars.scalar_count(), 4);
    assert!(!cv.x[2].depends_on_variables());
    assert!(cv.x[1].depends_on_variables());
}

/// Second transcription of the stability block, entry by entry.
fn stability_reference(
    cs: &crate::realize::ConstructedSystems,
    p: &DMatrix<f64>,
    ra: &[f64],
    rb: &[f64],
) -> DMatrix<f64> {
    let k = cs.gs.a.nrows();
    let n = ra.len();
    let size = k + 1 + 2 * n;
    let a = &cs.gs.a;
    let mut m = DMatrix::zeros(size, size);
    for i in 0..k {
        for j in 0..k {
            let mut s = 0.0;
            for l in 0..k {
                s += a[(l, i)] * p[(l, j)] + p[(i, l)] * a[(l, j)];
            }
            m[(i, j)] = s;
        }
        let mut pb = 0.0;
        for l in 0..k {
            pb += p[(i, l)] * cs.gs.b[l];
        }
        m[(i, k)] = pb - cs.gs.c[i];
        m[(k, i)] = m[(i, k)];
        for r in 0..n {
            m[(i, k + 1 + r)] = cs.x_map[(r, i)];
            m[(k + 1 + r, i)] = cs.x_map[(r, i)];
            m[(i, k + 1 + n + r)] = cs.y_map[(r, i)];
            m[(k + 1 + n + r, i)] = cs.y_map[(r, i)];
        }
    }
    let mut d = -2.0 * cs.gs.d;
    for r in 0..n {
        d += cs.a_d[r] * cs.a_d[r] * ra[r] + cs.b_d[r] * cs.b_d[r] * rb[r];
        m[(k + 1 + r, k + 1 + r)] = -ra[r];
        m[(k + 1 + n + r, k + 1 + n + r)] = -rb[r];
    }
    m[(k, k)] = d;
    m
}

#[test]
fn stability_lmi_reproduces_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut vars = VariableTable::new();
    let cv = ControllerVars::declare(&mut vars, &PinMask::free(2)).unwrap();
    let sys = AffineSystems::new(&plant(), &cv, &dc()).unwrap();
    let lmi = assemble_stability_lmi(&sys, &mut vars).unwrap();
    assert_eq!(lmi.size(), 4 + 1 + 4);
    let p_id = vars.find("P_s").unwrap();
    let ra_id = vars.find("R_sa").unwrap();
    let rb_id = vars.find("R_sb").unwrap();
    for _ in 0..20 {
        let v: Vec<f64> = (0..vars.scalar_count()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ctrl = cv.controller(&vars, &v, &PinMask::free(2)).unwrap();
        let cs = build_constructed_systems(&plant(), &ctrl, &dc()).unwrap();
        let p = vars.value(p_id, &v).map(|z| z.re);
        let ra: Vec<f64> = vars.value(ra_id, &v).diagonal().iter().map(|z| z.re).collect();
        let rb: Vec<f64> = vars.value(rb_id, &v).diagonal().iter().map(|z| z.re).collect();
        let want = stability_reference(&cs, &p, &ra, &rb);
        let got = lmi.evaluate(&v);
        assert!((got - want).abs().max() < 1e-12);
    }
}

fn all_five(range_kind: RangeKind) -> (VariableTable, Vec<AffineLmi>) {
    let mut vars = VariableTable::new();
    let cv = ControllerVars::declare(&mut vars, &PinMask::free(2)).unwrap();
    let sys = AffineSystems::new(&plant(), &cv, &dc()).unwrap();
    let rho = db_to_linear(-3.0);
    let rs = FrequencyRange::from_band(range_kind, (0.01, 0.1)).unwrap();
    let rt = FrequencyRange::from_band(range_kind, (50.0, 100.0)).unwrap();
    let mut lmis = vec![assemble_stability_lmi(&sys, &mut vars).unwrap()];
    let (a, b) = assemble_sensitivity_lmis(&sys, &mut vars, rho, &rs).unwrap();
    let (c, d) = assemble_comp_sensitivity_lmis(&sys, &mut vars, rho, &rt).unwrap();
    lmis.extend([a, b, c, d]);
    (vars, lmis)
}

#[test]
fn layout_and_sizes() {
    let (vars, lmis) = all_five(RangeKind::Middle);
    let sizes: Vec<usize> = lmis.iter().map(|l| l.size()).collect();
    assert_eq!(sizes, vec![9, 18, 18, 18, 18]);
    let names: Vec<&str> = lmis.iter().map(|l| l.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "stability",
            "sensitivity+",
            "sensitivity-",
            "comp_sensitivity+",
            "comp_sensitivity-"
        ]
    );
    for name in [
        "P_p", "Q_p", "R_pa", "R_pb", "R_pc", "R_pd", "P_q", "Q_q", "R_qa", "R_qd",
    ] {
        assert!(vars.find(name).is_some(), "{name}");
    }
    assert_eq!(vars.block(vars.find("Q_p").unwrap()).kind, VarKind::Hermitian(4));

    let (vars, lmis) = all_five(RangeKind::High);
    assert_eq!(lmis[3].size(), 9);
    assert_eq!(vars.block(vars.find("P_q").unwrap()).kind, VarKind::Symmetric(4));
}

#[test]
fn lmis_are_symmetric_for_random_assignments() {
    let (vars, lmis) = all_five(RangeKind::Middle);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let v: Vec<f64> = (0..vars.scalar_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for l in &lmis {
            let m = l.evaluate(&v);
            assert!((&m - m.transpose()).abs().max() < 1e-12, "{}", l.name);
        }
    }
}

#[test]
fn rho_one_drops_the_minus_weight() {
    let mut vars = VariableTable::new();
    let cv = ControllerVars::declare(&mut vars, &PinMask::free(2)).unwrap();
    let sys = AffineSystems::new(&plant(), &cv, &dc()).unwrap();
    let rs = FrequencyRange::from_band(RangeKind::High, (0.01, 0.1)).unwrap();
    let (_, minus) = assemble_sensitivity_lmis(&sys, &mut vars, 1.0, &rs).unwrap();
    let k = sys.state_dim();
    let rc = vars.block(vars.find("R_pc").unwrap()).offset;
    for i in 0..2 {
        if let Some((_, m)) = minus.terms.iter().find(|(idx, _)| *idx == rc + i) {
            assert_eq!(m[(k, k)], 0.0);
        }
    }
    assert_eq!(minus.constant[(k, k)], 0.0);
}

#[test]
fn certain_b_decouples_the_b_multiplier() {
    let plant = IntervalPlant::from_bounds(&[[0.5, 1.0], [-1.0, 1.0]], &[[0.7, 0.7], [1.2, 1.2]]).unwrap();
    let mut vars = VariableTable::new();
    let cv = ControllerVars::declare(&mut vars, &PinMask::free(2)).unwrap();
    let sys = AffineSystems::new(&plant, &cv, &dc()).unwrap();
    let rt = FrequencyRange::from_band(RangeKind::High, (50.0, 100.0)).unwrap();
    let (plus, _) = assemble_comp_sensitivity_lmis(&sys, &mut vars, 0.7, &rt).unwrap();
    let k = sys.state_dim();
    let rb = vars.block(vars.find("R_qb").unwrap()).offset;
    for (idx, m) in &plus.terms {
        if (rb..rb + 2).contains(idx) {
            assert_eq!(m[(k, k)], 0.0);
            assert!(m.iter().filter(|v| **v != 0.0).count() == 1);
        }
    }
    // Y border rows stay
    assert!(plus
        .terms
        .iter()
        .any(|(idx, m)| vars.scalar_name(*idx).starts_with('y') && m[(0, k + 3)] != 0.0 || m[(1, k + 3)] != 0.0));
}

#[test]
fn nonpositive_rho_rejected() {
    let mut vars = VariableTable::new();
    let cv = ControllerVars::declare(&mut vars, &PinMask::free(2)).unwrap();
    let sys = AffineSystems::new(&plant(), &cv, &dc()).unwrap();
    let r = FrequencyRange::from_band(RangeKind::High, (1.0, 2.0)).unwrap();
    assert!(matches!(
        assemble_sensitivity_lmis(&sys, &mut vars, 0.0, &r),
        Err(Error::InvalidBound(_))
    ));
}

#[test]
fn wrong_dc_degree_rejected() {
    let mut vars = VariableTable::new();
    let cv = ControllerVars::declare(&mut vars, &PinMask::free(2)).unwrap();
    let short = Polynomial::new(vec![1.0, 3.0, 3.0, 1.0]);
    assert!(matches!(
        AffineSystems::new(&plant(), &cv, &short),
        Err(Error::Dimension(_))
    ));
    let unstable = Polynomial::new(vec![1.0, -1.0, 1.0, 1.0, 1.0]);
    assert!(matches!(
        AffineSystems::new(&plant(), &cv, &unstable),
        Err(Error::NotHurwitz(_))
    ));
}

#[test]
fn dump_lists_every_term() {
    let (vars, lmis) = all_five(RangeKind::Middle);
    let text = lmis[1].dump_text(&vars);
    assert!(text.starts_with("lmi sensitivity+ size 18"));
    assert_eq!(text.matches("\nvar ").count(), lmis[1].terms.len());
    assert!(text.contains("Q_p.im[0,1]"));
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let m = CMat::from_fn(d, d, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&m + m.adjoint()) * re(0.5)
}

fn sorted(v: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.into_iter().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

#[test]
fn embedding_preserves_negative_definiteness() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let d = rng.random_range(1..6);
        let h = random_hermitian(&mut rng, d);
        let shift = h.clone().symmetric_eigenvalues().max() + rng.random_range(0.01..1.0);
        let neg = h - CMat::identity(d, d) * re(shift);
        let e = embed_matrix(&neg).unwrap();
        assert!(e.symmetric_eigenvalues().max() < 0.0);
    }
}

#[test]
fn embedding_duplicates_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let d = rng.random_range(1..6);
        let h = random_hermitian(&mut rng, d);
        let base = sorted(h.clone().symmetric_eigenvalues().iter().copied());
        let doubled = sorted(base.iter().flat_map(|&x| [x, x]));
        let got = sorted(embed_matrix(&h).unwrap().symmetric_eigenvalues().iter().copied());
        for (g, w) in got.iter().zip(&doubled) {
            assert!((g - w).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lmis_are_affine(seed in any::<u64>()) {
        let (vars, lmis) = all_five(RangeKind::Middle);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nv = vars.scalar_count();
        let t1: Vec<f64> = (0..nv).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t2: Vec<f64> = (0..nv).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sum: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| a + b).collect();
        let zero = vec![0.0; nv];
        for l in &lmis {
            let lhs = l.evaluate(&t1) + l.evaluate(&t2) - l.evaluate(&zero);
            let rhs = l.evaluate(&sum);
            let scale = 1.0 + rhs.abs().max();
            prop_assert!((lhs - rhs).abs().max() < 1e-12 * scale);
        }
    }
}
