use latppt::certificate::{certify_pptes, verify_certificate, Certificate, CertifyOptions, MapDescription, Verdict};
use latppt::lattice::{LatticeShape, MultiIndex};
use latppt::maps::{self, lambda_beta0, tensor_sum_map, DensityInput, MapRep, TensorSumSpec, WitnessVerdict};
use latppt::states::{build_ibe, build_ic, LatticeState, SiteSet};
use latppt::{Error, ExactMap, FloatMap, Rational};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape(m: usize, n: usize) -> LatticeShape {
    LatticeShape::new(m, n).unwrap()
}

fn beta(v: &[u8]) -> MultiIndex {
    MultiIndex::new(v.to_vec()).unwrap()
}

fn ibe_pair(m: usize, n: usize, b: &[u8]) -> (LatticeState, ExactMap) {
    let sh = shape(m, n);
    let state = LatticeState::from_set(&build_ibe(sh, &beta(b)).unwrap()).unwrap();
    (state, lambda_beta0(sh, &beta(b)).unwrap())
}

#[test]
fn ibe_certificate_round_trips_and_verifies() {
    let (state, map) = ibe_pair(2, 1, &[2]);
    let cert = certify_pptes(&state, &map, &CertifyOptions::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::Pptes);
    assert_eq!(cert.witness, Rational::new(-1, 8 * 28));
    assert_eq!(cert.j_min, Rational::from_integer(0));
    let text = cert.to_text();
    assert_eq!(text, cert.to_text());
    let parsed = Certificate::from_text(&text).unwrap();
    assert_eq!(parsed, cert);
    let fresh = verify_certificate(&parsed).unwrap();
    assert_eq!(fresh.verdict, Verdict::Pptes);
}

#[test]
fn tampered_certificates_are_rejected() {
    let (state, map) = ibe_pair(1, 1, &[2]);
    let text = certify_pptes(&state, &map, &CertifyOptions::default()).unwrap().to_text();

    let witness = text.replace("witness -1/40", "witness -1/41");
    let err = verify_certificate(&Certificate::from_text(&witness).unwrap()).unwrap_err();
    assert!(err.to_string().contains("witness"), "{err}");

    let verdict = text.replace("verdict PPTES", "verdict inconclusive");
    assert!(verify_certificate(&Certificate::from_text(&verdict).unwrap()).is_err());

    // dropping the extra site turns the state into I_C and the witness into zero
    let sites = text.replace("state els 10\nsites 0|2 ", "state els 9\nsites ");
    assert!(verify_certificate(&Certificate::from_text(&sites).unwrap()).is_err());

    assert!(matches!(Certificate::from_text(&text.replace("j-min 0/1", "j-min zero")), Err(Error::Parse { .. })));
    assert!(Certificate::from_text(&format!("{text}extra line\n")).is_err());
}

#[test]
fn verdicts_for_ic_bell_and_unverified_maps() {
    let sh = shape(1, 1);
    let map: ExactMap = lambda_beta0(sh, &beta(&[2])).unwrap();
    let ic = LatticeState::from_set(&build_ic(sh)).unwrap();
    let cert = certify_pptes(&ic, &map, &CertifyOptions::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::Inconclusive);
    assert_eq!(cert.witness, Rational::from_integer(0));
    assert_eq!(cert.j_min, Rational::new(1, 9));

    let bell = LatticeState::from_set(&SiteSet::from_sites(sh, [0]).unwrap()).unwrap();
    let cert = certify_pptes(&bell, &map, &CertifyOptions::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::Npt);
    assert!(cert.j_min < Rational::from_integer(0));

    let ibe = LatticeState::from_set(&build_ibe(sh, &beta(&[2])).unwrap()).unwrap();
    let copied = MapRep::diagonal(sh, map.diagonal_coeffs().unwrap().to_vec()).unwrap();
    let cert = certify_pptes(&ibe, &copied, &CertifyOptions::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::Unsupported);
    assert!(matches!(cert.map, MapDescription::Unverified(_)));
    let parsed = Certificate::from_text(&cert.to_text()).unwrap();
    assert_eq!(verify_certificate(&parsed).unwrap().verdict, Verdict::Unsupported);
}

#[test]
fn weighted_state_certificate_round_trips() {
    let sh = shape(1, 1);
    let mut w = vec![0i64; 16];
    for s in build_ic(sh).iter() {
        w[s] = 2;
    }
    w[2] = 1;
    let st = LatticeState::from_weights(sh, w, 19).unwrap();
    let map: ExactMap = lambda_beta0(sh, &beta(&[2])).unwrap();
    let cert = certify_pptes(&st, &map, &CertifyOptions::default()).unwrap();
    assert!(cert.to_text().contains("state weights denom=19"));
    assert_eq!(Certificate::from_text(&cert.to_text()).unwrap(), cert);
    // extra weight 1/19 against I_C weight 2/19 keeps PPT and detection
    assert_eq!(cert.verdict, Verdict::Pptes);
    assert_eq!(cert.witness, Rational::new(-1, 4 * 19));
}

#[test]
fn tensor_sum_certificate_records_its_factors() {
    let sh = shape(1, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let factors: TensorSumSpec<Rational> = TensorSumSpec::random_valid(&mut rng, 1, 1);
    let map = tensor_sum_map(&factors).unwrap();
    let st = LatticeState::from_set(&build_ibe(sh, &MultiIndex::from_index(factors.neg_index.max(1), 1)).unwrap()).unwrap();
    let cert = certify_pptes(&st, &map, &CertifyOptions::default()).unwrap();
    assert!(matches!(cert.map, MapDescription::TensorSum(_)));
    let parsed = Certificate::from_text(&cert.to_text()).unwrap();
    assert_eq!(parsed, cert);
    verify_certificate(&parsed).unwrap();
}

#[test]
fn certify_skips_dense_beyond_the_cap() {
    let (state, map) = ibe_pair(3, 2, &[1, 2]);
    let cert = certify_pptes(&state, &map, &CertifyOptions::default()).unwrap();
    assert!(cert.dense.is_none());
    assert_eq!(cert.verdict, Verdict::Pptes);
    assert_eq!(cert.witness, Rational::new(-1, 32 * 244));
    assert!(cert.to_text().contains("dense skipped"));
}

#[test]
fn shape_mismatch_is_an_error() {
    let (state, _) = ibe_pair(1, 1, &[2]);
    let map: ExactMap = lambda_beta0(shape(2, 1), &beta(&[2])).unwrap();
    assert!(matches!(certify_pptes(&state, &map, &CertifyOptions::default()), Err(Error::Shape(_))));
}

#[test]
fn float_maps_share_the_generic_paths() {
    let sh = shape(1, 1);
    let exact: ExactMap = lambda_beta0(sh, &beta(&[3])).unwrap();
    let float: FloatMap = lambda_beta0(sh, &beta(&[3])).unwrap();
    let st = LatticeState::from_set(&build_ibe(sh, &beta(&[3])).unwrap()).unwrap();
    let we = maps::witness_lattice(&exact, &st).unwrap();
    let wf = maps::witness_lattice(&float, &st).unwrap();
    assert!((wf + 1.0 / 40.0).abs() < 1e-15);
    assert_eq!(we, Rational::new(-1, 40));
    let f32map: MapRep<f32> = lambda_beta0(sh, &beta(&[3])).unwrap();
    assert!((maps::witness_lattice(&f32map, &st).unwrap() + 0.025).abs() < 1e-6);
}

#[test]
fn witness_value_routes_and_band() {
    let (state, map) = ibe_pair(1, 1, &[1]);
    let report = maps::witness_value(&map, DensityInput::Lattice(&state), 4).unwrap();
    assert_eq!(report.verdict, WitnessVerdict::Detected);
    assert!((report.dense.unwrap() + 0.025).abs() < 1e-12);
    let rho = state.materialize_dense().unwrap();
    let dense = maps::witness_value(&map, DensityInput::Dense(&rho), 4).unwrap();
    assert_eq!(dense.verdict, WitnessVerdict::Detected);
    assert!(dense.exact.is_none());
    assert_eq!(WitnessVerdict::from_float(5e-13), WitnessVerdict::Inconclusive);
    assert_eq!(WitnessVerdict::from_float(-2e-12), WitnessVerdict::Detected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lattice_witness_matches_dense(weights in prop::collection::vec(0i64..4, 64), b in 1u8..4, m_first in any::<bool>()) {
        let sh = if m_first { shape(2, 1) } else { shape(1, 1) };
        let w: Vec<i64> = weights[..sh.size()].to_vec();
        let total: i64 = w.iter().sum();
        prop_assume!(total > 0);
        let st = LatticeState::from_weights(sh, w, total).unwrap();
        let map: ExactMap = lambda_beta0(sh, &beta(&[b])).unwrap();
        let exact = maps::witness_lattice(&map, &st).unwrap();
        let dense = maps::witness_dense(&map, &st.materialize_dense().unwrap()).unwrap();
        prop_assert!((dense - *exact.numer() as f64 / *exact.denom() as f64).abs() < 1e-10);
    }
}

#[test]
fn lattice_witness_matches_dense_at_four_qubits() {
    let sh = shape(2, 2);
    for b in [[1u8, 0], [0, 3], [2, 2]] {
        let set = latppt::enumerate::random_subset(sh, 11, b[0] as u64 * 4 + b[1] as u64);
        let st = LatticeState::from_set(&set).unwrap();
        let map: ExactMap = lambda_beta0(sh, &beta(&b)).unwrap();
        let exact = maps::witness_lattice(&map, &st).unwrap();
        let dense = maps::witness_dense(&map, &st.materialize_dense().unwrap()).unwrap();
        assert!((dense - *exact.numer() as f64 / *exact.denom() as f64).abs() < 1e-10);
    }
}
