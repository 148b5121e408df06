mod common;

use cluemark::clwe::{
    hclwe_transform, sample_unit_direction, ClweParams, LatticeIndex, PancakeMarginal,
    PancakeSampler, SampleMatrix, UnitConvention,
};
use cluemark::ks_test;
use cluemark::stats::seeded_stream;
use common::QuadratureMarginal;

fn projections(params: &ClweParams<f64>, index: LatticeIndex, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_stream(seed);
    let w = sample_unit_direction(&mut rng, params.n()).unwrap();
    let base = SampleMatrix::gaussian(&mut rng, count, params.n(), UnitConvention::RhoUnits).unwrap();
    let out = PancakeSampler::new(*params, index)
        .transform(base, &w, &mut rng)
        .unwrap();
    out.project(w.as_slice()).unwrap()
}

#[test]
fn closed_form_marginal_matches_quadrature() {
    for (gamma, beta) in [(2.0, 0.1), (2.0, 0.001), (1.0, 0.3), (4.0, 0.05)] {
        let params = ClweParams::new(8, gamma, beta).unwrap();
        let closed = PancakeMarginal::new(&params);
        let oracle = QuadratureMarginal::new(gamma, beta);
        let mut worst = 0.0f64;
        for i in 0..=4000 {
            let t = -1.5 + 3.0 * i as f64 / 4000.0;
            worst = worst.max((closed.cdf(t) - oracle.cdf(t)).abs());
        }
        assert!(worst < 1e-5, "γ={gamma} β={beta}: max CDF gap {worst}");
    }
}

#[test]
fn default_sampler_passes_ks_against_quadrature() {
    let params = ClweParams::new(16, 2.0, 0.1).unwrap();
    let oracle = QuadratureMarginal::new(2.0, 0.1);
    let p = projections(&params, LatticeIndex::default(), 20_000, 5);
    let r = ks_test(&p, |t| oracle.cdf(t)).unwrap();
    assert!(r.p_value > 0.001, "{r:?}");
}

#[test]
fn literal_rounding_rule_fails_marginal_ks() {
    let params = ClweParams::new(16, 2.0, 0.1).unwrap();
    let oracle = QuadratureMarginal::new(2.0, 0.1);
    let p = projections(&params, LatticeIndex::Nearest, 50_000, 5);
    let r = ks_test(&p, |t| oracle.cdf(t)).unwrap();
    assert!(r.p_value < 1e-4, "{r:?}");
}

#[test]
fn noise_std_beta_interpretation_is_rejected() {
    // Reading β as a standard deviation inflates the noise by √(2π); the
    // resulting pancakes are measurably wider than the target distribution.
    let beta = 0.1;
    let wide = ClweParams::new(16, 2.0, beta * (2.0 * std::f64::consts::PI).sqrt()).unwrap();
    let oracle = QuadratureMarginal::new(2.0, beta);
    let mut rng = seeded_stream(8);
    let w = sample_unit_direction(&mut rng, 16).unwrap();
    let base = SampleMatrix::gaussian(&mut rng, 50_000, 16, UnitConvention::RhoUnits).unwrap();
    let p = hclwe_transform(base, &w, &wide, &mut rng)
        .unwrap()
        .project(w.as_slice())
        .unwrap();
    let r = ks_test(&p, |t| oracle.cdf(t)).unwrap();
    assert!(r.p_value < 1e-4, "{r:?}");
}

#[test]
fn orthogonal_projection_is_base_gaussian() {
    let params = ClweParams::new(16, 2.0, 0.001).unwrap();
    let mut rng = seeded_stream(12);
    let w = sample_unit_direction(&mut rng, 16).unwrap();
    // u ⟂ w by Gram–Schmidt on e_0.
    let mut u = vec![0.0; 16];
    u[0] = 1.0;
    let c = w.as_slice()[0];
    u.iter_mut().zip(w.as_slice()).for_each(|(ui, wi)| *ui -= c * wi);
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= norm);

    let base = SampleMatrix::gaussian(&mut rng, 20_000, 16, UnitConvention::RhoUnits).unwrap();
    let out = hclwe_transform(base, &w, &params, &mut rng).unwrap();
    let r = ks_test(&out.project(&u).unwrap(), common::rho_normal_cdf).unwrap();
    assert!(r.p_value > 0.001, "{r:?}");
}
