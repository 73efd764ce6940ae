//! Multicast construction on random strong-interference instances.

use gmac_core::macsim::{
    generate_codebook, ic_multicast_decoders, identity_ks_test, simulate_ic, CodebookKind, IcConfig,
};
use gmac_core::regions::IcParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_instances_respect_the_union_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ks_rejections = 0;
    for instance in 0..8u64 {
        let sign = |r: &mut ChaCha8Rng| if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let g12 = sign(&mut rng) * rng.random_range(1.0..2.5);
        let g21 = sign(&mut rng) * rng.random_range(1.0..2.5);
        let params = IcParams::new(rng.random_range(0.5..3.0), rng.random_range(0.5..3.0), g12, g21).unwrap();
        let n = rng.random_range(2..6);
        let sizes = [rng.random_range(2..7), rng.random_range(2..7)];
        let ic = IcConfig::new(n, params, sizes)
            .unwrap()
            .with_noise_correlation(rng.random_range(-0.5..0.5))
            .unwrap();
        let book = generate_codebook(&ic.codebook_config().unwrap(), CodebookKind::Sphere, instance).unwrap();
        let report = simulate_ic(&ic, &book, 4000, 300, instance).unwrap();
        assert!(report.all_hold(), "instance {instance}: {report:?}");
        let dec = ic_multicast_decoders(&ic, &book, report.anchors.anchors).unwrap();
        let ks = identity_ks_test(&ic, &dec, 20_000, instance as usize % n, instance).unwrap();
        ks_rejections += usize::from(ks.rejects(0.01));
    }
    assert!(ks_rejections <= 1);
}
