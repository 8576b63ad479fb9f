mod common;

use common::gradcheck::case;
use proptest::prelude::*;

#[test]
fn fixed_three_layer_network() {
    let c = case([7, 9, 6, 5], 3, 11, false);
    assert!(!c.near_kink());
    let e = c.max_rel_error();
    assert!(e < 1e-5, "max relative error {e:e}");
}

#[test]
fn fixed_network_with_dropout_masks() {
    let c = case([6, 10, 8, 8], 2, 5, true);
    assert!(!c.near_kink());
    let e = c.max_rel_error();
    assert!(e < 1e-5, "max relative error {e:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_small_networks(
        n_in in 2usize..8,
        h1 in 2usize..9,
        h2 in 2usize..9,
        eight in any::<bool>(),
        batch in 1usize..4,
        seed in any::<u64>(),
        training in any::<bool>(),
    ) {
        let head = if eight { 8 } else { 5 };
        let c = case([n_in, h1, h2, head], batch, seed, training);
        prop_assume!(!c.near_kink());
        let e = c.max_rel_error();
        prop_assert!(e < 1e-5, "max relative error {:e}", e);
    }
}
