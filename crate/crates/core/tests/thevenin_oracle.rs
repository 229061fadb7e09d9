mod common;

use bdris::emdata::Tier;
use bdris::netalg::C64;
use common::oracle_error;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn behavioral_matches_nodal(seed in any::<u64>(), m_x in 1usize..=2) {
        prop_assert!(oracle_error(seed, m_x, Tier::Behavioral) < 1e-9);
    }

    #[test]
    fn internal_ports_match_nodal(seed in any::<u64>(), m_x in 1usize..=2) {
        prop_assert!(oracle_error(seed, m_x, Tier::InternalPorts) < 1e-9);
    }
}

#[test]
fn nodal_oracle_solves_divider() {
    // 1 V behind 50 ohm into a matched line and a 50 ohm load
    let mut c = common::Circuit::default();
    let src = c.impedance(&[vec![C64::new(50.0, 0.0)]], &[C64::new(1.0, 0.0)]);
    let line = c.scattering(&[vec![C64::new(0.0, 0.0), C64::new(0.0, 1.0)], vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)]]);
    c.connect(src[0], line[0]);
    c.load(C64::new(50.0, 0.0), line[1]);
    let s = c.solve();
    assert!((s.v(src[0]) - C64::new(0.5, 0.0)).norm() < 1e-14);
    assert!((s.v(line[1]) - C64::new(0.0, 0.5)).norm() < 1e-14);
}
