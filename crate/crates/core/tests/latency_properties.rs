use edgezone::latency_composer::{
    cost_units, estimate_path_latency, CotsCatalog, PathSpec, VnfHop,
};
use proptest::prelude::*;

const SIZES: [u32; 3] = [64, 256, 1500];

fn hop() -> impl Strategy<Value = VnfHop> {
    (
        prop::sample::select(vec!["ovs", "ovs-dpdk"]),
        prop::sample::select(SIZES.to_vec()),
    )
        .prop_map(|(t, s)| VnfHop {
            technology: t.to_string(),
            packet_size: s,
        })
}

fn chain() -> impl Strategy<Value = Vec<VnfHop>> {
    prop::collection::vec(hop(), 0..6)
}

proptest! {
    #[test]
    fn latency_grows_with_fiber(c in chain(), a in 0.0f64..5_000.0, extra in 0.0f64..5_000.0) {
        let cat = CotsCatalog::builtin();
        let short = estimate_path_latency(&PathSpec::new(a, c.clone()), &cat).unwrap();
        let long = estimate_path_latency(&PathSpec::new(a + extra, c), &cat).unwrap();
        prop_assert!(long >= short);
        prop_assert!((long - short - extra * 4.77).abs() <= 1e-6 * long.max(1.0));
    }

    #[test]
    fn appending_a_vnf_never_helps(c in chain(), h in hop(), fiber in 0.0f64..1_000.0) {
        let cat = CotsCatalog::builtin();
        let base = estimate_path_latency(&PathSpec::new(fiber, c.clone()), &cat).unwrap();
        let mut longer = c;
        longer.push(h);
        let grown = estimate_path_latency(&PathSpec::new(fiber, longer), &cat).unwrap();
        prop_assert!(grown > base);
    }

    #[test]
    fn larger_packets_cost_more(tech in prop::sample::select(vec!["ovs", "ovs-dpdk"]), n in 1usize..5) {
        let cat = CotsCatalog::builtin();
        let at = |size: u32| {
            let hops = vec![VnfHop { technology: tech.to_string(), packet_size: size }; n];
            estimate_path_latency(&PathSpec::new(10.0, hops), &cat).unwrap()
        };
        prop_assert!(at(64) < at(256));
        prop_assert!(at(256) < at(1500));
    }

    #[test]
    fn cost_units_are_monotone_and_cover_latency(a in 0.0f64..1e5, d in 0.0f64..1e4, unit in 0.5f64..100.0) {
        let lo = cost_units(a, unit);
        prop_assert!(lo <= cost_units(a + d, unit));
        prop_assert!(lo as f64 * unit >= a * (1.0 - 1e-9));
        prop_assert!(lo == 0 || (lo - 1) as f64 * unit < a);
    }
}
