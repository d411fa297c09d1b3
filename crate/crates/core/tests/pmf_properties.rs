use edgezone::{mixture, Exec, Pmf};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

/// Pmfs with support length at most 64 and total mass in (0, 1].
fn pmf() -> impl Strategy<Value = Pmf> {
    (
        0usize..6,
        prop::collection::vec(0.0f64..1.0, 1..=64),
        0.05f64..=1.0,
    )
        .prop_filter_map("positive mass", |(offset, raw, mass)| {
            let sum: f64 = raw.iter().sum();
            if sum <= 0.0 {
                return None;
            }
            Pmf::new(offset, raw.iter().map(|x| x / sum * mass).collect()).ok()
        })
}

fn exact(a: &Pmf, b: &Pmf) -> Pmf {
    a.convolve_with(b, 0.0, Exec::Sequential)
}

fn assert_close(a: &Pmf, b: &Pmf) -> Result<(), TestCaseError> {
    let end = a.support_end().max(b.support_end());
    for k in 0..end {
        prop_assert!(
            (a.mass_at(k) - b.mass_at(k)).abs() <= TOL,
            "mass at {k}: {} vs {}",
            a.mass_at(k),
            b.mass_at(k)
        );
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn convolution_commutes(a in pmf(), b in pmf()) {
        assert_close(&exact(&a, &b), &exact(&b, &a))?;
    }

    #[test]
    fn convolution_associates(a in pmf(), b in pmf(), c in pmf()) {
        assert_close(&exact(&exact(&a, &b), &c), &exact(&a, &exact(&b, &c)))?;
    }

    #[test]
    fn parallel_convolution_matches_sequential(a in pmf(), b in pmf()) {
        let s = a.convolve_with(&b, 0.0, Exec::Sequential);
        let p = a.convolve_with(&b, 0.0, Exec::Parallel);
        assert_close(&s, &p)?;
    }

    #[test]
    fn means_add_under_convolution(a in pmf(), b in pmf()) {
        let c = exact(&a, &b);
        let lhs = c.mean().unwrap();
        let rhs = a.mean().unwrap() + b.mean().unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
        prop_assert!((c.total_mass() - a.total_mass() * b.total_mass()).abs() <= TOL);
    }

    #[test]
    fn cdf_is_monotone_and_bounded(a in pmf()) {
        let mut prev = 0.0;
        for k in 0..=a.support_end() + 1 {
            let c = a.cdf_at(k);
            prop_assert!(c + 1e-15 >= prev);
            prop_assert!(c <= a.total_mass() + 1e-15);
            prev = c;
        }
        prop_assert!((a.cdf_at(a.support_end()) - a.total_mass()).abs() <= 1e-12);
    }

    #[test]
    fn power_matches_chained_convolution(a in pmf(), n in 1usize..6) {
        let power = a.convolve_power_with(n, 0.0, Exec::Sequential).unwrap();
        let mut chain = a.clone();
        for _ in 1..n {
            chain = exact(&chain, &a);
        }
        assert_close(&power, &chain)?;
    }

    #[test]
    fn truncation_drops_at_most_the_tolerance(a in pmf(), b in pmf(), exp in 3i32..12) {
        let tol = 10f64.powi(-exp);
        let full = exact(&a, &b);
        let cut = a.convolve_with(&b, tol, Exec::Sequential);
        prop_assert!(full.total_mass() - cut.total_mass() <= tol + 1e-15);
        prop_assert!(cut.support_end() <= full.support_end());
        for k in 0..cut.support_end() {
            prop_assert_eq!(cut.mass_at(k), full.mass_at(k));
        }
    }

    #[test]
    fn mixture_preserves_weighted_mass(a in pmf(), b in pmf(), w in 0.0f64..=1.0) {
        let m = mixture(&[(w, &a), (1.0 - w, &b)]).unwrap();
        let expect = w * a.total_mass() + (1.0 - w) * b.total_mass();
        prop_assert!((m.total_mass() - expect).abs() <= TOL);
    }

    #[test]
    fn percentile_is_the_smallest_covering_point(a in pmf(), q in 0.01f64..0.99) {
        match a.percentile(q).unwrap().value() {
            Some(k) => {
                prop_assert!(a.cdf_at(k) >= q - 1e-12);
                if k > 0 {
                    prop_assert!(a.cdf_at(k - 1) < q + 1e-12);
                }
            }
            None => prop_assert!(a.total_mass() < q + 1e-12),
        }
    }
}
