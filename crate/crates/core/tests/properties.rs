use gsu::kernels::{genotype_similarity, phenotype_similarity, KernelConfig};
use gsu::model::{validate_genotypes, validate_phenotypes, CovariateMatrix, SimilarityMatrix, VariantInfo, VariantSet};
use gsu::nulldist::{davies_pvalue, liu_pvalue, saddlepoint_pvalue, tail_probability, AssociationTest, PValueOptions};
use gsu::power::{asymptotic_power, required_sample_size, PowerParams};
use gsu::scan::{group_variants, GeneRange, WindowAnchor};
use gsu::ustat::{gsu_statistic, prepare, ProjectionContext};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn coefficients() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..2.0, 1..12)
}

fn genotypes(n: usize, m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(prop_oneof![6 => Just(0.0), 3 => Just(1.0), 1 => Just(2.0)], n * m)
        .prop_map(move |v| DMatrix::from_vec(n, m, v))
}

fn phenotype(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-3.0f64..3.0, n).prop_map(move |v| DMatrix::from_vec(n, 1, v))
}

fn raw_pair(g: DMatrix<f64>, y: DMatrix<f64>) -> Option<(SimilarityMatrix, SimilarityMatrix)> {
    let m = g.ncols();
    let g = validate_genotypes(g, VariantInfo::anonymous(m)).ok()?;
    let y = validate_phenotypes(y, None).ok()?;
    let k = genotype_similarity(&g, &VariantSet::all("s", &g), &KernelConfig::default()).ok()?;
    let s = phenotype_similarity(&y, &KernelConfig::default()).ok()?;
    Some((k, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_is_a_probability_and_decreasing(c in coefficients(), q in 0.0f64..20.0, dq in 0.01f64..5.0) {
        for f in [
            |c: &[f64], q| davies_pvalue(c, q, 1e-9).ok(),
            |c: &[f64], q| liu_pvalue(c, q).ok(),
            |c: &[f64], q| saddlepoint_pvalue(c, q).ok(),
        ] {
            // Davies may report its term limit near a chi2_1 singularity.
            let (Some(a), Some(b)) = (f(&c, q), f(&c, q + dq)) else { continue };
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b <= a + 1e-9, "{a} then {b}");
        }
        let auto = tail_probability(&c, q, &PValueOptions::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&auto.p_value));
    }

    #[test]
    fn tail_scales_with_coefficients(c in coefficients(), q in 0.1f64..10.0, scale in 0.1f64..10.0) {
        let a = davies_pvalue(&c, q, 1e-9).unwrap();
        let scaled: Vec<f64> = c.iter().map(|x| x * scale).collect();
        let b = davies_pvalue(&scaled, q * scale, 1e-9).unwrap();
        prop_assert!((a - b).abs() < 1e-7);
    }

    #[test]
    fn methods_agree_in_the_body(c in proptest::collection::vec(0.2f64..1.0, 8..30), frac in 0.3f64..3.0) {
        let mean: f64 = c.iter().sum();
        let q = mean * frac;
        let d = davies_pvalue(&c, q, 1e-9).unwrap();
        let l = liu_pvalue(&c, q).unwrap();
        let s = saddlepoint_pvalue(&c, q).unwrap();
        prop_assert!((d - l).abs() < 0.02, "davies {d} liu {l}");
        prop_assert!((d - s).abs() < 0.02, "davies {d} saddlepoint {s}");
    }

    #[test]
    fn u_is_symmetric_and_invariant_to_subject_order(
        g in genotypes(12, 4),
        y in phenotype(12),
        perm in Just((0..12).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let Some((k, s)) = raw_pair(g, y) else { return Ok(()); };
        let ctx = ProjectionContext::new(&CovariateMatrix::intercept_only(12)).unwrap();
        let (kc, _) = prepare(&k, &ctx).unwrap();
        let (sc, _) = prepare(&s, &ctx).unwrap();
        let u = gsu_statistic(&kc, &sc).unwrap();
        prop_assert!((u - gsu_statistic(&sc, &kc).unwrap()).abs() <= 1e-15);
        let (kp, _) = prepare(&k.permuted(&perm), &ctx).unwrap();
        let (sp, _) = prepare(&s.permuted(&perm), &ctx).unwrap();
        prop_assert!((u - gsu_statistic(&kp, &sp).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn p_value_ignores_kernel_scale(g in genotypes(15, 5), y in phenotype(15), scale in 0.01f64..100.0) {
        let Some((k, s)) = raw_pair(g, y) else { return Ok(()); };
        let test = AssociationTest::from_similarity(
            &s,
            &CovariateMatrix::intercept_only(15),
            KernelConfig::default(),
            PValueOptions::default(),
        )
        .unwrap();
        let a = test.test_similarity(&k, "k", 5).unwrap();
        let k2 = SimilarityMatrix::raw(k.values() * scale).unwrap();
        let b = test.test_similarity(&k2, "k", 5).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.p_value));
        prop_assert!((a.p_value - b.p_value).abs() < 1e-6, "{} vs {}", a.p_value, b.p_value);
        prop_assert!((a.u_gamma - b.u_gamma).abs() < 1e-10);
    }

    #[test]
    fn grouping_is_a_partition(
        positions in proptest::collection::btree_set(1u64..500_000, 1..200),
        cuts in proptest::collection::btree_set(1u64..500_000, 0..10),
        window in 1_000u64..100_000,
        fixed in any::<bool>(),
    ) {
        let variants: Vec<VariantInfo> = positions
            .iter()
            .enumerate()
            .map(|(i, &p)| VariantInfo::new(format!("v{i}"), if i % 4 == 0 { "2" } else { "1" }, p))
            .collect();
        // Disjoint genes from consecutive cut pairs.
        let cuts: Vec<u64> = cuts.into_iter().collect();
        let genes: Vec<GeneRange> = cuts
            .chunks(2)
            .filter(|w| w.len() == 2)
            .enumerate()
            .map(|(i, w)| GeneRange { gene: format!("G{i}"), chromosome: "1".into(), start: w[0], end: w[1] })
            .collect();
        let anchor = if fixed { WindowAnchor::Fixed(0) } else { WindowAnchor::MinUngrouped };
        let sets = group_variants(&variants, &genes, window, anchor).unwrap();
        let mut seen = vec![0; variants.len()];
        for set in &sets {
            prop_assert!(!set.is_empty());
            for &j in set.members() {
                seen[j] += 1;
                prop_assert_eq!(&variants[j].chromosome, &set.chromosome);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn power_grows_with_n_and_sample_size_is_minimal(
        mu in 0.001f64..0.1,
        zeta1 in 0.0001f64..0.05,
        q in 0.0f64..10.0,
        beta in 0.1f64..0.95,
    ) {
        let params = PowerParams::new(mu, zeta1, zeta1, 0.05, q).unwrap();
        let mut last = 0.0;
        for n in [10, 20, 40, 80, 160] {
            let p = asymptotic_power(n, &params).unwrap();
            prop_assert!(p >= last - 1e-12);
            last = p;
        }
        let n = required_sample_size(&params, beta).unwrap();
        prop_assert!(asymptotic_power(n, &params).unwrap() >= beta);
        if n > 1 {
            prop_assert!(asymptotic_power(n - 1, &params).unwrap() < beta);
        }
    }
}

#[test]
fn null_scans_rarely_cross_bonferroni() {
    let panel = gsu::simgen::GenotypePanel::fixture();
    let dir = tempfile::tempdir().unwrap();
    let mut clean = 0;
    for seed in 0..20u64 {
        let f = gsu::scan::fixture::write_scan_fixture(&panel, dir.path(), 200, 0.0, 500 + seed).unwrap();
        let mut config = gsu::scan::ScanConfig::new(
            &f.genotype,
            gsu::scan::PhenotypeSource::Matrix {
                path: f.phenotype.clone(),
                weights: None,
            },
        );
        config.generanges = Some(f.generanges.clone());
        config.maf_max = Some(0.05);
        let report = gsu::scan::run_scan(&config).unwrap();
        assert_eq!(report.rows.len(), 20);
        if report.significant().next().is_none() {
            clean += 1;
        }
    }
    assert!(clean >= 18, "{clean}/20 null scans without a Bonferroni hit");
}
