use ctperf_core::deconv::Deconvolver;
use ctperf_core::perfmaps::tmax_map;
use ctperf_core::progression::{evolve, final_infarct, ReperfusionTable};
use ctperf_core::triage::{evaluate_mismatch, segment_core, LesionMasks, MismatchCriterion, Mtici};
use ctperf_core::*;
use proptest::prelude::*;

const SMALL: Dims = Dims {
    nx: 4,
    ny: 4,
    nz: 2,
};

fn acq() -> TimeGrid {
    TimeGrid::default_acquisition()
}

fn aif() -> Curve {
    AifParams::default().curve(&acq()).unwrap()
}

fn hemo() -> impl Strategy<Value = HemoParams> {
    (1.0f64..100.0, 1.0f64..12.0, 0usize..6, prop::bool::ANY).prop_map(|(cbf, mtt, d, exp)| {
        HemoParams {
            cbf,
            cbv: cbf * mtt / 60.0,
            delay: 2.0 * d as f64,
            residue_shape: if exp {
                ResidueShape::Exponential
            } else {
                ResidueShape::Boxcar
            },
        }
    })
}

fn tcc(p: &HemoParams, aif: &Curve) -> Vec<f64> {
    ctperf_core::phantom::tissue_curve(p, aif)
}

fn rel_close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * scale.max(f64::MIN_POSITIVE)
}

fn maps_from(rcbf: Vec<f64>, tmax: Vec<f64>) -> PerfusionMaps {
    let z = Volume::filled(SMALL, 0.0);
    PerfusionMaps {
        voxel_size: VoxelSize::default(),
        brain: Mask::filled(SMALL, true),
        tmax: Volume::from_vec(SMALL, tmax).unwrap(),
        cbf: z.clone(),
        cbv: z.clone(),
        mtt: z,
        mtt_valid: Mask::filled(SMALL, false),
        rcbf: Some(Volume::from_vec(SMALL, rcbf).unwrap()),
        rcbv: None,
        delay: None,
    }
}

fn mask_strategy() -> impl Strategy<Value = Mask> {
    prop::collection::vec(prop::bool::ANY, SMALL.len())
        .prop_map(|v| Mask::from_vec(SMALL, v).unwrap())
}

fn mtici() -> impl Strategy<Value = Mtici> {
    prop::sample::select(Mtici::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_model_is_linear_in_aif(p in hemo(), k in 0.01f64..100.0) {
        let a = aif();
        let base = tcc(&p, &a);
        let scaled = tcc(&p, &a.scaled(k));
        let peak = base.iter().cloned().fold(0.0, f64::max);
        for (s, b) in scaled.iter().zip(&base) {
            prop_assert!(rel_close(*s, k * b, 1e-12, k * peak));
        }
    }

    #[test]
    fn forward_model_is_causal(p in hemo(), t0 in 0usize..10) {
        let g = acq();
        let a = AifParams { t0: 2.0 * t0 as f64, ..AifParams::default() }.curve(&g).unwrap();
        let c = tcc(&p, &a);
        for (k, v) in c.iter().enumerate() {
            if g.time(k) <= 2.0 * t0 as f64 + p.delay {
                prop_assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn delay_shifts_by_whole_samples(p in hemo(), m in 0usize..8) {
        let a = aif();
        let base = tcc(&p, &a);
        let moved = tcc(&HemoParams { delay: p.delay + 2.0 * m as f64, ..p }, &a);
        let peak = base.iter().cloned().fold(0.0, f64::max);
        for k in 0..base.len() {
            let want = if k >= m { base[k - m] } else { 0.0 };
            prop_assert!(rel_close(moved[k], want, 1e-12, peak));
        }
    }

    #[test]
    fn noise_is_seed_deterministic(seed in any::<u64>(), sigma in 0.0f64..5.0) {
        let s = CtpSeries::zeros(SMALL, acq(), VoxelSize::default());
        let a = add_noise(&s, sigma, seed).unwrap();
        let b = add_noise(&s, sigma, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn joint_scaling_leaves_irf_unchanged(p in hemo(), k in 0.05f64..50.0, csvd in prop::bool::ANY, lambda in 0.0f64..0.3) {
        let m = if csvd { Method::Csvd } else { Method::Ssvd };
        let a = aif();
        let c = tcc(&p, &a);
        let r1 = Deconvolver::new(&a, m, lambda).unwrap().solve(&c);
        let ck: Vec<f64> = c.iter().map(|v| v * k).collect();
        let r2 = Deconvolver::new(&a.scaled(k), m, lambda).unwrap().solve(&ck);
        let scale = r1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in r1.iter().zip(&r2) {
            prop_assert!(rel_close(*x, *y, 1e-9, scale));
        }
    }

    #[test]
    fn irf_is_linear_in_tcc(p in hemo(), k in 0.05f64..50.0, csvd in prop::bool::ANY, lambda in 0.0f64..0.3) {
        let m = if csvd { Method::Csvd } else { Method::Ssvd };
        let a = aif();
        let op = Deconvolver::new(&a, m, lambda).unwrap();
        let c = tcc(&p, &a);
        let r1 = op.solve(&c);
        let r2 = op.solve(&c.iter().map(|v| v * k).collect::<Vec<_>>());
        let scale = r1.iter().fold(0.0f64, |m, v| m.max(v.abs())) * k;
        for (x, y) in r1.iter().zip(&r2) {
            prop_assert!(rel_close(k * x, *y, 1e-9, scale));
        }
    }

    #[test]
    fn more_truncation_never_grows_the_irf(
        noise in prop::collection::vec(-0.01f64..0.01, 30),
        p in hemo(),
        l1 in 0.0f64..0.5,
        dl in 0.0f64..0.5,
        csvd in prop::bool::ANY,
    ) {
        let m = if csvd { Method::Csvd } else { Method::Ssvd };
        let a = aif();
        let c: Vec<f64> = tcc(&p, &a).iter().zip(&noise).map(|(x, n)| x + n).collect();
        let norm = |l: f64| {
            Deconvolver::new(&a, m, l).unwrap().solve(&c).iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let (lo, hi) = (norm(l1), norm((l1 + dl).min(0.99)));
        prop_assert!(hi <= lo * (1.0 + 1e-9) + 1e-12, "{} > {}", hi, lo);
    }

    #[test]
    fn csvd_tracks_delay(cbf in 1.0f64..100.0, mtt in 1.0f64..6.0, m in 0usize..5) {
        // Exponential residues peak at a single sample; boxcar plateaus make argmax ambiguous.
        let p = HemoParams::new(cbf, cbf * mtt / 60.0, 0.0, ResidueShape::Exponential).unwrap();
        let a = aif();
        let op = Deconvolver::new(&a, Method::Csvd, 0.01).unwrap();
        let base = op.solve(&tcc(&p, &a));
        let moved = op.solve(&tcc(&HemoParams { delay: 2.0 * m as f64, ..p }, &a));
        let (k0, v0) = argmax(&base);
        let (k1, v1) = argmax(&moved);
        prop_assert_eq!(k1, k0 + m);
        prop_assert!((v1 / v0 - 1.0).abs() < 0.02, "{} vs {}", v1, v0);
    }

    #[test]
    fn tmax_ignores_positive_scaling(vals in prop::collection::vec(-1.0f64..1.0, SMALL.len() * 8), k in 0.01f64..100.0) {
        let g = TimeGrid::new(0.0, 2.0, 8).unwrap();
        let mk = |s: f64| IrfMap::from_voxel_major(SMALL, g, VoxelSize::default(), Method::Ssvd, 0.1, vals.iter().map(|v| v * s).collect()).unwrap();
        prop_assert_eq!(tmax_map(&mk(1.0)), tmax_map(&mk(k)));
    }

    #[test]
    fn lower_core_threshold_never_grows_core(
        rcbf in prop::collection::vec(0.0f64..1.5, SMALL.len()),
        t1 in 0.01f64..0.99,
        t2 in 0.01f64..0.99,
    ) {
        let maps = maps_from(rcbf, vec![0.0; SMALL.len()]);
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        prop_assert!(segment_core(&maps, lo).unwrap().is_subset_of(&segment_core(&maps, hi).unwrap()));
    }

    #[test]
    fn report_volumes_add_up(core in mask_strategy(), lesion in mask_strategy()) {
        let masks = LesionMasks::new(core.clone(), lesion.clone(), VoxelSize::default()).unwrap();
        let r = evaluate_mismatch(&masks, &triage::builtin_criteria()).unwrap();
        prop_assert!((r.core_ml + r.penumbra_ml - r.lesion_ml).abs() < 1e-12);
        prop_assert_eq!(r.inconsistent_voxels, core.and_not(&lesion).unwrap().count());
        prop_assert!((r.diff_ml - (r.lesion_ml - r.core_ml)).abs() < 1e-12);
    }

    #[test]
    fn enlarging_lesion_keeps_true_verdicts(core in mask_strategy(), lesion in mask_strategy(), extra in mask_strategy()) {
        let crit = vec![MismatchCriterion::new("tiny", 0.01, 1.1, 0.2).unwrap()];
        let before = evaluate_mismatch(&LesionMasks::new(core.clone(), lesion.clone(), VoxelSize::default()).unwrap(), &crit).unwrap();
        let bigger = lesion.or(&extra).unwrap();
        let after = evaluate_mismatch(&LesionMasks::new(core, bigger, VoxelSize::default()).unwrap(), &crit).unwrap();
        if before.verdicts["tiny"] {
            prop_assert!(after.verdicts["tiny"]);
        }
    }

    #[test]
    fn verdicts_match_brute_force(
        core_ml in 0.0f64..150.0,
        extra in 0.0f64..150.0,
        diff in 0.0f64..40.0,
        ratio in 1.0f64..4.0,
        cap in 1.0f64..150.0,
    ) {
        let c = MismatchCriterion::new("c", diff, ratio, cap).unwrap();
        let lesion_ml = core_ml + extra;
        let r = if core_ml > 0.0 { lesion_ml / core_ml } else if lesion_ml > 0.0 { f64::INFINITY } else { f64::NAN };
        let want = (lesion_ml - core_ml > diff) && (r > ratio) && (core_ml < cap);
        prop_assert_eq!(c.verdict(core_ml, lesion_ml), want);
    }

    #[test]
    fn survival_is_monotone(a in 0.0f64..40.0, b in 0.0f64..40.0) {
        let m = SurvivalModel::default();
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(survival_time(lo, &m) <= survival_time(hi, &m));
    }

    #[test]
    fn core_grows_with_time(
        cbf in prop::collection::vec(0.0f64..30.0, SMALL.len()),
        t1 in 0.0f64..300.0,
        dt in 0.0f64..300.0,
        ev in prop::option::of((0.0f64..300.0, mtici())),
    ) {
        let normal = Volume::filled(SMALL, 50.0);
        let cbf = Volume::from_vec(SMALL, cbf).unwrap();
        let m = SurvivalModel::default();
        let t2 = t1 + dt;
        let ev = ev.map(|(ttt, g)| TreatmentEvent::new(ttt.min(t1), g));
        let a = evolve(&cbf, &m, t1, ev.as_ref(), &normal).unwrap();
        let b = evolve(&cbf, &m, t2, ev.as_ref(), &normal).unwrap();
        prop_assert!(a.core_mask.is_subset_of(&b.core_mask));
    }

    #[test]
    fn better_grade_and_earlier_treatment_shrink_core(
        cbf in prop::collection::vec(0.0f64..30.0, SMALL.len()),
        t in 0.0f64..400.0,
        ttt_a in 0.0f64..400.0,
        ttt_b in 0.0f64..400.0,
        g1 in mtici(),
        g2 in mtici(),
    ) {
        let normal = Volume::filled(SMALL, 50.0);
        let cbf = Volume::from_vec(SMALL, cbf).unwrap();
        let m = SurvivalModel::default();
        let (early, late) = (ttt_a.min(ttt_b).min(t), ttt_a.max(ttt_b).min(t));
        let (lo, hi) = (g1.min(g2), g1.max(g2));
        let core = |ttt: f64, g: Mtici| evolve(&cbf, &m, t, Some(&TreatmentEvent::new(ttt, g)), &normal).unwrap().core_mask;
        prop_assert!(core(late, hi).is_subset_of(&core(late, lo)));
        prop_assert!(core(early, hi).is_subset_of(&core(late, hi)));
    }

    #[test]
    fn reperfusers_never_exceed_non_reperfusers(core in mask_strategy(), lesion in mask_strategy()) {
        let r = final_infarct(&core, &lesion, true).unwrap();
        let n = final_infarct(&core, &lesion, false).unwrap();
        prop_assert!(r.is_subset_of(&n));
        prop_assert_eq!(r, core);
    }
}

fn argmax(x: &[f64]) -> (usize, f64) {
    x.iter().enumerate().fold(
        (0, f64::MIN),
        |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) },
    )
}

#[test]
fn all_eight_sub_condition_combinations() {
    let criteria = [
        MismatchCriterion::new("dawn", 15.0, 1.8, 70.0).unwrap(),
        MismatchCriterion::new("odd", 100.0, 1.2, 10.0).unwrap(),
    ];
    let mut seen = [false; 8];
    for c in &criteria {
        for core in [0.0, 2.0, 5.0, 20.0, 50.0, 69.0, 70.0, 80.0, 120.0] {
            for lesion in [
                0.0, 5.0, 9.0, 10.0, 20.0, 30.0, 40.0, 60.0, 100.0, 126.0, 150.0, 300.0,
            ] {
                let diff_ok = lesion - core > c.min_diff_ml;
                let ratio_ok = if core > 0.0 {
                    lesion / core > c.min_ratio
                } else {
                    lesion > 0.0
                };
                let cap_ok = core < c.max_core_ml;
                seen[usize::from(diff_ok)
                    | usize::from(ratio_ok) << 1
                    | usize::from(cap_ok) << 2] = true;
                assert_eq!(
                    c.verdict(core, lesion),
                    diff_ok && ratio_ok && cap_ok,
                    "{} {core} {lesion}",
                    c.name
                );
            }
        }
    }
    assert!(seen.iter().all(|&s| s), "{seen:?}");
}

#[test]
fn default_reperfusion_table_is_monotone() {
    let t = ReperfusionTable::default();
    t.validate().unwrap();
    let f: Vec<f64> = Mtici::ALL.iter().map(|&g| t.fraction(g)).collect();
    assert_eq!(f, vec![0.0, 0.1, 0.4, 0.7, 0.9, 1.0]);
}
