//! Temporary calibration probes (run with --ignored --nocapture).

use lvtopo::cluster;
use lvtopo::correlate::{distance_matrix, pcc, CorrelationConfig};
use lvtopo::metrics;
use lvtopo::model::{DistanceKind, LabelSet};
use lvtopo::select::{self, TimeWindow};
use lvtopo::synth::{self, NetworkTemplate, PerNodeConnection, PhaseMode, ProfileConfig, Season, SwitchSpec, Variant};

fn quantiles(mut v: Vec<f64>) -> (f64, f64, f64, f64, f64) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| v[(p * (v.len() - 1) as f64) as usize];
    (q(0.0), q(0.05), q(0.5), q(0.95), q(1.0))
}

#[test]
#[ignore]
fn probe_feeder_correlations() {
    for phase_mode in [PhaseMode::SinglePhase, PhaseMode::ThreePhaseNonUniform] {
        let tmpl = NetworkTemplate::new(Variant::CN1, 2, 49, PerNodeConnection::Multiple, phase_mode);
        let profile = ProfileConfig { days: 14, ..Default::default() };
        let ds = synth::generate(&tmpl, &profile, None, 1).unwrap();
        let noisy = synth::inject_noise(&ds.panel, 0.5, 1).unwrap();
        let ds = synth::Dataset { panel: noisy, ..ds };
        let cfg = CorrelationConfig::default();

        let mut within = Vec::new();
        let mut cross = Vec::new();
        let n = ds.panel.meters();
        for i in 0..n {
            for j in (i + 1)..n {
                let rho = pcc(
                    ds.panel.values_row(i),
                    ds.panel.mask_row(i),
                    ds.panel.values_row(j),
                    ds.panel.mask_row(j),
                    &cfg,
                )
                .unwrap();
                let same = ds.meter_ids[i].starts_with("F1") == ds.meter_ids[j].starts_with("F1");
                if same {
                    within.push(rho);
                } else {
                    cross.push(rho);
                }
            }
        }
        println!("== {phase_mode:?}");
        println!("  within rho  (min/5%/med/95%/max): {:?}", quantiles(within));
        println!("  cross rho   (min/5%/med/95%/max): {:?}", quantiles(cross));

        // clustering accuracy across a values
        for a in [0.0, -8.0, -10.0, -12.0, -14.0, -16.0] {
            let ccfg = CorrelationConfig { a, ..Default::default() };
            let mut accs = Vec::new();
            for seed in 0..6 {
                let ds = synth::generate(&tmpl, &profile, None, seed).unwrap();
                let noisy = synth::inject_noise(&ds.panel, 0.5, seed).unwrap();
                let r = cluster::identify_feeders(&noisy, &ds.meter_ids, 2, &ccfg).unwrap();
                let acc = metrics::aligned_accuracy(&r.labels, &ds.feeder_truth).unwrap();
                accs.push(acc);
            }
            println!("  a={a:>6}: accs {accs:?}");
        }
    }
}

#[test]
#[ignore]
fn probe_phase_identification() {
    let tmpl = NetworkTemplate::new(
        Variant::CN1,
        2,
        49,
        PerNodeConnection::Multiple,
        PhaseMode::ThreePhaseNonUniform,
    );
    for season in [Season::Summer, Season::Winter] {
        println!("== {season:?}");
        for seed in 0..5 {
            let profile = ProfileConfig {
                days: 14,
                season,
                pv_penetration: 1.0,
                pv_peak_kw: 1.5,
                ..Default::default()
            };
            let ds = synth::generate(&tmpl, &profile, None, seed).unwrap();
            let noisy = synth::inject_noise(&ds.panel, 0.5, seed).unwrap();
            let ds = synth::Dataset { panel: noisy, ..ds };
            // restrict to feeder F1
            let rows: Vec<usize> = ds
                .meter_ids
                .iter()
                .enumerate()
                .filter(|(_, m)| m.starts_with("F1"))
                .map(|(i, _)| i)
                .collect();
            let ids: Vec<String> = rows.iter().map(|&i| ds.meter_ids[i].clone()).collect();
            let sub = ds.panel.restrict_rows(&rows).unwrap();
            let truth: LabelSet = ds.phase_truth.filtered(|m| m.starts_with("F1"));
            let cfg = CorrelationConfig::default();

            let raw = cluster::identify_phases(&sub, &ids, &cfg).unwrap();
            let raw_purity = metrics::purity(&raw.labels, &truth).unwrap();

            let filtered = select::select_time(&sub, &TimeWindow::pv_filter()).unwrap();
            let filt = cluster::identify_phases(&filtered, &ids, &cfg).unwrap();
            let filt_purity = metrics::purity(&filt.labels, &truth).unwrap();
            println!("  seed {seed}: unfiltered {raw_purity:.4}  filtered {filt_purity:.4}");
        }
    }
}

#[test]
#[ignore]
fn probe_switch_identification() {
    use lvtopo::switchid::{predict_forest, train_forest, ForestConfig};
    let tmpl = NetworkTemplate::new(
        Variant::SN,
        3,
        49,
        PerNodeConnection::Single,
        PhaseMode::SinglePhase,
    );
    let profile = ProfileConfig { days: 60, ..Default::default() };
    let spec = SwitchSpec::default();
    for sm_count in [2usize, 10, 49] {
        let mut accs = Vec::new();
        for seed in 0..3 {
            let ds = synth::generate(&tmpl, &profile, Some(&spec), seed).unwrap();
            let noisy = synth::inject_noise(&ds.panel, 0.8, seed).unwrap();
            let ds = synth::Dataset { panel: noisy, ..ds };
            let truth = ds.switch_truth.as_ref().unwrap();
            let bar = ds.topology.bar(&truth.bar_id).unwrap();
            // night window
            let cols = select::selected_columns(&ds.panel, &TimeWindow::pv_filter()).unwrap();
            let panel = ds.panel.restrict_columns(&cols).unwrap();
            let labels: Vec<u32> = cols.iter().map(|&c| truth.labels[c]).collect();
            let (sel_panel, _sel_ids) = select::uniform_sm_selection(
                &panel,
                &ds.meter_ids,
                &ds.topology,
                bar,
                Some(sm_count),
            )
            .unwrap();
            // rows = timesteps
            let split = (sel_panel.steps() as f64 * 0.75) as usize;
            let mut train_rows = Vec::new();
            for t in 0..split {
                let row: Vec<f64> =
                    (0..sel_panel.meters()).map(|m| sel_panel.value(m, t)).collect();
                train_rows.push((row, labels[t]));
            }
            let catalog: Vec<u32> = (0..bar.class_count() as u32).collect();
            let balanced = select::balanced_sampling(&train_rows, &catalog, seed).unwrap();
            let (matrix, y) = select::assemble_training_matrix(&balanced, &catalog).unwrap();
            let cfg = ForestConfig { tree_count: 60, rng_seed: seed, ..Default::default() };
            let forest = train_forest(&matrix, &y, &cfg).unwrap();
            let mut hits = 0;
            let mut total = 0;
            for t in split..sel_panel.steps() {
                let row: Vec<f64> =
                    (0..sel_panel.meters()).map(|m| sel_panel.value(m, t)).collect();
                let (pred, _) = predict_forest(&forest, &row).unwrap();
                total += 1;
                if pred == labels[t] {
                    hits += 1;
                }
            }
            accs.push(hits as f64 / total as f64);
        }
        println!("sm_count {sm_count}: accs {accs:?}");
    }
}

#[test]
#[ignore]
fn probe_assignment() {
    use lvtopo::assign;
    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;
    let tmpl = NetworkTemplate::new(
        Variant::CN1,
        2,
        49,
        PerNodeConnection::Multiple,
        PhaseMode::ThreePhaseNonUniform,
    );
    let profile = ProfileConfig { days: 14, ..Default::default() };
    let cfg = CorrelationConfig { a: -8.0, ..Default::default() };
    for (unknown_frac, k) in [(0.1, 1usize), (0.5, 8)] {
        let mut knn_accs = Vec::new();
        let mut mfp_accs = Vec::new();
        for seed in 0..6u64 {
            let ds = synth::generate(&tmpl, &profile, None, seed).unwrap();
            let panel = synth::inject_noise(&ds.panel, 0.5, seed).unwrap();
            let n = ds.meter_ids.len();
            let n_unknown = (unknown_frac * n as f64).round() as usize;
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            order.shuffle(&mut rng);
            let mut known = LabelSet::new();
            for (rank, &i) in order.iter().enumerate() {
                let m = &ds.meter_ids[i];
                if rank < n_unknown {
                    known.insert_unknown(m.clone());
                } else {
                    known.insert_known(m.clone(), ds.feeder_truth.label(m).unwrap());
                }
            }
            let eval = |out: &LabelSet| {
                let mut hit = 0;
                let mut tot = 0;
                for (rank, &i) in order.iter().enumerate() {
                    if rank < n_unknown {
                        let m = &ds.meter_ids[i];
                        tot += 1;
                        if out.label(m) == ds.feeder_truth.label(m) {
                            hit += 1;
                        }
                    }
                }
                hit as f64 / tot as f64
            };
            let knn = assign::knn_assign(&panel, &ds.meter_ids, &known, k, &cfg).unwrap();
            let mfp = assign::mfp_assign(&panel, &ds.meter_ids, &known, k, &cfg).unwrap();
            knn_accs.push(eval(&knn));
            mfp_accs.push(eval(&mfp));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "unknown {unknown_frac} k={k}: knn mean {:.4} {knn_accs:?}",
            mean(&knn_accs)
        );
        println!(
            "unknown {unknown_frac} k={k}: mfp mean {:.4} {mfp_accs:?}",
            mean(&mfp_accs)
        );
    }
}
