mod common;

use common::*;
use geotx::fit::{fit_power_law, FitMethod};
use geotx::geostats::{daily_activity, waiting_times, ActivityFilter};
use geotx::ingest::{parse_records, write_records, Format};
use geotx::markov::{build_model, classify, estimate_transition, AddressProfiles, MarkovModel};
use geotx::model::{Dataset, ParamTriple, Role};
use geotx::rng;
use geotx::sweep::{run_sweep, Grid, SweepOptions};
use geotx::synth::{generate_dataset, RegionalEvent, SynthSpec};

#[test]
fn planted_matrix_and_stationary_recovered() {
    let mut g = rng::seeded(2);
    let planted = random_stochastic(&mut g, 0.05);
    let params = ParamTriple::from_btc(15.0, 50, 120).unwrap();
    let spec = SynthSpec::new(100_000, params, planted, continent_sites());
    let s = generate_dataset(&spec, 2).unwrap();
    let cls = classify(&s.dataset, params);
    let t = estimate_transition::<f64>(&s.dataset, &cls);
    assert!(t.max_abs_diff(&planted) <= 0.02);
    let m: MarkovModel = build_model(&s.dataset, params).unwrap();
    assert!(m.stationary.residual <= 1e-9);
    assert!(max_abs_diff(&m.stationary.pi, &stationary_svd(t.probs())) < 1e-8);
}

#[test]
fn waiting_exponent_recovered() {
    let mut spec = SynthSpec::calibration(50_000);
    spec.waiting_time.alpha = 2.0;
    let s = generate_dataset(&spec, 4).unwrap();
    let w = waiting_times(&s.dataset).unwrap();
    let fit = fit_power_law(&w.seconds(), FitMethod::Mle).unwrap();
    assert!((fit.alpha - 2.0).abs() < 0.05, "{fit:?}");
}

#[test]
fn regional_step_visible_in_daily_counts() {
    let mut spec = SynthSpec::new(
        80_000,
        ParamTriple::from_btc(15.0, 50, 120).unwrap(),
        [[1.0 / 9.0; 9]; 9],
        continent_sites(),
    );
    spec.utxo_linkage_rate = 0.0;
    spec.regional_events = vec![RegionalEvent {
        country_code: "CN".into(),
        date: "2013-12-05".into(),
        multiplier: 0.2,
    }];
    let s = generate_dataset(&spec, 6).unwrap();
    let cn = daily_activity(&s.dataset, Some(&ActivityFilter::Country("CN".into()))).unwrap();
    let step = cn.iter().position(|d| d.date == "2013-12-05").unwrap();
    let mean = |d: &[geotx::geostats::DailyCount]| d.iter().map(|x| x.count as f64).sum::<f64>() / d.len() as f64;
    let ratio = mean(&cn[step..cn.len() - 1]) / mean(&cn[..step]);
    assert!((ratio - 0.2).abs() < 0.03, "{ratio}");
    let de = daily_activity(&s.dataset, Some(&ActivityFilter::Country("DE".into()))).unwrap();
    let ratio_de = mean(&de[step..de.len() - 1]) / mean(&de[..step]);
    assert!((ratio_de - 1.0).abs() < 0.1, "{ratio_de}");
}

#[test]
fn random_specs_roles_and_monotonicity() {
    let mut g = rng::seeded(77);
    for i in 0..10 {
        let spec = random_spec(&mut g, 8000);
        let s = generate_dataset(&spec, i).unwrap();
        let prof = AddressProfiles::new(&s.dataset);
        let p = spec.planted_params;
        assert_eq!(prof.classify(p).assignment, s.planted_assignment);
        let merchants = |tx_merch| {
            prof.classify(ParamTriple::new(p.val, p.tx_miner, tx_merch).unwrap())
                .role_count(Role::Merchant)
        };
        let counts: Vec<usize> = (0..6).map(|k| merchants(p.tx_merch + 20 * k)).collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
        let max_sent = s.dataset.records().iter().map(|r| r.value).max().unwrap();
        let high = ParamTriple::new(geotx::model::Satoshi(max_sent.0 + 1), p.tx_miner, p.tx_merch).unwrap();
        assert_eq!(prof.classify(high).role_count(Role::Miner), 0);
    }
}

#[test]
fn synth_output_survives_ingest_round_trip() {
    let s = generate_dataset(&SynthSpec::calibration(20_000), 1).unwrap();
    for format in [Format::Csv, Format::Jsonl] {
        let mut buf = Vec::new();
        write_records(&mut buf, s.dataset.records(), format).unwrap();
        let (records, report) = parse_records(buf.as_slice(), format).unwrap();
        assert_eq!(report.rejected, 0);
        let back = Dataset::with_window(records, s.dataset.window()).unwrap();
        assert_eq!(back.records(), s.dataset.records());
    }
}

#[test]
fn sweep_finds_planted_triple() {
    let spec = SynthSpec::calibration(20_000);
    let s = generate_dataset(&spec, 12).unwrap();
    let r = run_sweep(&s.dataset, &Grid::default(), &SweepOptions::new(12)).unwrap();
    assert_eq!(r.rows.len(), 125);
    assert_eq!(r.best.params, spec.planted_params);
}
