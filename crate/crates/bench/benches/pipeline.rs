use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use csci_core::analytics::{build_cross_sections, fama_macbeth, FmControl};
use csci_core::pipeline::{score_panel, PipelineConfig};
use csci_core::portfolio::{default_start, run_backtest, PortfolioKind, PortfolioSpec};
use csci_core::standards::{default_rules, evaluate_standard, fit_tau, DEFAULT_GRID_STEP};
use csci_core::synthgen::{generate, SynthConfig, SynthData};
use csci_core::{ScoreConfig, ScoredPanel};
use std::hint::black_box;

fn data() -> SynthData {
    generate(&SynthConfig {
        n_firms: 300,
        n_months: 180,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn scored(d: &SynthData) -> ScoredPanel {
    score_panel(
        d.accounting.clone(),
        d.market.clone(),
        &d.links,
        &d.sectors,
        &PipelineConfig::default(),
    )
    .unwrap()
}

fn bench_pipeline(c: &mut Criterion) {
    let d = data();
    let panel = scored(&d);

    c.bench_function("synthgen_300x180", |b| {
        let cfg = SynthConfig {
            n_firms: 300,
            n_months: 180,
            ..SynthConfig::default()
        };
        b.iter(|| generate(black_box(&cfg)).unwrap())
    });

    c.bench_function("score_panel_300x180", |b| {
        b.iter_batched(
            || (d.accounting.clone(), d.market.clone()),
            |(acc, mkt)| score_panel(acc, mkt, &d.links, &d.sectors, &PipelineConfig::default()).unwrap(),
            BatchSize::LargeInput,
        )
    });

    let rule = default_rules().into_iter().find(|r| r.name == "DJIM").unwrap();
    let pass = evaluate_standard(&rule, &panel, &d.sectors, &ScoreConfig::default().sector).unwrap();
    let csci: Vec<Option<f64>> = panel.rows.iter().map(|r| r.csci()).collect();
    c.bench_function("fit_tau", |b| {
        b.iter(|| fit_tau("DJIM", black_box(&pass), black_box(&csci), DEFAULT_GRID_STEP).unwrap())
    });

    let start = default_start(&panel).unwrap();
    let end = panel.last_month().unwrap();
    let mut group = c.benchmark_group("backtest");
    for (name, kind) in [
        ("market", PortfolioKind::Market),
        ("threshold_0.7", PortfolioKind::Threshold(0.7)),
        ("tilt_2", PortfolioKind::Tilt(2.0)),
    ] {
        let spec = PortfolioSpec::new(kind);
        group.bench_function(name, |b| b.iter(|| run_backtest(&spec, &panel, None, start, end).unwrap()));
    }
    group.finish();

    c.bench_function("fama_macbeth", |b| {
        b.iter(|| {
            let (names, sections) =
                build_cross_sections(&panel, &d.factors, &[FmControl::LogSize], None).unwrap();
            fama_macbeth(&names, &sections).unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_pipeline
}
criterion_main!(benches);
