//! Scratch harness for tuning the synthetic mitigation setup.
//! Run: cargo run --release -p fairgi-core --example calibrate

use fairgi_core::data::{gen_synthetic, SyntheticConfig};
use fairgi_core::trainer::{fit, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let alpha: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2.0);
    let beta: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let eta: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(4.0);
    let epochs: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(300);
    let seeds: u64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(2);

    let mut rows: Vec<(String, Vec<[f64; 5]>)> = vec![
        ("vanilla".into(), vec![]),
        ("full".into(), vec![]),
        ("wo_ifg".into(), vec![]),
        ("wo_eo".into(), vec![]),
    ];

    for seed in 0..seeds {
        let graph = gen_synthetic(&SyntheticConfig {
            nodes_per_group: 1000,
            intra_p: 0.05,
            inter_p: 0.005,
            feature_dim: 8,
            label_bias: 0.8,
            seed: 1000 + seed,
        })
        .unwrap();
        let base = TrainConfig {
            epochs,
            hidden_dim: 16,
            estimator_hidden_dim: 16,
            learning_rate: 0.01,
            weight_decay: 1e-5,
            sensitive_budget: 100,
            similarity_k: 10,
            pretrain_epochs: 200,
            dropout: 0.1,
            fairness_gate: std::env::var("GATE")
                .ok()
                .and_then(|s| s.parse().ok())
                .unwrap_or(10.0),
            seed,
            ..Default::default()
        };
        let variants = [
            (0.0, 0.0, 0.0, false, false),
            (alpha, beta, eta, false, false),
            (alpha, beta, eta, true, false),
            (alpha, beta, eta, false, true),
        ];
        for (i, (a, b, e, wo_ifg, wo_eo)) in variants.iter().enumerate() {
            let config = TrainConfig {
                alpha: *a,
                beta: *b,
                eta: *e,
                disable_ifg: *wo_ifg,
                disable_eo_terms: *wo_eo,
                ..base.clone()
            };
            let t0 = std::time::Instant::now();
            let out = fit(&graph, &config, "synthetic").unwrap();
            let r = &out.report;
            println!(
                "seed {seed} {:8}: acc {:6.2} auc {:6.2} dsp {:6.2} deo {:6.2} maxig {:.5} if {:.3}  ({:.1?})",
                rows[i].0,
                r.accuracy,
                r.auc.unwrap_or(f64::NAN),
                r.delta_sp.unwrap_or(f64::NAN),
                r.delta_eo.unwrap_or(f64::NAN),
                r.max_ig,
                r.individual_fairness,
                t0.elapsed()
            );
            rows[i].1.push([
                r.accuracy,
                r.delta_sp.unwrap_or(f64::NAN),
                r.delta_eo.unwrap_or(f64::NAN),
                r.max_ig,
                r.individual_fairness,
            ]);
        }
    }
    println!("---- means over {seeds} seeds (alpha={alpha} beta={beta} eta={eta} epochs={epochs})");
    let mut means = vec![];
    for (name, vals) in &rows {
        let n = vals.len() as f64;
        let mean: Vec<f64> = (0..5)
            .map(|c| vals.iter().map(|v| v[c]).sum::<f64>() / n)
            .collect();
        println!(
            "{name:8}: acc {:6.2} dsp {:6.2} deo {:6.2} maxig {:.5} if {:.3}",
            mean[0], mean[1], mean[2], mean[3], mean[4]
        );
        means.push(mean);
    }
    let (v, f) = (&means[0], &means[1]);
    println!(
        "reductions: dsp {:.0}% (need>=50) deo {:.0}% (need>=50) maxig {:.0}% (need>=30) accdrop {:.2}pp (need<=5)",
        (1.0 - f[1] / v[1]) * 100.0,
        (1.0 - f[2] / v[2]) * 100.0,
        (1.0 - f[3] / v[3]) * 100.0,
        v[0] - f[0]
    );
    println!(
        "ablation: wo_ifg maxig {:.5} > full {:.5}: {} | wo_eo deo {:.2} > full {:.2}: {}",
        means[2][3],
        f[3],
        means[2][3] > f[3],
        means[3][2],
        f[2],
        means[3][2] > f[2]
    );
}
