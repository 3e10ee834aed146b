//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//!     cargo test --release --test acceptance

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use common::*;
use geoaudit::audit::{
    counterfactual_relocation, geo_bias_report, proxy_swap_experiment, regional_curves,
    TargetSampler,
};
use geoaudit::data::{
    generate_synthetic, temporal_split, CensusTable, Dataset, Region, RegionMapping, Split,
    SynthConfig, GEO_FEATURE,
};
use geoaudit::gbt::{fit, Ensemble, NodeKind, TrainConfig, Tree, TreeNode};
use geoaudit::metrics::{rate_curves, roc, threshold_grid};
use geoaudit::shap::{shap_exact, shap_tree, ShapEngine};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Fixture {
    cfg: SynthConfig,
    census: CensusTable,
    full: Dataset,
    split: Split,
    model: Ensemble,
    build_secs: f64,
}

fn paper() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let t = Instant::now();
        let cfg = SynthConfig::paper();
        let (full, census) = generate_synthetic(&cfg).unwrap();
        let split = temporal_split(&full, cfg.split_cutoff);
        let model = fit(&split.train, &TrainConfig::default()).unwrap();
        Fixture {
            cfg,
            census,
            full,
            split,
            model,
            build_secs: t.elapsed().as_secs_f64(),
        }
    })
}

fn c01_shapley_oracle() -> Outcome {
    let t = Instant::now();
    let mut runner = TestRunner::new(Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    });
    let worst = std::cell::Cell::new(0.0f64);
    let strategy = (1usize..=5, 1usize..=20, 1usize..=3, any::<u64>());
    runner
        .run(&strategy, |(nf, nt, depth, seed)| {
            let mut r = rng(seed);
            let m = random_ensemble(&mut r, nf, nt, depth);
            let row = random_row(&mut r, nf);
            let a = shap_tree(&m, &row).unwrap();
            let b = shap_exact(&m, &row).unwrap();
            let d = a
                .phi
                .iter()
                .zip(&b.phi)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            worst.set(worst.get().max(d));
            prop_assert!(d < 1e-9, "max |dphi| {d}");
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1}s");
    Ok(format!(
        "256 instances, max |dphi| {:.1e}, {secs:.2}s",
        worst.get()
    ))
}

fn c02_local_accuracy() -> Outcome {
    let f = paper();
    ensure!(
        f.model.n_features() == 10,
        "model has {} features",
        f.model.n_features()
    );
    let rows = &f.split.eval.rows()[..1000];
    let mut worst = 0.0f64;
    for r in rows {
        let a = shap_tree(&f.model, &r.features).map_err(|e| e.to_string())?;
        let m = f.model.predict_margin(&r.features).unwrap();
        worst = worst.max((a.output() - m).abs());
    }
    ensure!(worst < 1e-6, "max residual {worst:e}");
    Ok(format!(
        "1000 eval rows, max |base + sum(phi) - margin| {worst:.1e}"
    ))
}

fn mirror(t: &Tree) -> Tree {
    let nodes = t
        .nodes()
        .iter()
        .map(|n| match n.kind {
            NodeKind::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => TreeNode::split(1 - feature, threshold, left, right, n.cover),
            NodeKind::Leaf { weight } => TreeNode::leaf(weight, n.cover),
        })
        .collect();
    Tree::new(nodes).unwrap()
}

fn c03_dummy_symmetry() -> Outcome {
    let mut r = rng(3);
    for case in 0..200 {
        // features 1 and 3 never split
        let trees = (0..r.random_range(1..=10))
            .map(|_| random_tree(&mut r, &[0, 2, 4], 3))
            .collect();
        let m = Ensemble::new(schema(5), 0.2, 0.5, trees).unwrap();
        let row = random_row(&mut r, 5);
        for phi in [
            shap_tree(&m, &row).unwrap().phi,
            shap_exact(&m, &row).unwrap().phi,
        ] {
            ensure!(
                phi[1] == 0.0 && phi[3] == 0.0,
                "case {case}: dummy phi {:?}",
                phi
            );
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let trees: Vec<Tree> = (0..r.random_range(1..=5))
            .flat_map(|_| {
                let t = random_tree(&mut r, &[0, 1], 3);
                let u = mirror(&t);
                [t, u]
            })
            .collect();
        let m = Ensemble::new(schema(2), -0.3, 0.7, trees).unwrap();
        let v = random_row(&mut r, 1)[0];
        for phi in [
            shap_tree(&m, &[v, v]).unwrap().phi,
            shap_exact(&m, &[v, v]).unwrap().phi,
        ] {
            worst = worst.max((phi[0] - phi[1]).abs());
        }
    }
    ensure!(worst < 1e-9, "symmetric |phi1 - phi2| {worst:e}");
    Ok(format!(
        "dummy phi exactly 0 over 200 models; symmetric max |phi1 - phi2| {worst:.1e}"
    ))
}

fn c04_gbt() -> Outcome {
    let mut worst_w = 0.0f64;
    let mut worst_gain = 0.0f64;
    let mut n_checked = 0;
    for seed in 0..12u64 {
        let mut r = rng(100 + seed);
        let ds = random_training_set(&mut r, 150 + 20 * seed as usize, 4);
        let cfg = TrainConfig {
            n_trees: 12,
            max_depth: 1 + (seed % 3) as usize,
            shrinkage: [0.1, 0.3, 0.5][seed as usize % 3],
            lambda: [1.0, 0.5, 2.0, 0.0][seed as usize % 4] + 0.1,
            gamma: [0.0, 0.05][seed as usize % 2],
            min_child_cover: [0.0, 1.0, 3.0][seed as usize % 3],
            seed,
        };
        let m = fit(&ds, &cfg).map_err(|e| e.to_string())?;
        let mut prev = f64::INFINITY;
        for k in 0..=m.trees().len() {
            let margins = margins_after(&m, &ds, k);
            let loss = log_loss(&margins, &ds);
            ensure!(
                loss <= prev + 1e-12,
                "seed {seed}: log-loss rose at round {k}: {prev} -> {loss}"
            );
            prev = loss;
            let Some(tree) = m.trees().get(k) else { break };
            let p: Vec<f64> = margins.iter().map(|&x| sigmoid(x)).collect();
            let g: Vec<f64> = p
                .iter()
                .zip(ds.rows())
                .map(|(p, r)| p - f64::from(u8::from(r.label)))
                .collect();
            let h: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();

            let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes().len()];
            let mut depth = vec![0usize; tree.nodes().len()];
            for (i, row) in ds.rows().iter().enumerate() {
                let mut j = 0;
                loop {
                    members[j].push(i);
                    match tree.nodes()[j].kind {
                        NodeKind::Split {
                            feature,
                            threshold,
                            left,
                            right,
                            ..
                        } => {
                            let next = if row.features[feature] < threshold {
                                left
                            } else {
                                right
                            };
                            depth[next] = depth[j] + 1;
                            j = next;
                        }
                        NodeKind::Leaf { .. } => break,
                    }
                }
            }
            for (j, node) in tree.nodes().iter().enumerate() {
                let rows = &members[j];
                let best = rescan_best_split(
                    &ds,
                    rows,
                    &g,
                    &h,
                    cfg.lambda,
                    cfg.gamma,
                    cfg.min_child_cover,
                );
                match node.kind {
                    NodeKind::Leaf { weight } => {
                        let gs: f64 = rows.iter().map(|&i| g[i]).sum();
                        let hs: f64 = rows.iter().map(|&i| h[i]).sum();
                        worst_w = worst_w.max((weight + gs / (hs + cfg.lambda)).abs());
                        if depth[j] < cfg.max_depth {
                            if let Some((b, ..)) = best {
                                ensure!(
                                    b <= 1e-9,
                                    "seed {seed} tree {k} node {j}: leaf left gain {b} unused"
                                );
                            }
                        }
                    }
                    NodeKind::Split { gain, .. } => {
                        let (b, ..) =
                            best.ok_or_else(|| format!("seed {seed}: split with no candidate"))?;
                        worst_gain = worst_gain.max((gain - b).abs());
                        n_checked += 1;
                    }
                }
            }
        }
    }
    ensure!(worst_w < 1e-10, "leaf weight error {worst_w:e}");
    ensure!(worst_gain < 1e-9, "gain error {worst_gain:e}");

    let hand = dataset(
        [0.0, 1.0, 2.0, 3.0]
            .iter()
            .zip([false, false, true, true])
            .map(|(&x, y)| (vec![x], y))
            .collect(),
        schema(1),
    );
    let cfg = TrainConfig {
        n_trees: 1,
        max_depth: 1,
        shrinkage: 1.0,
        lambda: 1.0,
        gamma: 0.0,
        min_child_cover: 0.0,
        seed: 0,
    };
    let m = fit(&hand, &cfg).map_err(|e| e.to_string())?;
    let margins: Vec<f64> = [0.0, 1.0, 2.0, 3.0]
        .iter()
        .map(|&x| m.predict_margin(&[x]).unwrap())
        .collect();
    ensure!(
        margins == [-2.0 / 3.0, -2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0],
        "hand example margins {margins:?}"
    );
    ensure!(
        matches!(
            m.trees()[0].nodes()[0].kind,
            NodeKind::Split {
                feature: 0,
                threshold: 1.5,
                ..
            }
        ),
        "hand example root split"
    );
    Ok(format!(
        "leaf weight err {worst_w:.1e}, gain err {worst_gain:.1e} over {n_checked} splits; log-loss monotone; 4-row example exact"
    ))
}

fn c05_metrics() -> Outcome {
    let grid = threshold_grid(101).unwrap();
    let mut r = rng(5);
    let mut worst_auc = 0.0f64;
    for case in 0..100 {
        let n = r.random_range(2..300);
        // coarse score levels force ties, some exactly on grid points
        let levels = r.random_range(2..40) as f64;
        let mut scores: Vec<f64> = (0..n)
            .map(|_| (r.random_range(0.0..=levels)).round() / levels)
            .collect();
        let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        if case % 10 == 0 {
            scores.iter_mut().for_each(|s| *s = 0.5);
        }
        let suite = rate_curves(&scores, &labels, &grid).map_err(|e| e.to_string())?;
        for (i, &t) in grid.iter().enumerate() {
            let c = suite.counts[i];
            ensure!(
                (c.tp, c.fp, c.tn, c.fn_) == brute_confusion(&scores, &labels, t),
                "case {case} t={t}: counts differ"
            );
        }
        let auc = roc(&scores, &labels).map_err(|e| e.to_string())?.auc;
        worst_auc = worst_auc.max((auc - mann_whitney(&scores, &labels)).abs());
    }
    ensure!(worst_auc < 1e-9, "AUC vs Mann-Whitney {worst_auc:e}");
    Ok(format!(
        "100 instances x 101 thresholds exact; max |AUC - MW| {worst_auc:.1e}"
    ))
}

fn c06_geo_correlation() -> Outcome {
    let f = paper();
    let t = Instant::now();
    let rep = geo_bias_report(&f.model, &f.split.eval, &f.census, ShapEngine::Tree)
        .map_err(|e| e.to_string())?;
    let secs = f.build_secs + t.elapsed().as_secs_f64();
    ensure!(f.full.len() == 98_698, "n = {}", f.full.len());
    ensure!(rep.r_shap >= 0.7, "r_shap {:.3}", rep.r_shap);
    ensure!(
        rep.r_proba < rep.r_shap,
        "r_proba {:.3} >= r_shap {:.3}",
        rep.r_proba,
        rep.r_shap
    );
    ensure!(secs < 600.0, "took {secs:.0}s");
    Ok(format!(
        "r_shap {:.3}, r_proba {:.3}, {secs:.1}s end to end",
        rep.r_shap, rep.r_proba
    ))
}

fn region_means(
    train: &Dataset,
    census: &CensusTable,
    mapping: &RegionMapping,
) -> Vec<(Region, f64)> {
    let g = train.schema().index_of(GEO_FEATURE).unwrap();
    let mut codes: Vec<u16> = train.rows().iter().map(|r| r.features[g] as u16).collect();
    codes.sort_unstable();
    codes.dedup();
    let mut acc: BTreeMap<Region, (f64, usize)> = BTreeMap::new();
    for c in codes {
        if let Some(p) = census.get(c) {
            let e = acc.entry(mapping.region_of(c)).or_default();
            e.0 += p;
            e.1 += 1;
        }
    }
    let mut v: Vec<(Region, f64)> = acc
        .into_iter()
        .map(|(r, (s, n))| (r, s / n as f64))
        .collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1));
    v
}

fn c07_relocation() -> Outcome {
    let f = paper();
    let mapping = RegionMapping::bundled();
    let ranked = region_means(&f.split.train, &f.census, &mapping);
    let (whitest, least) = (ranked[0].0, ranked[ranked.len() - 1].0);
    let target =
        TargetSampler::region(&f.split.train, &mapping, least).map_err(|e| e.to_string())?;
    let rep = counterfactual_relocation(
        &f.model,
        &f.split.eval,
        |c| mapping.region_of(c) == whitest,
        &target,
        f.cfg.seed,
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        rep.increased >= 0.95,
        "worthiness decreased for {:.4}",
        rep.increased
    );
    Ok(format!(
        "{} -> {}: worthiness strictly decreased for {:.2}% of {} moved rows",
        whitest.name(),
        least.name(),
        100.0 * rep.increased,
        rep.n_moved
    ))
}

fn c08_proxy_swap() -> Outcome {
    let cfg = SynthConfig::pure_proxy();
    let (ds, census) = generate_synthetic(&cfg).unwrap();
    let split = temporal_split(&ds, cfg.split_cutoff);
    let grid = threshold_grid(101).unwrap();
    let rep = proxy_swap_experiment(
        &split.train,
        &split.eval,
        &census,
        &TrainConfig::default(),
        &grid,
    )
    .map_err(|e| e.to_string())?;
    let gaps: Vec<String> = rep
        .gaps
        .iter()
        .map(|g| format!("{} {:.4}", g.rate.name(), g.gap))
        .collect();
    let detail = format!(
        "|dAUC| {:.4}, spearman {:.3}, gaps [{}]",
        rep.delta_auc,
        rep.whiteness_spearman,
        gaps.join(", ")
    );
    let mut bad = Vec::new();
    if rep.delta_auc > 0.02 {
        bad.push("dAUC".to_string());
    }
    for g in rep.gaps.iter().filter(|g| g.gap > 0.03) {
        let i = grid.iter().position(|&t| t == g.threshold).unwrap();
        let c = rep.curves_baseline.counts[i];
        bad.push(format!(
            "{} gap {:.4} at t={:.2} ({} predicted positives)",
            g.rate.name(),
            g.gap,
            g.threshold,
            c.tp + c.fp
        ));
    }
    if !rep.whiteness_monotone {
        bad.push("monotone flag".into());
    }
    if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; exceeded: {}", bad.join("; ")))
    }
}

fn c09_monotone_census() -> Outcome {
    let f = paper();
    let census =
        CensusTable::from_fn(|c| (f64::from(c) + 1.0) / 1001.0).map_err(|e| e.to_string())?;
    let grid = threshold_grid(101).unwrap();
    let rep = proxy_swap_experiment(
        &f.split.train,
        &f.split.eval,
        &census,
        &TrainConfig::default(),
        &grid,
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        rep.max_score_diff == 0.0,
        "max score diff {:e}",
        rep.max_score_diff
    );
    ensure!(
        rep.gaps.iter().all(|g| g.gap == 0.0),
        "nonzero gap {:?}",
        rep.gaps
    );
    ensure!(rep.delta_auc == 0.0, "dAUC {:e}", rep.delta_auc);
    Ok(format!(
        "{} eval scores identical, all 8 gaps exactly 0",
        rep.n_eval
    ))
}

fn c10_regional_pattern() -> Outcome {
    let f = paper();
    let grid = threshold_grid(101).unwrap();
    let rep = regional_curves(&f.model, &f.split.eval, &RegionMapping::bundled(), &grid)
        .map_err(|e| e.to_string())?;
    let p = rep.pattern(
        &[Region::North, Region::Northeast, Region::CentralWest],
        &[Region::Southeast, Region::South],
        0.2,
        0.8,
    );
    ensure!(
        p.share >= 0.7,
        "pattern holds at {}/{}",
        p.both_hold,
        p.n_thresholds
    );
    Ok(format!(
        "FPR holds {}/{}, TPR {}/{}, both {}/{} (share {:.2})",
        p.fpr_holds,
        p.n_thresholds,
        p.tpr_holds,
        p.n_thresholds,
        p.both_hold,
        p.n_thresholds,
        p.share
    ))
}

fn run_cli(out: &Path, jobs: u32) -> Result<(), String> {
    let steps: [&[&str]; 7] = [
        &["synth", "--n-rows", "6000"],
        &["train", "--n-trees", "30"],
        &["explain"],
        &["audit", "geo"],
        &["audit", "relocate"],
        &["audit", "proxy-swap", "--n-trees", "30"],
        &["audit", "regions"],
    ];
    for args in steps {
        let st = Command::new(env!("CARGO_BIN_EXE_geoaudit"))
            .args([
                "--seed",
                "11",
                "--stamp",
                "20200101T000000Z",
                "--jobs",
                &jobs.to_string(),
                "--out",
            ])
            .arg(out)
            .args(args)
            .env_remove("GEOAUDIT_OUT")
            .env_remove("SOURCE_DATE_EPOCH")
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            st.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&st.stderr)
        );
    }
    Ok(())
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn c11_reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dirs = ["a", "b", "c"].map(|d| tmp.path().join(d));
    run_cli(&dirs[0], 1)?;
    run_cli(&dirs[1], 1)?;
    run_cli(&dirs[2], 8)?;
    let snaps = dirs.each_ref().map(|d| snapshot(d));
    ensure!(snaps[0].len() >= 20, "only {} output files", snaps[0].len());
    for (label, other) in [("repeat", &snaps[1]), ("--jobs 8", &snaps[2])] {
        ensure!(
            snaps[0].keys().eq(other.keys()),
            "{label}: file sets differ"
        );
        for (name, bytes) in &snaps[0] {
            ensure!(&other[name] == bytes, "{label}: {name} differs");
        }
    }
    Ok(format!(
        "{} files byte-identical across two --jobs 1 runs and a --jobs 8 run",
        snaps[0].len()
    ))
}

fn c12_base_rate() -> Outcome {
    let f = paper();
    let rate = f.full.base_rate().unwrap();
    ensure!((0.335..=0.355).contains(&rate), "base rate {rate:.4}");
    Ok(format!(
        "realized default rate {rate:.4} over {} rows",
        f.full.len()
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        (
            "C01",
            "tree SHAP equals exact enumeration",
            c01_shapley_oracle,
        ),
        (
            "C02",
            "local accuracy on the 10-feature model",
            c02_local_accuracy,
        ),
        ("C03", "dummy and symmetry axioms", c03_dummy_symmetry),
        ("C04", "boosting leaf weights, gains and loss", c04_gbt),
        ("C05", "confusion counts and AUC oracles", c05_metrics),
        (
            "C06",
            "geographic attribution tracks race",
            c06_geo_correlation,
        ),
        ("C07", "whitest to least-white relocation", c07_relocation),
        ("C08", "proxy swap on the pure-proxy preset", c08_proxy_swap),
        (
            "C09",
            "monotone census gives identical models",
            c09_monotone_census,
        ),
        ("C10", "regional FPR/TPR ordering", c10_regional_pattern),
        ("C11", "byte-identical CLI outputs", c11_reproducibility),
        ("C12", "synthetic base rate", c12_base_rate),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|p| id.contains(p.as_str()) || name.contains(p.as_str()))
        {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("[PASS] {id} {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("[FAIL] {id} {name} ({secs:.1}s): {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
