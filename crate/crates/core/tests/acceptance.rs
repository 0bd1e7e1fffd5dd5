//! Acceptance run: prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use urbanfuse_core::dataset::Dataset;
use urbanfuse_core::fusion::{train_all, EmbeddingSet, FusionModelKind, HierarchicalModel, HierarchicalObjective};
use urbanfuse_core::fusion::{AeHyper, LossWeights, ModelSpecs};
use urbanfuse_core::gae::{Autoencoder, AutoencoderSpec, MeanAggregator, Objective, Parameterized, Reconstruction};
use urbanfuse_core::metrics::{adjusted_rand_index, dist_dtw, evaluate_labels, kmeans, EvalConfig, OriginalSpace};
use urbanfuse_core::pipeline::{build_dataset, evaluate_all, normalize, original_space, run_all, ExperimentConfig};
use urbanfuse_core::pipeline::GraphSource;
use urbanfuse_core::synth::SynthConfig;
use urbanfuse_core::tsne::{project, TsneConfig, TsneResult, PERPLEXITY_TOLERANCE};

fn say(line: &str) {
    // written straight to the handle so the harness never swallows it
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn criterion(id: usize, title: &str, limit: Option<Duration>, body: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = body();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = v.pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(", limit {}s", l.as_secs()));
    say(&format!(
        "criterion {id} {}: {title}: {} [{:.1}s{budget}]",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64()
    ));
    pass
}

// ---------------------------------------------------------------- oracles

fn naive_euclidean(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        s += (x[i] - y[i]).powi(2);
    }
    s.sqrt()
}

/// Top-down memoised DTW over the full cost table.
fn memo_dtw(a: &[f64], b: &[f64]) -> f64 {
    fn go(i: usize, j: usize, a: &[f64], b: &[f64], memo: &mut HashMap<(usize, usize), f64>) -> f64 {
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let cost = (a[i] - b[j]).abs();
        let v = if i == 0 && j == 0 {
            cost
        } else {
            let mut best = f64::INFINITY;
            if i > 0 {
                best = best.min(go(i - 1, j, a, b, memo));
            }
            if j > 0 {
                best = best.min(go(i, j - 1, a, b, memo));
            }
            if i > 0 && j > 0 {
                best = best.min(go(i - 1, j - 1, a, b, memo));
            }
            cost + best
        };
        memo.insert((i, j), v);
        v
    }
    go(a.len() - 1, b.len() - 1, a, b, &mut HashMap::new())
}

/// Minimum cost over every monotone warping path, enumerated one by one.
fn enumerate_dtw(a: &[f64], b: &[f64]) -> f64 {
    fn walk(i: usize, j: usize, acc: f64, a: &[f64], b: &[f64], best: &mut f64) {
        let acc = acc + (a[i] - b[j]).abs();
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(i + 1, j, acc, a, b, best);
        }
        if j + 1 < b.len() {
            walk(i, j + 1, acc, a, b, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(i + 1, j + 1, acc, a, b, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(0, 0, 0.0, a, b, &mut best);
    best
}

/// S_kl straight from the definition: mean over ordered pairs for
/// cohesion, cross-product minimum for separation.
fn brute_pair(ck: &[usize], cl: &[usize], d: &dyn Fn(usize, usize) -> f64) -> f64 {
    let cohesion = |c: &[usize]| {
        if c.len() < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for &i in c {
            for &j in c {
                if i != j {
                    s += d(i, j);
                }
            }
        }
        s / (c.len() * (c.len() - 1)) as f64
    };
    let mut b = f64::INFINITY;
    for &i in ck {
        for &j in cl {
            b = b.min(d(i, j));
        }
    }
    let term = |a: f64| {
        let m = a.max(b);
        if m == 0.0 {
            0.0
        } else {
            (b - a) / m
        }
    };
    0.5 * (term(cohesion(ck)) + term(cohesion(cl)))
}

fn random_series(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-2.0..2.0)).collect()
}

// ------------------------------------------------------------- criteria

fn silhouette_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0_f64;
    let mut pairs_checked = 0;
    for _ in 0..100 {
        let k = rng.random_range(2..=4);
        let n = rng.random_range(k..=50);
        let p = rng.random_range(1..=5);
        let t = rng.random_range(3..=12);
        let s = Array2::from_shape_fn((n, p), |_| rng.random_range(-3.0..3.0));
        let dy = Array2::from_shape_fn((n, t), |_| rng.random_range(0.0..5.0));
        let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        for i in (1..n).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        let space = OriginalSpace::new(s.clone(), dy.clone()).unwrap();
        let got = evaluate_labels(&space, &labels, k, None, 0).unwrap();

        let members: Vec<Vec<usize>> = (0..k).map(|c| (0..n).filter(|&i| labels[i] == c).collect()).collect();
        let ds = |i: usize, j: usize| naive_euclidean(&s.row(i).to_vec(), &s.row(j).to_vec());
        let dd = |i: usize, j: usize| memo_dtw(&dy.row(i).to_vec(), &dy.row(j).to_vec());
        let mut idx = 0;
        for a in 0..k {
            for b in a + 1..k {
                let pair = &got[idx];
                idx += 1;
                assert_eq!((pair.cluster_a, pair.cluster_b), (a, b));
                let es = brute_pair(&members[a], &members[b], &ds);
                let ed = brute_pair(&members[a], &members[b], &dd);
                worst = worst.max((pair.s_static - es).abs()).max((pair.s_dynamic - ed).abs());
                pairs_checked += 1;
            }
        }
        assert_eq!(idx, got.len());
    }
    Verdict {
        pass: worst <= 1e-12,
        detail: format!("100 instances, {pairs_checked} pairs, max |diff| {worst:.2e} (tol 1e-12)"),
    }
}

fn dtw_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = 0;
    for _ in 0..500 {
        let la = rng.random_range(1..=8);
        let lb = rng.random_range(1..=8);
        let a = random_series(&mut rng, la);
        let b = random_series(&mut rng, lb);
        if dist_dtw(&a, &b).unwrap() != enumerate_dtw(&a, &b) {
            mismatches += 1;
        }
    }
    Verdict {
        pass: mismatches == 0,
        detail: format!("500 pairs of length <= 8, {mismatches} differ from path enumeration"),
    }
}

/// Largest relative error of central differences against the analytic
/// gradient, over every scalar parameter.
fn max_gradient_error<M, O>(objective: &O, model: &M) -> (f64, usize)
where
    M: Parameterized + Clone,
    O: Objective<Model = M>,
{
    let (_, grads) = objective.loss_and_grad(model).unwrap();
    let analytic = grads.flat_tensors();
    let h = 1e-5;
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (t, tensor) in analytic.iter().enumerate() {
        for (i, &a) in tensor.iter().enumerate() {
            let bump = |delta: f64| {
                let mut m = model.clone();
                let mut k = 0;
                m.visit_mut(&mut |_, p| {
                    if k == t {
                        p[i] += delta;
                    }
                    k += 1;
                });
                objective.loss(&m).unwrap()
            };
            let numeric = (bump(h) - bump(-h)) / (2.0 * h);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            count += 1;
        }
    }
    (worst, count)
}

fn randomize_biases<M: Parameterized>(model: &mut M, rng: &mut ChaCha8Rng) {
    model.visit_mut(&mut |name, p| {
        if name.ends_with("bias") || name.ends_with(".b") {
            p.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        }
    });
}

fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let x_s = Array2::from_shape_fn((6, 3), |_| rng.random_range(0.0..1.0));
    let x_d = Array2::from_shape_fn((6, 3), |_| rng.random_range(0.0..1.0));
    let x_c = ndarray::concatenate![ndarray::Axis(1), x_s, x_d];
    let agg = MeanAggregator::new(&[vec![1, 2], vec![0, 3], vec![0, 3, 4], vec![1, 2, 5], vec![2], vec![3]]);

    let ae = |input_dim: usize, latent_dim: usize, use_gate: bool, seed: u64| AutoencoderSpec {
        input_dim,
        hidden_dim: 5,
        latent_dim,
        use_gate,
        epochs: 1,
        learning_rate: 1e-3,
        seed,
    };
    let mut lines = Vec::new();
    let mut worst = 0.0_f64;
    let mut single = |name: &str, spec: AutoencoderSpec, x: ArrayView2<f64>, rng: &mut ChaCha8Rng| {
        let mut model = Autoencoder::init(&spec).unwrap();
        randomize_biases(&mut model, rng);
        let objective = Reconstruction {
            features: x,
            aggregator: &agg,
        };
        let (e, n) = max_gradient_error(&objective, &model);
        worst = worst.max(e);
        lines.push(format!("{name} {e:.1e} over {n}"));
    };
    single("M1-Static", ae(3, 2, false, 1), x_s.view(), &mut rng);
    single("M1-Dynamic", ae(3, 2, false, 2), x_d.view(), &mut rng);
    single("M2", ae(6, 4, true, 3), x_c.view(), &mut rng);

    let h = AeHyper {
        hidden_dim: 5,
        latent_dim: 2,
        epochs: 1,
        learning_rate: 1e-3,
    };
    let specs = ModelSpecs {
        static_ae: h,
        dynamic_ae: h,
        early: h,
        top: AeHyper { latent_dim: 3, ..h },
        loss_weights: LossWeights {
            static_weight: 0.8,
            dynamic_weight: 1.2,
            top_weight: 1.5,
        },
        seed: 4,
    };
    let mut model = HierarchicalModel::init(&specs, 3, 3).unwrap();
    randomize_biases(&mut model, &mut rng);
    let objective = HierarchicalObjective::new(x_s.view(), x_d.view(), &agg, specs.loss_weights);
    let (e, n) = max_gradient_error(&objective, &model);
    worst = worst.max(e);
    lines.push(format!("M4 {e:.1e} over {n}"));
    Verdict {
        pass: worst < 1e-4,
        detail: format!("max relative error {} (tol 1e-4)", lines.join(", ")),
    }
}

/// One trained seed of the default synthetic experiment.
struct SeedRun {
    config: ExperimentConfig,
    raw: Dataset,
    dataset: Dataset,
    set: EmbeddingSet,
    train_time: Duration,
}

fn train_seed(config: &ExperimentConfig) -> SeedRun {
    let start = Instant::now();
    let raw = build_dataset(config).unwrap();
    let dataset = normalize(&raw, config.normalization).unwrap();
    let set = train_all(&dataset, &config.models).unwrap();
    SeedRun {
        config: config.clone(),
        raw,
        dataset,
        set,
        train_time: start.elapsed(),
    }
}

/// Per ground-truth cluster: mean share of each member's ten nearest 2-D
/// neighbours carrying the same label.
fn neighbour_purity(coords: &Array2<f64>, labels: &[usize], k: usize) -> Vec<f64> {
    const NEIGHBOURS: usize = 10;
    let n = coords.nrows();
    let mut sums = vec![0.0; k];
    let mut sizes = vec![0usize; k];
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        dist.clear();
        for j in 0..n {
            if j != i {
                let dx = coords[[i, 0]] - coords[[j, 0]];
                let dy = coords[[i, 1]] - coords[[j, 1]];
                dist.push((dx * dx + dy * dy, j));
            }
        }
        dist.select_nth_unstable_by(NEIGHBOURS - 1, |a, b| a.0.total_cmp(&b.0));
        let same = dist[..NEIGHBOURS].iter().filter(|&&(_, j)| labels[j] == labels[i]).count();
        sums[labels[i]] += same as f64 / NEIGHBOURS as f64;
        sizes[labels[i]] += 1;
    }
    sums.iter().zip(&sizes).map(|(s, &c)| s / c as f64).collect()
}

const PURITY_THRESHOLD: f64 = 0.9;

fn cluster_recovery(run: &SeedRun, projections: &mut BTreeMap<FusionModelKind, TsneResult>) -> Verdict {
    let truth = run.raw.labels().expect("synthetic data is labelled");
    let k = run.raw.label_count().unwrap();
    let mut ari = BTreeMap::new();
    for kind in [FusionModelKind::M1Dynamic, FusionModelKind::M4Hierarchical] {
        let a = kmeans(run.set.embedding(kind).unwrap().view(), 12, run.config.evaluation.seed).unwrap();
        ari.insert(kind, adjusted_rand_index(&a.labels, truth));
    }
    let mut separated = BTreeMap::new();
    for kind in FusionModelKind::ALL {
        let r = project(run.set.embedding(kind).unwrap().view(), &run.config.tsne).unwrap();
        let purity = neighbour_purity(&r.coords, truth, k);
        separated.insert(kind, purity.iter().filter(|&&p| p >= PURITY_THRESHOLD).count());
        projections.insert(kind, r);
    }
    let ari_ok = ari.values().all(|&a| a >= 0.8);
    let sep_ok = separated
        .iter()
        .all(|(&kind, &c)| kind == FusionModelKind::M1Static || c + 1 >= k);
    let ari_text: Vec<String> = ari.iter().map(|(k, a)| format!("{k} {a:.3}")).collect();
    let sep_text: Vec<String> = separated.iter().map(|(kd, c)| format!("{kd} {c}/{k}")).collect();
    Verdict {
        pass: ari_ok && sep_ok,
        detail: format!(
            "n={}, ARI {} (min 0.8); separated clusters {} (min {} except M1-Static)",
            run.raw.len(),
            ari_text.join(", "),
            sep_text.join(", "),
            k - 1
        ),
    }
}

#[derive(Deserialize)]
struct OrderingFixture {
    seeds: Vec<u64>,
    config: ExperimentConfig,
}

fn tr_fractions(run: &SeedRun) -> BTreeMap<FusionModelKind, f64> {
    let space = original_space(&run.dataset, &run.config.evaluation).unwrap();
    evaluate_all(&space, &run.set, &run.config.evaluation)
        .unwrap()
        .into_iter()
        .map(|(k, e)| (k, e.quadrants.tr_fraction))
        .collect()
}

fn fusion_ordering(fixture: &OrderingFixture, cached: &SeedRun) -> Verdict {
    use FusionModelKind::*;
    let mut per_seed = Vec::new();
    for &seed in &fixture.seeds {
        let config = fixture.config.clone().with_seed(seed);
        let tr = if config == cached.config {
            tr_fractions(cached)
        } else {
            tr_fractions(&train_seed(&config))
        };
        say(&format!(
            "  seed {seed}: TR M1-Static {:.3} M1-Dynamic {:.3} M2 {:.3} M3 {:.3} M4 {:.3}",
            tr[&M1Static], tr[&M1Dynamic], tr[&M2Early], tr[&M3Late], tr[&M4Hierarchical]
        ));
        per_seed.push(tr);
    }
    let mean = |kind| per_seed.iter().map(|t| t[&kind]).sum::<f64>() / per_seed.len() as f64;
    let (m2, m3, m4) = (mean(M2Early), mean(M3Late), mean(M4Hierarchical));
    let violations = per_seed
        .iter()
        .filter(|t| !(t[&M4Hierarchical] >= t[&M2Early] && t[&M2Early] > t[&M3Late]))
        .count();
    Verdict {
        pass: m4 >= m2 && m2 > m3 && m4 - m3 >= 0.1 && violations <= 1,
        detail: format!(
            "mean TR M4 {m4:.3}, M2 {m2:.3}, M3 {m3:.3}; need M4 >= M2 > M3 and M4 - M3 >= 0.1 \
             (got {:.3}); seeds violating the order {violations}/{} (max 1)",
            m4 - m3,
            per_seed.len()
        ),
    }
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Verdict {
    let h = AeHyper {
        hidden_dim: 16,
        latent_dim: 6,
        epochs: 60,
        learning_rate: 5e-3,
    };
    let config = ExperimentConfig {
        models: ModelSpecs {
            static_ae: AeHyper { latent_dim: 4, ..h },
            dynamic_ae: h,
            early: h,
            top: h,
            loss_weights: LossWeights::default(),
            seed: 17,
        },
        evaluation: EvalConfig {
            k: 4,
            seed: 17,
            subsample_cap: Some(20),
        },
        tsne: TsneConfig {
            perplexity: 10.0,
            iterations: 300,
            seed: 17,
            ..TsneConfig::default()
        },
        ..ExperimentConfig::synthetic(
            GraphSource::Grid {
                rows: 10,
                cols: 12,
                seed: 17,
            },
            SynthConfig {
                k_clusters: 4,
                n_timesteps: 36,
                seed: 17,
                ..SynthConfig::default()
            },
        )
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (da, _) = run_all(&config, a.path()).unwrap();
    let (db, _) = run_all(&config, b.path()).unwrap();
    let (ta, tb) = (tree(&da), tree(&db));
    let differing: Vec<&str> = ta
        .iter()
        .zip(&tb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    Verdict {
        pass: ta.len() == tb.len() && differing.is_empty(),
        detail: format!(
            "two run-all passes, {} vs {} files, {} differ{}",
            ta.len(),
            tb.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {}", differing.join(" ")) }
        ),
    }
}

fn tsne_checks(projections: &BTreeMap<FusionModelKind, TsneResult>, target: f64) -> Verdict {
    let mut worst = 0.0_f64;
    let mut points = 0;
    let mut kl = Vec::new();
    let mut decreasing = projections.len() == 5;
    for (kind, r) in projections {
        for p in &r.perplexities {
            worst = worst.max((p - target).abs());
        }
        points += r.perplexities.len();
        decreasing &= r.final_kl() < r.initial_kl();
        kl.push(format!("{kind} {:.3}->{:.3}", r.initial_kl(), r.final_kl()));
    }
    Verdict {
        pass: worst <= PERPLEXITY_TOLERANCE && decreasing,
        detail: format!(
            "{points} points, max |perplexity - {target}| {worst:.1e} (tol {PERPLEXITY_TOLERANCE:.0e}); KL {}",
            kl.join(", ")
        ),
    }
}

fn main() {
    let fixture: OrderingFixture = serde_json::from_str(
        &fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fusion_ordering.json")).unwrap(),
    )
    .unwrap();
    let mut results = Vec::new();
    results.push(criterion(1, "silhouette oracle equivalence", Some(Duration::from_secs(60)), silhouette_oracle));
    results.push(criterion(2, "DTW exactness", Some(Duration::from_secs(60)), dtw_exactness));
    results.push(criterion(3, "gradient correctness", Some(Duration::from_secs(120)), gradient_check));

    // the first fixture seed doubles as the cluster-recovery run
    let config = fixture.config.clone().with_seed(fixture.seeds[0]);
    let mut shared = None;
    let mut projections = BTreeMap::new();
    results.push(criterion(4, "synthetic cluster recovery", Some(Duration::from_secs(900)), || {
        let run = train_seed(&config);
        let v = cluster_recovery(&run, &mut projections);
        shared = Some(run);
        v
    }));
    let shared = shared.unwrap();
    let reused = shared.train_time;
    results.push(criterion(5, "fusion ordering", Some(Duration::from_secs(3600) - reused), || {
        fusion_ordering(&fixture, &shared)
    }));
    results.push(criterion(6, "run-all determinism", None, determinism));
    results.push(criterion(7, "t-SNE internal checks", None, || {
        tsne_checks(&projections, config.tsne.perplexity)
    }));

    let passed = results.iter().filter(|&&p| p).count();
    say(&format!("acceptance: {passed}/{} criteria passed", results.len()));
    if passed != results.len() {
        std::process::exit(1);
    }
}
