//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use vcbart::data::{generate, Dataset, DgpSpec};
use vcbart::gibbs::{run_chains, C2Update, ChainOutput, Diagnostics, LeafPrior, Model, SamplerOptions, Schedule};
use vcbart::gibbs::{leaf_log_marginal, SufficientStats};
use vcbart::prior::{sample_sd, Hyperparameters, TreePriorConfig};
use vcbart::sampling::RngStream;
use vcbart::summary::{coverage_and_mse, summarize, SummaryReport};
use vcbart::tree::{DecisionTree, NodeKind};
use vcbart_testkit as tk;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    if spent > budget {
        Err(format!("runtime {:.1}s exceeds {:.0}s", spent.as_secs_f64(), budget.as_secs_f64()))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// 1. conjugate pieces against closed forms and quadrature

fn moments_ok(draws: &[f64], mean: f64, var: f64) -> (bool, String) {
    let dm = (tk::mean(draws) - mean) / tk::std_error(draws);
    let dv = (tk::variance(draws) - var) / tk::variance_std_error(draws);
    (dm.abs() < 3.0 && dv.abs() < 3.0, format!("z_mean {dm:+.2} z_var {dv:+.2}"))
}

fn quadrature_log_marginal(x: &[f64], r: &[f64], s2: f64, sigma2: f64) -> f64 {
    let log_joint = |mu: f64| {
        let mut v = -0.5 * (2.0 * PI * s2).ln() - 0.5 * mu * mu / s2;
        for (xi, ri) in x.iter().zip(r) {
            let e = ri - xi * mu;
            v += -0.5 * (2.0 * PI * sigma2).ln() - 0.5 * e * e / sigma2;
        }
        v
    };
    // the integrand is Gaussian in mu; center the pieces on its mode
    let prec = 1.0 / s2 + x.iter().map(|v| v * v).sum::<f64>() / sigma2;
    let mode = x.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() / sigma2 / prec;
    let sd = prec.sqrt().recip();
    let shift = log_joint(mode);
    let breaks: Vec<f64> = (-40..=40).map(|k| mode + 0.5 * k as f64 * sd).collect();
    tk::integrate_pieces(|mu| (log_joint(mu) - shift).exp(), &breaks, 1e-13).ln() + shift
}

fn criterion_conjugacy() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(101, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s2 = rng.random_range(0.05..3.0);
        let sigma2 = rng.random_range(0.2..4.0);
        let got = leaf_log_marginal(&SufficientStats::from_slices(&x, &r), s2, sigma2);
        worst = worst.max((got - quadrature_log_marginal(&x, &r, s2, sigma2)).abs());
    }
    let mut notes = vec![format!("leaf marginal max error {worst:.1e}")];
    let mut ok = worst < 1e-8;

    let spec = DgpSpec {
        n_train: 40,
        n_test: 1,
        p: 2,
        r: 3,
        ..DgpSpec::exp1()
    };
    let data = generate::<f64, _>(&spec, &mut RngStream::new(102, 0)).map_err(|e| e.to_string())?.0;
    let mut hyper = Hyperparameters::calibrated(&data.y, 2).map_err(|e| e.to_string())?;
    hyper.trees = 5;
    let draws = 100_000;

    // leaf redraw on a stump with fixed variances
    {
        let (v, sigma2) = (0.6, 1.7);
        let options = SamplerOptions {
            leaf_prior: LeafPrior::Fixed(v),
            fixed_sigma2: Some(sigma2),
            ..Default::default()
        };
        let model = Model::new(&data, hyper.clone(), options).map_err(|e| e.to_string())?;
        let mut state = model.initial_state();
        let x1 = &data.x[0];
        let (a, b) = x1.iter().zip(&data.y).fold((0.0, 0.0), |(a, b), (x, y)| (a + x * x, b + x * y));
        let mean = v * b / (sigma2 + v * a);
        let var = v * sigma2 / (sigma2 + v * a);
        let mut rng = RngStream::new(103, 0);
        let d: Vec<f64> = (0..draws)
            .map(|_| {
                model.redraw_leaves(&mut state, 1, 0, &mut rng).unwrap();
                state.ensembles[1].trees[0].jump(0)
            })
            .collect();
        let (good, note) = moments_ok(&d, mean, var);
        ok &= good;
        notes.push(format!("redraw {note}"));
    }

    let options = SamplerOptions {
        c2_update: C2Update::Conjugate,
        ..Default::default()
    };
    let mut model = Model::new(&data, hyper.clone(), options).map_err(|e| e.to_string())?;
    let mut rng = RngStream::new(104, 0);
    let mut state = loop {
        let s = model.sample_prior_state(&mut rng).map_err(|e| e.to_string())?;
        if s.ensembles[1].trees.iter().map(DecisionTree::num_internal).sum::<usize>() >= 2 {
            break s;
        }
    };
    let y = model.sample_response(&state, &mut rng);
    model.set_response(y).map_err(|e| e.to_string())?;

    // theta_1 given the split counts
    {
        state.split.eta[1] = 2.5;
        let mut counts = vec![0.0; 3];
        for t in &state.ensembles[1].trees {
            for (_, rule) in t.rules() {
                counts[rule.axis] += 1.0;
            }
        }
        let alpha: Vec<f64> = counts.iter().map(|c| 2.5 / 3.0 + c).collect();
        let a0: f64 = alpha.iter().sum();
        let mut samples = vec![Vec::with_capacity(draws); 3];
        for _ in 0..draws {
            model.update_theta(&mut state, 1, &mut rng).map_err(|e| e.to_string())?;
            for (s, &t) in samples.iter_mut().zip(&state.split.theta[1]) {
                s.push(t);
            }
        }
        for (r, s) in samples.iter().enumerate() {
            let (m, v) = (alpha[r] / a0, alpha[r] * (a0 - alpha[r]) / (a0 * a0 * (a0 + 1.0)));
            let (good, note) = moments_ok(s, m, v);
            ok &= good;
            notes.push(format!("theta_{r} {note}"));
        }
    }

    // slab variance, conjugate form
    {
        let sh = &state.shrinkage;
        let mut leaves = 0.0;
        let mut rate = hyper.nu_c * hyper.s_c * hyper.s_c;
        for (j, ens) in state.ensembles.iter().enumerate() {
            let sq: f64 = ens.trees.iter().flat_map(|t| t.jumps()).map(|m| m * m).sum();
            leaves += ens.trees.iter().map(|t| t.num_leaves()).sum::<usize>() as f64;
            rate += hyper.trees as f64 * sq / (sh.tau * sh.tau * sh.lambda[j] * sh.lambda[j]);
        }
        let (shape, rate) = ((hyper.nu_c + leaves) / 2.0, rate / 2.0);
        let mean = rate / (shape - 1.0);
        let var = mean * mean / (shape - 2.0);
        let d: Vec<f64> = (0..draws)
            .map(|_| {
                model.update_c2(&mut state, &mut rng).unwrap();
                state.shrinkage.c2
            })
            .collect();
        let (good, note) = moments_ok(&d, mean, var);
        ok &= good;
        notes.push(format!("c2 {note}"));
    }

    // noise variance
    {
        let fit = model.recompute_fit(&state);
        let rss: f64 = model.y().iter().zip(&fit).map(|(y, f)| (y - f) * (y - f)).sum();
        let shape = (hyper.nu + model.n() as f64) / 2.0;
        let rate = (hyper.nu * hyper.noise_scale + rss) / 2.0;
        let mean = rate / (shape - 1.0);
        let var = mean * mean / (shape - 2.0);
        let d: Vec<f64> = (0..draws)
            .map(|_| {
                model.update_sigma2(&mut state, &mut rng).unwrap();
                state.shrinkage.sigma2
            })
            .collect();
        let (good, note) = moments_ok(&d, mean, var);
        ok &= good;
        notes.push(format!("sigma2 {note}"));
    }

    within_budget(start, Duration::from_secs(60))?;
    check(ok, notes.join("; "))
}

// ---------------------------------------------------------------------------
// 2. getting it right: successive-conditional vs marginal-conditional draws

struct GirDraw {
    sigma2: f64,
    tau: f64,
    lambda: Vec<f64>,
    leaves: usize,
}

fn gir_record(state: &vcbart::ChainState) -> GirDraw {
    GirDraw {
        sigma2: state.shrinkage.sigma2,
        tau: state.shrinkage.tau,
        lambda: state.shrinkage.lambda.clone(),
        leaves: state.ensembles.iter().flat_map(|e| &e.trees).map(DecisionTree::num_leaves).sum(),
    }
}

fn criterion_getting_it_right() -> Outcome {
    let start = Instant::now();
    let spec = DgpSpec {
        n_train: 20,
        n_test: 1,
        p: 2,
        r: 2,
        ..DgpSpec::exp1()
    };
    let data = generate::<f64, _>(&spec, &mut RngStream::new(201, 0)).map_err(|e| e.to_string())?.0;
    let hyper = Hyperparameters {
        trees: 3,
        nu: 3.0,
        noise_scale: 1.0,
        nu_c: 4.0,
        s_c: 2.0,
        tau0: 1.0,
        tree_prior: TreePriorConfig::default(),
    };
    let mut model = Model::new(&data, hyper, SamplerOptions::default()).map_err(|e| e.to_string())?;

    let (cycles, thin, direct) = (200_000, 40, 20_000);
    let mut rng = RngStream::new(202, 0);
    let prior: Vec<GirDraw> = (0..direct)
        .map(|_| model.sample_prior_state(&mut rng).map(|s| gir_record(&s)))
        .collect::<vcbart::Result<_>>()
        .map_err(|e| e.to_string())?;

    let mut state = model.sample_prior_state(&mut rng).map_err(|e| e.to_string())?;
    let mut diag = Diagnostics::default();
    let mut chain = Vec::with_capacity(cycles / thin);
    for k in 0..cycles {
        let y = model.sample_response(&state, &mut rng);
        model.set_response(y).map_err(|e| e.to_string())?;
        model.sweep(&mut state, &mut rng, &mut diag).map_err(|e| e.to_string())?;
        if k % thin == thin - 1 {
            chain.push(gir_record(&state));
        }
    }

    let mut notes = Vec::new();
    let mut ok = true;
    let mut ks = |name: String, a: Vec<f64>, b: Vec<f64>| {
        let (d, p) = tk::ks_two_sample(&a, &b);
        ok &= p > 0.001;
        notes.push(format!("{name} D={d:.3} p={p:.3}"));
    };
    ks("sigma2".into(), chain.iter().map(|d| d.sigma2).collect(), prior.iter().map(|d| d.sigma2).collect());
    ks("tau".into(), chain.iter().map(|d| d.tau).collect(), prior.iter().map(|d| d.tau).collect());
    for j in 0..3 {
        ks(
            format!("lambda_{j}"),
            chain.iter().map(|d| d.lambda[j]).collect(),
            prior.iter().map(|d| d.lambda[j]).collect(),
        );
    }
    let (stat, p) = tk::chi2_two_sample(
        &chain.iter().map(|d| d.leaves).collect::<Vec<_>>(),
        &prior.iter().map(|d| d.leaves).collect::<Vec<_>>(),
    );
    ok &= p > 0.001;
    notes.push(format!("leaves chi2={stat:.1} p={p:.3}"));

    within_budget(start, Duration::from_secs(600))?;
    check(ok, notes.join("; "))
}

// ---------------------------------------------------------------------------
// 3. single small tree against exact enumeration

const TOPOLOGIES: [&str; 5] = ["stump", "root", "root+left", "root+right", "full"];

fn classify(tree: &DecisionTree<f64>) -> usize {
    match tree.node(DecisionTree::<f64>::ROOT).kind {
        NodeKind::Leaf { .. } => 0,
        NodeKind::Split { left, right, .. } => match (tree.is_leaf(left), tree.is_leaf(right)) {
            (true, true) => 1,
            (false, true) => 2,
            (true, false) => 3,
            (false, false) => 4,
        },
    }
}

/// Exact topology posterior. Cutpoints are uniform on (0, 1) and only the
/// interval between sorted modifier values matters, so each rule is summed
/// over those intervals weighted by their length.
fn enumerate_topologies(z: &[f64], y: &[f64], v: f64, sigma2: f64) -> Vec<f64> {
    let n = z.len();
    let mut cache: HashMap<u32, f64> = HashMap::new();
    let mut leaf = |mask: u32| -> f64 {
        *cache.entry(mask).or_insert_with(|| {
            let r: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| y[i]).collect();
            if r.is_empty() {
                return 1.0;
            }
            quadrature_log_marginal(&vec![1.0; r.len()], &r, v, sigma2).exp()
        })
    };
    let mut cuts = vec![0.0];
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    cuts.extend(sorted);
    cuts.push(1.0);
    // (weight, rows going left) for each cutpoint interval
    let intervals: Vec<(f64, u32)> = cuts
        .windows(2)
        .map(|w| {
            let t = 0.5 * (w[0] + w[1]);
            let left = (0..n).filter(|&i| z[i] < t).fold(0u32, |m, i| m | 1 << i);
            (w[1] - w[0], left)
        })
        .collect();
    let all = (1u32 << n) - 1;

    let ps = |d: f64| 0.95 / (1.0 + d).powi(2);
    let (p0, p1) = (ps(0.0), ps(1.0));
    let split_below = |mask: u32, leaf: &mut dyn FnMut(u32) -> f64| -> f64 {
        intervals.iter().map(|&(w, l)| w * leaf(mask & l) * leaf(mask & !l)).sum()
    };

    let mut post = vec![0.0; 5];
    post[0] = (1.0 - p0) * leaf(all);
    for &(w, l) in &intervals {
        let (lm, rm) = (all & l, all & !l);
        let (ll, rl) = (leaf(lm), leaf(rm));
        let ls = split_below(lm, &mut leaf);
        let rs = split_below(rm, &mut leaf);
        post[1] += p0 * w * (1.0 - p1) * ll * (1.0 - p1) * rl;
        post[2] += p0 * w * p1 * ls * (1.0 - p1) * rl;
        post[3] += p0 * w * (1.0 - p1) * ll * p1 * rs;
        post[4] += p0 * w * p1 * ls * p1 * rs;
    }
    let total: f64 = post.iter().sum();
    post.iter().map(|p| p / total).collect()
}

fn criterion_enumeration() -> Outcome {
    let start = Instant::now();
    let z = vec![0.12, 0.81, 0.37, 0.58];
    let y = vec![-0.6, 1.4, -0.2, 0.9];
    let (v, sigma2) = (1.0, 0.3);
    let data = Dataset::new(y.clone(), vec![], vec![z.clone()]).map_err(|e| e.to_string())?;
    let mut hyper = Hyperparameters::calibrated(&data.y, 0).map_err(|e| e.to_string())?;
    hyper.trees = 1;
    hyper.tree_prior = TreePriorConfig::default().with_max_depth(2);
    let options = SamplerOptions {
        leaf_prior: LeafPrior::Fixed(v),
        fixed_sigma2: Some(sigma2),
        ..Default::default()
    };
    let model = Model::new(&data, hyper, options).map_err(|e| e.to_string())?;
    let exact = enumerate_topologies(&z, &y, v, sigma2);

    let mut state = model.initial_state();
    let mut rng = RngStream::new(301, 0);
    let mut diag = Diagnostics::default();
    let sweeps = 1_000_000;
    let mut counts = [0usize; 5];
    for _ in 0..sweeps {
        model.sweep(&mut state, &mut rng, &mut diag).map_err(|e| e.to_string())?;
        counts[classify(&state.ensembles[0].trees[0])] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / sweeps as f64).collect();
    let tv = tk::total_variation(&freq, &exact);
    let table: Vec<String> = TOPOLOGIES
        .iter()
        .zip(freq.iter().zip(&exact))
        .map(|(name, (f, e))| format!("{name} {f:.4}/{e:.4}"))
        .collect();
    within_budget(start, Duration::from_secs(300))?;
    check(tv < 0.02, format!("TV {tv:.4} ({})", table.join(", ")))
}

// ---------------------------------------------------------------------------
// shared pieces for the simulation studies

fn truth_on(data: &Dataset<f64>) -> Vec<Vec<f64>> {
    data.beta_true.clone().expect("simulated data carries the truth")
}

fn fit(
    train: &Dataset<f64>,
    grid: &Dataset<f64>,
    leaf_prior: Option<LeafPrior<f64>>,
    schedule: &Schedule,
    seed: u64,
) -> Result<Vec<ChainOutput<f64>>, String> {
    let hyper = Hyperparameters::calibrated(&train.y, train.p()).map_err(|e| e.to_string())?;
    let mut options = SamplerOptions::default();
    if let Some(lp) = leaf_prior {
        options.leaf_prior = lp;
    }
    let model = Model::new(train, hyper, options).map_err(|e| e.to_string())?;
    run_chains(&model, &grid.z, schedule, seed).map_err(|e| e.to_string())
}

fn desk_schedule() -> Schedule {
    Schedule {
        chains: 4,
        iters: 1000,
        burn: 200,
        thin: 1,
    }
}

// ---------------------------------------------------------------------------
// 4. Experiment 1 at desk scale

fn criterion_exp1() -> Outcome {
    let start = Instant::now();
    let mut mse2 = Vec::new();
    let mut coverage = Vec::new();
    for rep in 0..5u64 {
        let spec = DgpSpec {
            n_train: 500,
            n_test: 100,
            seed: 400 + rep,
            ..DgpSpec::exp1()
        };
        let (train, test) = generate::<f64, _>(&spec, &mut RngStream::new(spec.seed, 0)).map_err(|e| e.to_string())?;
        let chains = fit(&train, &test, None, &desk_schedule(), 410 + rep)?;
        let report = summarize(&chains, 0.95).map_err(|e| e.to_string())?;
        let metrics = coverage_and_mse(&report, &truth_on(&test)).map_err(|e| e.to_string())?;
        mse2.push(metrics[2].mse);
        coverage.push(tk::mean(&metrics.iter().map(|m| m.coverage).collect::<Vec<_>>()));
    }
    let (m, c) = (tk::mean(&mse2), tk::mean(&coverage));
    within_budget(start, Duration::from_secs(1800))?;
    check(
        m < 0.05 && c >= 0.80,
        format!("beta_2 MSE {m:.4} (reps {mse2:.4?}); coverage {c:.3} (reps {coverage:.3?})"),
    )
}

// ---------------------------------------------------------------------------
// 5 and 6. Experiment 2 at desk scale, sparse prior vs constant shrinkage

struct Exp2Rep {
    sparse_null_mse: f64,
    constant_null_mse: f64,
    lambda_separated: bool,
    min_active: f64,
    max_null: f64,
}

fn null_mse(report: &SummaryReport<f64>, truth: &[Vec<f64>]) -> Result<f64, String> {
    let metrics = coverage_and_mse(report, truth).map_err(|e| e.to_string())?;
    Ok(tk::mean(&metrics[4..].iter().map(|m| m.mse).collect::<Vec<_>>()))
}

fn run_exp2() -> Result<(Vec<Exp2Rep>, f64), String> {
    let start = Instant::now();
    let mut reps = Vec::new();
    for rep in 0..5u64 {
        let spec = DgpSpec {
            n_train: 500,
            n_test: 100,
            p: 30,
            seed: 500 + rep,
            ..DgpSpec::exp2()
        };
        let (train, test) = generate::<f64, _>(&spec, &mut RngStream::new(spec.seed, 0)).map_err(|e| e.to_string())?;
        let truth = truth_on(&test);
        let sparse = summarize(&fit(&train, &test, None, &desk_schedule(), 510 + rep)?, 0.95).map_err(|e| e.to_string())?;
        let sd = sample_sd(&train.y);
        let constant = LeafPrior::Fixed(sd * sd / (4.0 * Hyperparameters::<f64>::DEFAULT_TREES as f64));
        let vanilla = summarize(&fit(&train, &test, Some(constant), &desk_schedule(), 520 + rep)?, 0.95)
            .map_err(|e| e.to_string())?;
        let med = &sparse.lambda_median;
        let min_active = med[1..4].iter().copied().fold(f64::INFINITY, f64::min);
        let max_null = med[4..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        reps.push(Exp2Rep {
            sparse_null_mse: null_mse(&sparse, &truth)?,
            constant_null_mse: null_mse(&vanilla, &truth)?,
            lambda_separated: min_active > max_null,
            min_active,
            max_null,
        });
    }
    Ok((reps, start.elapsed().as_secs_f64()))
}

fn criterion_sparsity(reps: &[Exp2Rep], seconds: f64) -> Outcome {
    let wins = reps.iter().filter(|r| r.sparse_null_mse < r.constant_null_mse).count();
    let pairs: Vec<String> = reps
        .iter()
        .map(|r| format!("{:.4}<{:.4}", r.sparse_null_mse, r.constant_null_mse))
        .collect();
    let detail = format!("{wins}/5 reps sparse < constant [{}], {seconds:.0}s", pairs.join(" "));
    if seconds > 2700.0 {
        return Err(format!("{detail}; over the 45 min budget"));
    }
    check(wins >= 4, detail)
}

fn criterion_lambda_separation(reps: &[Exp2Rep]) -> Outcome {
    let hits = reps.iter().filter(|r| r.lambda_separated).count();
    let pairs: Vec<String> = reps.iter().map(|r| format!("{:.2}>{:.2}", r.min_active, r.max_null)).collect();
    check(hits >= 4, format!("{hits}/5 reps separated (min active > max null: {})", pairs.join(" ")))
}

// ---------------------------------------------------------------------------
// 7. modifier concentration

fn criterion_modifiers() -> Outcome {
    let spec = DgpSpec {
        n_train: 500,
        n_test: 50,
        r: 10,
        seed: 700,
        ..DgpSpec::exp1()
    };
    let (train, test) = generate::<f64, _>(&spec, &mut RngStream::new(spec.seed, 0)).map_err(|e| e.to_string())?;
    let report = summarize(&fit(&train, &test, None, &desk_schedule(), 701)?, 0.95).map_err(|e| e.to_string())?;
    let theta11 = report.theta_mean[1][0];
    let mass3: f64 = report.theta_mean[3][..5].iter().sum();
    check(
        theta11 > 0.5 && mass3 >= 0.7,
        format!("theta_1,1 {theta11:.3}; beta_3 mass on z_1..z_5 {mass3:.3}"),
    )
}

// ---------------------------------------------------------------------------
// 8. determinism of the written output

fn criterion_determinism() -> Outcome {
    let spec = DgpSpec {
        n_train: 200,
        n_test: 20,
        seed: 800,
        ..DgpSpec::exp1()
    };
    let (train, test) = generate::<f64, _>(&spec, &mut RngStream::new(spec.seed, 0)).map_err(|e| e.to_string())?;
    let schedule = Schedule {
        chains: 2,
        iters: 150,
        burn: 50,
        thin: 1,
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for run in 0..2 {
        let chains = fit(&train, &test, None, &schedule, 801)?;
        let mut files = Vec::new();
        for c in &chains {
            let path = dir.path().join(format!("run_{run}/chain_{}", c.chain));
            c.write(&path, &serde_json::json!({"seed": 801})).map_err(|e| e.to_string())?;
            files.push(std::fs::read(path.join("params.csv")).map_err(|e| e.to_string())?);
        }
        bytes.push(files);
    }
    let size: usize = bytes[0].iter().map(Vec::len).sum();
    check(bytes[0] == bytes[1] && size > 0, format!("{size} bytes of params.csv compared"))
}

// ---------------------------------------------------------------------------
// 9. per-sweep cost in N

fn seconds_per_sweep(n: usize) -> Result<f64, String> {
    let spec = DgpSpec {
        n_train: n,
        n_test: 1,
        seed: 900,
        ..DgpSpec::exp1()
    };
    let train = generate::<f64, _>(&spec, &mut RngStream::new(spec.seed, 0)).map_err(|e| e.to_string())?.0;
    let hyper = Hyperparameters::calibrated(&train.y, train.p()).map_err(|e| e.to_string())?;
    let model = Model::new(&train, hyper, SamplerOptions::default()).map_err(|e| e.to_string())?;
    let mut state = model.initial_state();
    let mut rng = RngStream::new(901, 0);
    let mut diag = Diagnostics::default();
    for _ in 0..200 {
        model.sweep(&mut state, &mut rng, &mut diag).map_err(|e| e.to_string())?;
    }
    let mut blocks = Vec::new();
    for _ in 0..5 {
        let t = Instant::now();
        for _ in 0..100 {
            model.sweep(&mut state, &mut rng, &mut diag).map_err(|e| e.to_string())?;
        }
        blocks.push(t.elapsed().as_secs_f64() / 100.0);
    }
    blocks.sort_by(f64::total_cmp);
    Ok(blocks[2])
}

fn criterion_scaling() -> Outcome {
    let small = seconds_per_sweep(500)?;
    let large = seconds_per_sweep(1000)?;
    let ratio = large / small;
    check(
        ratio <= 2.5,
        format!("N=500 {:.2} ms, N=1000 {:.2} ms, ratio {ratio:.2}", small * 1e3, large * 1e3),
    )
}

// ---------------------------------------------------------------------------

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail, ok) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("{tag} {name} [{secs:.1}s] {detail}");
    ok
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a filter
    // argument selects criteria by number.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |k: &str| filter.is_empty() || filter.iter().any(|f| f == k);

    let mut ok = true;
    if wanted("1") {
        ok &= run("1 conjugacy oracles", criterion_conjugacy);
    }
    if wanted("2") {
        ok &= run("2 getting it right", criterion_getting_it_right);
    }
    if wanted("3") {
        ok &= run("3 enumerable posterior", criterion_enumeration);
    }
    if wanted("4") {
        ok &= run("4 experiment 1 recovery", criterion_exp1);
    }
    if wanted("5") || wanted("6") {
        match run_exp2() {
            Ok((reps, seconds)) => {
                if wanted("5") {
                    ok &= run("5 sparsity contrast", || criterion_sparsity(&reps, seconds));
                }
                if wanted("6") {
                    ok &= run("6 lambda separation", || criterion_lambda_separation(&reps));
                }
            }
            Err(e) => {
                println!("FAIL 5 sparsity contrast {e}");
                println!("FAIL 6 lambda separation {e}");
                ok = false;
            }
        }
    }
    if wanted("7") {
        ok &= run("7 modifier concentration", criterion_modifiers);
    }
    if wanted("8") {
        ok &= run("8 determinism", criterion_determinism);
    }
    if wanted("9") {
        ok &= run("9 scaling", criterion_scaling);
    }
    if !ok {
        std::process::exit(1);
    }
}
