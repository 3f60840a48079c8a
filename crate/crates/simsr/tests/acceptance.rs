//! Acceptance suite: one `[PASS]` or `[FAIL]` line per criterion.
//!
//! The learning criteria train the configs shipped in `configs/`. The
//! process exits nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use simsr::commands;
use simsr::RunConfig;
use simsr_core::agent::{actor_loss, critic_loss, Actor, Critic};
use simsr_core::buffer::Batch;
use simsr_core::dynamics::DynamicsEnsemble;
use simsr_core::encoder::{cos_distance, Encoder, EncoderPair};
use simsr_core::env::{GridWorld, Transition};
use simsr_core::gradcheck::check;
use simsr_core::linalg::norm;
use simsr_core::mdp::{FiniteMdp, Policy};
use simsr_core::metric::{operator_step, solve_fixed_point, solve_fixed_point_from, value_bound_check, OperatorKind};
use simsr_core::rng::{seeded, SimRng};
use simsr_core::run::uniform_policy_metric;
use simsr_core::simsr::{simsr_gradients, simsr_loss, simsr_target, LossKind, TargetVariant};
use simsr_core::{DistanceMatrix, Matrix};

const TOL: f64 = 1e-12;
const BUDGET: usize = 100_000;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn config(name: &str) -> RunConfig {
    RunConfig::load(&configs().join(name)).expect("shipped config loads")
}

fn random_distance(rng: &mut SimRng, n: usize, scale: f64) -> DistanceMatrix {
    let mut m = Matrix::zeros(n, n);
    for x in 0..n {
        for y in x..n {
            let v = scale * rng.random::<f64>();
            m[(x, y)] = v;
            m[(y, x)] = v;
        }
    }
    DistanceMatrix::new(m).unwrap()
}

fn random_mdp(rng: &mut SimRng, max_states: usize, deterministic: bool) -> (FiniteMdp, Policy) {
    let n = rng.random_range(2..=max_states);
    let m = rng.random_range(1..=3);
    let gamma = rng.random_range(0.1..0.95);
    let mdp = FiniteMdp::random(rng, n, m, gamma, deterministic).unwrap();
    let policy = if deterministic {
        let actions: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
        Policy::deterministic(m, &actions).unwrap()
    } else {
        Policy::random(rng, n, m)
    };
    (mdp, policy)
}

fn two_state(transition: Vec<f64>) -> FiniteMdp {
    FiniteMdp::new(2, 1, transition, vec![1.0, 0.0], 0.5).unwrap()
}

// ---- exact solvers --------------------------------------------------------

fn exact_fixed_points() -> Verdict {
    let pi = Policy::uniform(2, 1);
    let kind = OperatorKind::IndependentCoupling;
    let a = solve_fixed_point(&two_state(vec![1.0, 0.0, 0.0, 1.0]), &pi, kind, TOL, BUDGET).unwrap().distances;
    let b = solve_fixed_point(&two_state(vec![0.5; 4]), &pi, kind, TOL, BUDGET).unwrap().distances;
    let ok = (a.get(0, 1) - 2.0).abs() <= 1e-6
        && a.get(0, 0).abs() <= 1e-6
        && a.get(1, 1).abs() <= 1e-6
        && (b.get(0, 0) - 0.5).abs() <= 1e-6
        && (b.get(1, 1) - 0.5).abs() <= 1e-6
        && (b.get(0, 1) - 1.5).abs() <= 1e-6;
    verdict(ok, format!("self-loop U(1,2) = {:.9}; mixing U(a,a) = {:.9}, U(a,b) = {:.9}", a.get(0, 1), b.get(0, 0), b.get(0, 1)))
}

fn shared_fixed_point() -> Verdict {
    let mut rng = seeded(2);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let (mdp, pi) = random_mdp(&mut rng, 12, i % 5 == 0);
        let spread = 1.0 / (1.0 - mdp.gamma());
        let init = random_distance(&mut rng, mdp.n_states(), 3.0 * spread);
        let kind = OperatorKind::IndependentCoupling;
        let zero = solve_fixed_point(&mdp, &pi, kind, TOL, BUDGET).unwrap().distances;
        let from = solve_fixed_point_from(&mdp, &pi, kind, TOL, BUDGET, init).unwrap().distances;
        worst = worst.max(zero.sup_distance(&from));
    }
    verdict(worst <= 1e-6, format!("max sup-norm gap {worst:.2e} over 50 MDPs"))
}

fn contraction() -> Verdict {
    let mut rng = seeded(3);
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in OperatorKind::ALL {
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..200 {
            let (mdp, pi) = random_mdp(&mut rng, 8, kind == OperatorKind::DeterministicBisim);
            let n = mdp.n_states();
            let (u1, u2) = (random_distance(&mut rng, n, 5.0), random_distance(&mut rng, n, 5.0));
            let d = u1.sup_distance(&u2);
            let f = operator_step(&u1, &mdp, &pi, kind).unwrap().sup_distance(&operator_step(&u2, &mdp, &pi, kind).unwrap());
            worst = worst.max(f / d - mdp.gamma());
        }
        ok &= worst <= 1e-9;
        lines.push(format!("{} max(ratio - γ) = {worst:.2e}", kind.name()));
    }
    verdict(ok, lines.join("; "))
}

fn value_bound() -> Verdict {
    let mut rng = seeded(4);
    let mut violations = 0;
    for _ in 0..100 {
        let (mdp, pi) = random_mdp(&mut rng, 10, false);
        let tol = 1e-10;
        let u = solve_fixed_point(&mdp, &pi, OperatorKind::IndependentCoupling, tol, BUDGET).unwrap().distances;
        violations += usize::from(value_bound_check(&mdp, &pi, &u, tol).unwrap().is_some());
    }
    verdict(violations == 0, format!("{violations} violations over 100 MDPs"))
}

fn coupling_ordering() -> Verdict {
    let mut rng = seeded(5);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let (mdp, pi) = random_mdp(&mut rng, 10, false);
        let w = solve_fixed_point(&mdp, &pi, OperatorKind::WassersteinBisim, TOL, BUDGET).unwrap().distances;
        let ic = solve_fixed_point(&mdp, &pi, OperatorKind::IndependentCoupling, TOL, BUDGET).unwrap().distances;
        for x in 0..mdp.n_states() {
            for y in 0..mdp.n_states() {
                worst = worst.max(w.get(x, y) - ic.get(x, y));
            }
        }
    }
    verdict(worst <= 1e-7, format!("max(W - IC) = {worst:.2e} over 50 MDPs"))
}

// ---- gradients ------------------------------------------------------------

fn random_matrix(rng: &mut SimRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_batch(rng: &mut SimRng, n: usize, obs_dim: usize, n_actions: usize) -> Batch {
    let ts: Vec<Transition> = (0..n)
        .map(|_| Transition {
            obs: (0..obs_dim).map(|_| rng.random::<f64>()).collect(),
            action: rng.random_range(0..n_actions),
            reward: rng.random::<f64>(),
            next_obs: (0..obs_dim).map(|_| rng.random::<f64>()).collect(),
            done: false,
        })
        .collect();
    Batch::from_transitions(&ts).unwrap()
}

fn gradient_suites() -> Verdict {
    const MAX_REL: f64 = 1e-4;
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut record = |name: &'static str, e: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some((_, w)) => *w = w.max(e),
        None => worst.push((name, e)),
    };
    for i in 0..20u64 {
        let mut rng = seeded(600 + i);

        let enc = Encoder::new(&mut rng, 5, 7, 4);
        let obs = random_matrix(&mut rng, 3, 5);
        let w = random_matrix(&mut rng, 3, 4);
        let g = enc.encode_backward(&obs, &w).unwrap();
        record("encoder", check(enc.net(), &g, |net| {
            let z = Encoder::from_mlp(net.clone()).encode_batch(&obs).unwrap();
            z.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum()
        }).relative_error);

        let ens = DynamicsEnsemble::new(3, 2, 6, 3, i).unwrap();
        let lat = random_matrix(&mut rng, 4, 3);
        let tgt = random_matrix(&mut rng, 4, 3);
        let acts: Vec<usize> = (0..4).map(|_| rng.random_range(0..2)).collect();
        let out = ens.nll_loss(&lat, &acts, &tgt).unwrap();
        for h in 0..ens.size() {
            record("dynamics nll", check(&ens.heads()[h], &out.grads[h], |head| {
                let mut heads = ens.heads().to_vec();
                heads[h] = head.clone();
                DynamicsEnsemble::from_heads(heads, 3, 2).unwrap().nll_loss(&lat, &acts, &tgt).unwrap().loss
            }).relative_error);
        }

        let pair = EncoderPair::new(Encoder::new(&mut rng, 5, 8, 4), 0.95).unwrap();
        let ens = DynamicsEnsemble::new(4, 3, 8, 3, i).unwrap();
        let batch = random_batch(&mut rng, 5, 5, 3);
        for (name, variant) in [
            ("simsr observation_sampling", TargetVariant::ObservationSampling),
            ("simsr latent_dynamics", TargetVariant::LatentDynamics),
        ] {
            let target = simsr_target(&batch, &pair, variant, Some(&ens), 0.9, &mut rng).unwrap();
            for kind in [LossKind::Mse, LossKind::Huber] {
                let g = simsr_gradients(&pair, &batch, &target, kind, 1.0).unwrap();
                record(name, check(pair.online.net(), &g.online, |net| {
                    let z = Encoder::from_mlp(net.clone()).encode_batch(&batch.obs).unwrap();
                    simsr_loss(&z, &target, kind, 1.0).unwrap().0
                }).relative_error);
            }
        }

        let critic = Critic::new(&mut rng, 3, 5, 3);
        let enc = Encoder::new(&mut rng, 4, 5, 3);
        let batch = random_batch(&mut rng, 4, 4, 3);
        let targets: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let out = critic_loss(&critic, &enc, &batch, &targets, 0.5).unwrap();
        let loss_with = |c: &Critic, e: &Encoder| critic_loss(c, e, &batch, &targets, 0.5).unwrap().loss;
        let q1 = check(&critic.q1, &out.q1, |q| loss_with(&Critic { q1: q.clone(), ..critic.clone() }, &enc));
        let q2 = check(&critic.q2, &out.q2, |q| loss_with(&Critic { q2: q.clone(), ..critic.clone() }, &enc));
        let ce = check(enc.net(), &out.encoder, |net| loss_with(&critic, &Encoder::from_mlp(net.clone())));
        record("critic", q1.relative_error.max(q2.relative_error).max(ce.relative_error));

        let critic = Critic::new(&mut rng, 3, 5, 4);
        let actor = Actor::new(&mut rng, 3, 5, 4);
        let z = random_matrix(&mut rng, 5, 3);
        let alpha = rng.random_range(0.0..0.5);
        let out = actor_loss(&actor, &critic, &z, alpha).unwrap();
        record("actor", check(&actor.net, &out.grads, |net| {
            actor_loss(&Actor { net: net.clone() }, &critic, &z, alpha).unwrap().loss
        }).relative_error);
    }
    let ok = worst.iter().all(|(_, e)| *e < MAX_REL);
    let detail: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    verdict(ok, format!("worst relative error over 20 instances: {}", detail.join(", ")))
}

fn unit_length() -> Verdict {
    let mut rng = seeded(7);
    let enc = Encoder::new(&mut rng, 9, 64, 50);
    let (mut norm_err, mut self_dist): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z = enc.encode(&x).unwrap();
        norm_err = norm_err.max((norm(&z) - 1.0).abs());
        self_dist = self_dist.max(cos_distance(&z, &z).unwrap());
    }
    verdict(norm_err <= 1e-6 && self_dist <= 1e-12, format!("max |‖φ‖ − 1| = {norm_err:.1e}, max self-distance {self_dist:.1e}"))
}

// ---- learning -------------------------------------------------------------

/// Runs `train` once per seed so each seed is timed on its own.
fn train_each(cfg: &RunConfig, out: &Path) -> Vec<(commands::TrainOutcome, Duration)> {
    cfg.seeds
        .iter()
        .map(|&s| {
            let one = RunConfig { seeds: vec![s], ..cfg.clone() };
            let t = Instant::now();
            let r = commands::train(&one, out).unwrap().pop().unwrap();
            (r, t.elapsed())
        })
        .collect()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.3}"))
}

fn metric_learning(out: &Path) -> Verdict {
    let cfg = config("metric_clean.toml");
    let env = GridWorld::new(cfg.env.grid()).unwrap();
    let u_max = uniform_policy_metric(env.mdp(), cfg.train.gamma).unwrap().distances.max_entry();
    let runs = train_each(&cfg, out);
    let mut good = 0;
    let mut per = Vec::new();
    for (r, t) in &runs {
        let q = r.quality.as_ref().unwrap();
        let ok = q.spearman.is_some_and(|p| p >= 0.9) && q.mean_abs_error <= 0.15 && t.as_secs() < 600;
        good += usize::from(ok);
        per.push(format!("ρ {} mae {:.3} {:.0}s", fmt_opt(q.spearman), q.mean_abs_error, t.as_secs_f64()));
    }
    verdict(u_max <= 2.0 && good >= 4, format!("U max {u_max:.3}; {good}/5 seeds meet ρ ≥ 0.9, mae ≤ 0.15 [{}]", per.join("; ")))
}

fn robustness(out: &Path) -> Verdict {
    let cfg = config("metric_scrolling.toml");
    let runs = train_each(&cfg, out);
    let (mut rho_ok, mut gap_ok) = (0, 0);
    let mut per = Vec::new();
    for (r, t) in &runs {
        let q = r.quality.as_ref().unwrap();
        rho_ok += usize::from(q.spearman.is_some_and(|p| p >= 0.9) && t.as_secs() < 900);
        gap_ok += usize::from(q.invariance_gap <= 0.1);
        per.push(format!("ρ {} gap {:.3} {:.0}s", fmt_opt(q.spearman), q.invariance_gap, t.as_secs_f64()));
    }
    verdict(
        gap_ok == runs.len() && rho_ok >= 3,
        format!("gap ≤ 0.1 on {gap_ok}/5, ρ ≥ 0.9 on {rho_ok}/5 [{}]", per.join("; ")),
    )
}

fn agent_learning(out: &Path) -> Verdict {
    let cfg = config("agent.toml");
    let runs = train_each(&cfg, out);
    let mut good = 0;
    let mut per = Vec::new();
    for (r, t) in &runs {
        let reached = r.evals.iter().find(|e| e.value_ratio() >= 0.9).map(|e| e.step);
        good += usize::from(reached.is_some_and(|s| s <= 30_000) && t.as_secs() < 900);
        per.push(format!("{} {:.0}s", reached.map_or("never".into(), |s| format!("step {s}")), t.as_secs_f64()));
    }
    verdict(good >= 4, format!("{good}/5 seeds reach 90% of optimal value [{}]", per.join("; ")))
}

fn transfer(out: &Path) -> Verdict {
    let start = Instant::now();
    let source = config("transfer_source.toml");
    let src_dir = out.join("source");
    commands::train(&source, &src_dir).unwrap();
    let cfg = config("transfer.toml");
    let (mut wins, mut ties) = (0, 0);
    let mut per = Vec::new();
    for &seed in &cfg.seeds {
        let one = RunConfig { seeds: vec![seed], ..cfg.clone() };
        let ckpt = src_dir.join("checkpoints").join(format!("final_seed{seed}.ckpt"));
        let r = commands::transfer(&one, &out.join("transfer"), &ckpt).unwrap().pop().unwrap();
        let (f, s) = (r.arm("frozen").unwrap(), r.arm("scratch").unwrap());
        if f.auc > s.auc {
            wins += 1;
        } else if f.auc == s.auc {
            ties += 1;
        }
        let curve = |a: &commands::ArmOutcome| a.curve.iter().map(|e| format!("{:.0}", e.mean_return)).collect::<Vec<_>>().join(" ");
        per.push(format!("    seed {seed}: frozen auc {:.1} [{}]\n    seed {seed}: scratch auc {:.1} [{}]", f.auc, curve(f), s.auc, curve(s)));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        wins + ties >= 3 && secs < 1800.0,
        format!("frozen ≥ scratch on {}/5 seeds ({wins} strictly, {ties} tied), {secs:.0}s\n{}", wins + ties, per.join("\n")),
    )
}

// ---- determinism ----------------------------------------------------------

fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(csv_files(&path));
        } else if path.extension().is_some_and(|e| e == "csv" || e == "ckpt") {
            out.push((path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
        }
    }
    out.sort();
    out
}

fn determinism(out: &Path) -> Verdict {
    let bin = env!("CARGO_BIN_EXE_simsr");
    let c = configs();
    let run = |args: &[String]| {
        let status = Command::new(bin).args(args).stdout(std::process::Stdio::null()).status().unwrap();
        assert!(status.success(), "{args:?} failed: {status}");
    };
    let path = |p: &Path| p.display().to_string();
    let src = out.join("src");
    run(&["train".into(), "--config".into(), path(&c.join("transfer_source.toml")), "--seed".into(), "1".into(), "--out".into(), path(&src)]);
    let src_ckpt = src.join("checkpoints").join("final_seed1.ckpt");
    let runs: Vec<(&str, PathBuf, Vec<String>)> = vec![
        ("solve-metric", c.join("solve_uniform_mixing.toml"), vec![]),
        ("train", c.join("smoke.toml"), vec![]),
        ("eval-metric-quality", c.join("transfer_source.toml"), vec!["--checkpoint".into(), path(&src_ckpt)]),
        ("transfer", c.join("smoke.toml"), vec!["--checkpoint".into(), path(&src_ckpt)]),
    ];
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for (i, (cmd, cfg, extra)) in runs.iter().enumerate() {
        let dirs: Vec<PathBuf> = (0..2).map(|rep| out.join(format!("{i}_{rep}"))).collect();
        for dir in &dirs {
            let mut args: Vec<String> = vec![cmd.to_string(), "--config".into(), path(cfg), "--seed".into(), "1".into()];
            args.extend(["--out".into(), path(dir)]);
            args.extend(extra.iter().cloned());
            run(&args);
        }
        let (a, b) = (csv_files(&dirs[0]), csv_files(&dirs[1]));
        compared += a.len();
        if a != b || a.is_empty() {
            mismatched.push(cmd.to_string());
        }
    }
    // Rerunning from the echoed resolved config reproduces the outputs.
    let echo = out.join("1_0").join(commands::RESOLVED_CONFIG);
    let again = out.join("echo");
    let status = Command::new(bin)
        .args(["train", "--config", &echo.display().to_string(), "--out", &again.display().to_string()])
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    let echo_ok = status.success() && csv_files(&again) == csv_files(&out.join("1_0"));
    verdict(
        mismatched.is_empty() && echo_ok,
        format!("{compared} files byte-identical across reruns; mismatches {mismatched:?}; resolved-config rerun identical: {echo_ok}"),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name);
    type Criterion<'a> = (u32, &'a str, Box<dyn Fn() -> Verdict + 'a>);
    let criteria: Vec<Criterion> = vec![
        (1, "exact fixed points", Box::new(exact_fixed_points)),
        (2, "shared fixed point from any start", Box::new(shared_fixed_point)),
        (3, "contraction", Box::new(contraction)),
        (4, "value bound", Box::new(value_bound)),
        (5, "coupling ordering", Box::new(coupling_ordering)),
        (6, "gradient suites", Box::new(gradient_suites)),
        (7, "unit length and zero self-distance", Box::new(unit_length)),
        (8, "metric learning end to end", Box::new(|| metric_learning(&dir("c8")))),
        (9, "robustness to a scrolling distractor", Box::new(|| robustness(&dir("c9")))),
        (10, "agent learning", Box::new(|| agent_learning(&dir("c10")))),
        (11, "transfer to a moved goal", Box::new(|| transfer(&dir("c11")))),
        (12, "determinism", Box::new(|| determinism(&dir("c12")))),
    ];
    let limits = [1.0, 30.0, 30.0, 60.0, 120.0, 120.0, f64::INFINITY];
    let mut failed = Vec::new();
    for (n, name, run) in criteria {
        let t = Instant::now();
        let mut v = run();
        let secs = t.elapsed().as_secs_f64();
        if let Some(&limit) = limits.get(n as usize - 1) {
            if secs >= limit {
                v.pass = false;
                v.detail.push_str(&format!(" (over the {limit}s budget)"));
            }
        }
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {n:>2} {name}: {} ({secs:.1}s)", v.detail);
        if !v.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
