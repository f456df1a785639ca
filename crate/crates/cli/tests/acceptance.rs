//! Acceptance suite: every criterion runs at its pinned tolerance and prints
//! one PASS/FAIL line. With `--strict` or `TENSPCA_ACCEPTANCE_STRICT=1` the
//! process exits nonzero if any criterion fails.
//!
//! `cargo test -p tenspca-cli --test acceptance -- C6` runs a subset.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use tenspca::decomp::{tensor_pca, Component, PowerOpts};
use tenspca::io::{decode_tensor, encode_tensor, read_tensor, write_tensor};
use tenspca::linalg::{random_orthonormal, thin_svd, SeededRng};
use tenspca::synth::{
    adjusted_rand_index, estimation_error, gen_rank1, kmeans, parse_config, run_benchmark,
    CellReport, Method, SimConfig, SimReport,
};
use tenspca::tensor::{dot, double_center, mode_product, mode_product_vec, refold1, unfold1};
use tenspca::{Matrix, Tensor3};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 8] = [
    ("C1", "noiseless exactness", noiseless_exactness),
    ("C2", "rank-one error grid ordering", rank1_grid_ordering),
    ("C3", "power iteration convergence speed", convergence_speed),
    ("C4", "error rate in the number of genes", gene_rate),
    ("C5", "rank-four baseline dominance", rank4_dominance),
    ("C6", "clustering comparison", clustering_comparison),
    ("C7", "property suites", property_suites),
    ("C8", "CLI determinism", cli_determinism),
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let strict = args.iter().any(|a| a == "--strict")
        || std::env::var("TENSPCA_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let mut failing = Vec::new();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in CRITERIA {
        if !filters.is_empty()
            && !filters
                .iter()
                .any(|f| id == f.as_str() || name.contains(f.as_str()))
        {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Outcome::new(false, format!("panicked: {msg}"))
        });
        if !outcome.pass {
            failed += 1;
            failing.push(id);
        }
        println!(
            "{} {id} {name} [{:.1?}]: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            start.elapsed(),
            outcome.detail
        );
    }
    println!("{}/{ran} criteria passed", ran - failed);
    if failed > 0 {
        println!("failing: {}", failing.join(", "));
    }
    if strict && failed > 0 {
        std::process::exit(1);
    }
}

fn config(name: &str) -> SimConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_config(&text).unwrap()
}

fn series_median(cell: &CellReport, method: Method, component: Option<usize>) -> f64 {
    let s = cell.series(method, component).expect("series present");
    assert_eq!(
        s.n_failed, 0,
        "{} failed runs in cell {}",
        s.n_failed, cell.index
    );
    s.median
}

fn series_mean(cell: &CellReport, method: Method, component: Option<usize>) -> f64 {
    let s = cell.series(method, component).expect("series present");
    assert_eq!(
        s.n_failed, 0,
        "{} failed runs in cell {}",
        s.n_failed, cell.index
    );
    s.mean
}

/// Alignment loss over all three factors, the `u` factor included.
fn factor_error(est: &Component, truth: &Component) -> f64 {
    let eu = 1.0 - dot(&est.u, &truth.u).abs();
    estimation_error(est, truth).unwrap().max(eu)
}

fn noiseless_exactness() -> Outcome {
    let start = Instant::now();
    let opts = PowerOpts::default();
    let (mut worst_err, mut worst_sigma, mut worst_lambda) = (0.0f64, 0.0f64, 0.0f64);
    let mut cases = 0;
    for (i, &d) in [5usize, 10, 25, 50].iter().enumerate() {
        for rep in 0..3u64 {
            let mut rng = SeededRng::derive(101, &[i as u64, rep]);
            let lambda = 1.0 + rep as f64;
            let (x, truth) = gen_rank1(d, lambda, 0.0, &mut rng).unwrap();
            let model = tensor_pca(&x, 1, &opts).unwrap();
            worst_err = worst_err.max(factor_error(&model.components[0], &truth.components[0]));
            worst_lambda = worst_lambda.max((model.components[0].lambda - lambda).abs() / lambda);
            worst_sigma = worst_sigma.max(model.sigma.abs());
            cases += 1;
        }
    }
    for (i, &dims) in [(10, 10, 10), (30, 12, 9), (50, 50, 50), (40, 20, 30)]
        .iter()
        .enumerate()
    {
        let mut rng = SeededRng::derive(102, &[i as u64]);
        let (dg, ds, dt) = dims;
        let u = random_orthonormal(dg, 2, &mut rng).unwrap();
        let v = random_orthonormal(ds, 2, &mut rng).unwrap();
        let w = random_orthonormal(dt, 2, &mut rng).unwrap();
        let truth: Vec<Component> = [3.0, 1.5]
            .iter()
            .enumerate()
            .map(|(k, &lambda)| Component {
                lambda,
                u: u.column(k),
                v: v.column(k),
                w: w.column(k),
            })
            .collect();
        let mut x = Tensor3::zeros(dg, ds, dt);
        for c in &truth {
            x.axpy(1.0, &c.to_tensor()).unwrap();
        }
        let model = tensor_pca(&x, 2, &opts).unwrap();
        for (est, t) in model.components.iter().zip(&truth) {
            worst_err = worst_err.max(factor_error(est, t));
            worst_lambda = worst_lambda.max((est.lambda - t.lambda).abs() / t.lambda);
        }
        worst_sigma = worst_sigma.max(model.sigma.abs());
        cases += 1;
    }
    let elapsed = start.elapsed();
    let pass = worst_err <= 1e-8 && worst_sigma <= 1e-8 && elapsed < Duration::from_secs(1);
    Outcome::new(
        pass,
        format!(
            "{cases} tensors, max factor error {worst_err:.2e} (<= 1e-8), max sigma {worst_sigma:.2e} (<= 1e-8), \
             max relative lambda error {worst_lambda:.2e}, {elapsed:.2?} (< 1 s)"
        ),
    )
}

/// Cells of a report grouped by dimensions, each list ordered as the lambda grid.
fn by_dims(report: &SimReport) -> BTreeMap<(usize, usize, usize), Vec<&CellReport>> {
    let mut out: BTreeMap<_, Vec<&CellReport>> = BTreeMap::new();
    for c in &report.cells {
        out.entry(c.dims).or_default().push(c);
    }
    out
}

fn rank1_grid_ordering() -> Outcome {
    let cfg = config("rank1_grid.cfg");
    assert_eq!(cfg.n_runs, 50);
    let report = run_benchmark(&cfg).unwrap();
    let mut pass = report.elapsed < Duration::from_secs(300);
    let mut notes = Vec::new();
    for (dims, cells) in by_dims(&report) {
        let ufd: Vec<f64> = cells
            .iter()
            .map(|c| series_median(c, Method::Ufd, Some(1)))
            .collect();
        let pit: Vec<f64> = cells
            .iter()
            .map(|c| series_median(c, Method::Pit, Some(1)))
            .collect();
        for (i, c) in cells.iter().enumerate() {
            if c.lambda.unwrap() >= 4.0 && pit[i] > ufd[i] {
                pass = false;
                notes.push(format!(
                    "d={} lambda={}: PIT median above UFD",
                    dims.0,
                    c.lambda.unwrap()
                ));
            }
        }
        for (name, med) in [("UFD", &ufd), ("PIT", &pit)] {
            if med.windows(2).any(|w| w[1] >= w[0]) {
                pass = false;
                notes.push(format!(
                    "d={}: {name} medians not strictly decreasing",
                    dims.0
                ));
            }
        }
        notes.push(format!(
            "d={} medians UFD [{}] PIT [{}]",
            dims.0,
            fmt_list(&ufd),
            fmt_list(&pit)
        ));
    }
    notes.push(format!("{:.1?} (< 5 min)", report.elapsed));
    Outcome::new(pass, notes.join("; "))
}

fn convergence_speed() -> Outcome {
    let cfg = config("rank1_convergence.cfg");
    let report = run_benchmark(&cfg).unwrap();
    let cell = &report.cells[0];
    let scores = cell.scores_of(Method::Pit, Some(1)).unwrap();
    let iterations = scores.iterations.as_ref().unwrap();
    let converged = scores.converged.as_ref().unwrap();
    let fast = iterations
        .iter()
        .zip(converged)
        .filter(|(&i, &c)| c && i <= 10)
        .count();
    let share = fast as f64 / cfg.n_runs as f64;
    let max = iterations.iter().max().copied().unwrap_or(0);
    Outcome::new(
        share >= 0.95,
        format!(
            "{fast}/{} runs converged within 10 iterations ({:.0}%, need >= 95%), max {max}, mean {:.1}",
            cfg.n_runs,
            100.0 * share,
            iterations.iter().sum::<usize>() as f64 / iterations.len() as f64
        ),
    )
}

fn gene_rate() -> Outcome {
    let cfg = config("gene_rate.cfg");
    let report = run_benchmark(&cfg).unwrap();
    let means: Vec<f64> = report
        .cells
        .iter()
        .map(|c| series_mean(c, Method::Pit, Some(1)))
        .collect();
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let ratios: Vec<f64> = means.windows(2).map(|w| w[0] / w[1]).collect();
    let in_band = ratios.iter().all(|r| (1.4..=2.8).contains(r));
    Outcome::new(
        decreasing && in_band && report.elapsed < Duration::from_secs(300),
        format!(
            "mean PIT error at d_G=100,400,1600: [{}], strictly decreasing: {decreasing}; \
             ratios [{}] (band [1.4, 2.8]); {:.1?} (< 5 min)",
            fmt_list(&means),
            ratios
                .iter()
                .map(|r| format!("{r:.2}"))
                .collect::<Vec<_>>()
                .join(", "),
            report.elapsed
        ),
    )
}

fn rank4_dominance() -> Outcome {
    let cfg = config("rank4_baseline.cfg");
    let report = run_benchmark(&cfg).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for cell in &report.cells {
        let tensor: Vec<f64> = (1..=4)
            .map(|k| series_median(cell, Method::TensorPca, Some(k)))
            .collect();
        let classical: Vec<f64> = (1..=4)
            .map(|k| series_median(cell, Method::ClassicalPca, Some(k)))
            .collect();
        if tensor.iter().zip(&classical).any(|(t, c)| t >= c) {
            pass = false;
        }
        notes.push(format!(
            "lambda={} medians tensor [{}] classical [{}]",
            cell.lambda.unwrap(),
            fmt_list(&tensor),
            fmt_list(&classical)
        ));
    }
    Outcome::new(pass, notes.join("; "))
}

fn clustering_comparison() -> Outcome {
    let cfg = config("cluster_noise.cfg");
    assert_eq!((cfg.n_runs, cfg.k), (50, 5));
    let report = run_benchmark(&cfg).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for cell in &report.cells {
        let t = series_mean(cell, Method::TensorPca, None);
        let c = series_mean(cell, Method::ClassicalPca, None);
        let mut ok = t > c;
        if cell.sigma == 1.0 {
            ok &= t >= 0.9;
        }
        if cell.sigma == 20.0 {
            ok &= t <= 0.5 && c <= 0.5;
        }
        pass &= ok;
        notes.push(format!(
            "noise {}: tensor {t:.3} classical {c:.3}{}",
            cell.sigma,
            if ok { "" } else { " (out of band)" }
        ));
    }
    let table = report.summary_table();
    let order: Vec<&str> = table
        .lines()
        .skip(1)
        .filter_map(|l| l.split_whitespace().next())
        .collect();
    let rows_ok = order == ["20", "10", "5", "1"];
    pass &= rows_ok;
    notes.push(format!("summary rows by noise {}", order.join(",")));
    Outcome::new(
        pass,
        format!(
            "{}; bands: tensor > classical at every level, tensor >= 0.9 at noise 1, both <= 0.5 at noise 20",
            notes.join("; ")
        ),
    )
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn random_tensor(rng: &mut SeededRng, max: usize) -> Tensor3 {
    let d = [1 + rng.below(max), 1 + rng.below(max), 1 + rng.below(max)];
    Tensor3::from_fn(d[0], d[1], d[2], |_, _, _| rng.standard_normal())
}

fn random_vec(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.standard_normal()).collect()
}

fn property_suites() -> Outcome {
    let mut violations: Vec<String> = Vec::new();
    let mut cases = BTreeMap::new();
    let mut rng = SeededRng::new(7);
    let mut note = |name: &'static str, ok: bool, what: String, violations: &mut Vec<String>| {
        *cases.entry(name).or_insert(0usize) += 1;
        if !ok && violations.len() < 10 {
            violations.push(format!("{name}: {what}"));
        }
    };

    for _ in 0..300 {
        let t = random_tensor(&mut rng, 5);
        let (d1, d2, d3) = t.dims();
        for mode in 1..=3 {
            let x = random_vec(&mut rng, t.dim(mode));
            let got = mode_product(&t, &x, mode).unwrap();
            let (r, c) = (got.rows(), got.cols());
            let mut exact = true;
            for a in 0..r {
                for b in 0..c {
                    let mut acc = 0.0;
                    for i in 0..x.len() {
                        acc += match mode {
                            1 => t.get(i, a, b),
                            2 => t.get(a, i, b),
                            _ => t.get(a, b, i),
                        } * x[i];
                    }
                    exact &= acc == got.get(a, b);
                }
            }
            note(
                "contraction",
                exact,
                format!("mode {mode} on {d1}x{d2}x{d3}"),
                &mut violations,
            );
        }
        let (x, y) = (random_vec(&mut rng, d2), random_vec(&mut rng, d3));
        let got = mode_product_vec(&t, &x, &y, (2, 3)).unwrap();
        let ok = (0..d1).all(|i| {
            let mut acc = 0.0;
            let mut scale = 0.0;
            for j in 0..d2 {
                for k in 0..d3 {
                    acc += t.get(i, j, k) * x[j] * y[k];
                    scale += (t.get(i, j, k) * x[j] * y[k]).abs();
                }
            }
            (acc - got[i]).abs() <= 1e-12 * scale.max(1e-300)
        });
        note(
            "contraction",
            ok,
            "double contraction".into(),
            &mut violations,
        );

        let back = refold1(&unfold1(&t), d2, d3).unwrap();
        note(
            "unfold/refold",
            back == t,
            format!("{d1}x{d2}x{d3}"),
            &mut violations,
        );
        let bits = |t: &Tensor3| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let round = decode_tensor(&encode_tensor(&t)).unwrap();
        note(
            "binary round trip",
            round.dims() == t.dims() && bits(&round) == bits(&t),
            "bytes".into(),
            &mut violations,
        );

        let c = double_center(&t);
        let scale = t.max_abs().max(1e-300);
        let mut ok = true;
        for g in 0..d1 {
            let s = c.slice(g);
            for j in 0..d2 {
                ok &= (s[j * d3..(j + 1) * d3].iter().sum::<f64>() / d3 as f64).abs()
                    <= 1e-10 * scale;
            }
            for k in 0..d3 {
                ok &= ((0..d2).map(|j| s[j * d3 + k]).sum::<f64>() / d2 as f64).abs()
                    <= 1e-10 * scale;
            }
        }
        let cc = double_center(&c);
        ok &= c
            .data()
            .iter()
            .zip(cc.data())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * scale);
        note(
            "double centering",
            ok,
            format!("{d1}x{d2}x{d3}"),
            &mut violations,
        );
    }

    let dir = tempfile::tempdir().unwrap();
    for i in 0..20 {
        let t = random_tensor(&mut rng, 6);
        let p = dir.path().join(format!("t{i}.bin"));
        write_tensor(&p, &t).unwrap();
        let back = read_tensor(&p).unwrap();
        let same = back.dims() == t.dims()
            && back
                .data()
                .iter()
                .zip(t.data())
                .all(|(a, b)| a.to_bits() == b.to_bits());
        note("binary round trip", same, "file".into(), &mut violations);
    }

    for _ in 0..200 {
        let (m, n) = (1 + rng.below(12), 1 + rng.below(12));
        let mut a = Matrix::from_fn(m, n, |_, _| rng.standard_normal());
        if rng.below(2) == 0 && n > 1 {
            let cut = 1 + rng.below(n - 1);
            let base = a.clone();
            a = Matrix::from_fn(m, n, |i, j| {
                if j < cut {
                    base.get(i, j)
                } else {
                    0.5 * base.get(i, j % cut)
                }
            });
        }
        let svd = thin_svd(&a).unwrap();
        let p = m.min(n);
        let us = Matrix::from_fn(m, p, |i, j| svd.u.get(i, j) * svd.s[j]);
        let rec = us.matmul(&svd.v.transpose()).unwrap();
        let resid: f64 = a
            .data()
            .iter()
            .zip(rec.data())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let ortho = |q: &Matrix| {
            let g = q.transpose().matmul(q).unwrap();
            (0..g.rows())
                .flat_map(|i| (0..g.cols()).map(move |j| (i, j)))
                .map(|(i, j)| (g.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs())
                .fold(0.0f64, f64::max)
        };
        let sorted = svd.s.windows(2).all(|w| w[0] >= w[1]) && svd.s.iter().all(|&s| s >= 0.0);
        let ok = resid <= 1e-10 * a.frobenius_norm().max(1e-300)
            && ortho(&svd.u) <= 1e-10
            && ortho(&svd.v) <= 1e-10
            && sorted;
        note(
            "svd",
            ok,
            format!("{m}x{n} residual {resid:.1e}"),
            &mut violations,
        );
    }

    for _ in 0..300 {
        let n = 1 + rng.below(30);
        let ka = 1 + rng.below(5);
        let a: Vec<usize> = (0..n).map(|_| rng.below(ka)).collect();
        let kb = 1 + rng.below(5);
        let b: Vec<usize> = (0..n).map(|_| rng.below(kb)).collect();
        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..ka).collect();
            p.rotate_left(rng.below(ka));
            p
        };
        let ap: Vec<usize> = a.iter().map(|&l| perm[l] + 7).collect();
        let ab = adjusted_rand_index(&a, &b).unwrap();
        let ok = ab == adjusted_rand_index(&b, &a).unwrap()
            && adjusted_rand_index(&ap, &b).unwrap() == ab
            && adjusted_rand_index(&a, &a).unwrap() == 1.0
            && ab <= 1.0;
        note("ari axioms", ok, format!("n={n}"), &mut violations);
    }

    for _ in 0..100 {
        let n = 2 + rng.below(80);
        let p = 1 + rng.below(4);
        let pts = Matrix::from_fn(n, p, |i, _| rng.standard_normal() + (i % 3) as f64 * 3.0);
        let k = 1 + rng.below(n.min(6));
        let fit = kmeans(&pts, k, 1 + rng.below(3), &mut rng).unwrap();
        let slack = 1e-12 * pts.data().iter().map(|x| x * x).sum::<f64>();
        let monotone = fit.inertia_history.windows(2).all(|w| w[1] <= w[0] + slack);
        let sse: f64 = (0..n)
            .map(|i| {
                pts.row(i)
                    .iter()
                    .zip(fit.centroids.row(fit.labels[i]))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum();
        let consistent = (sse - fit.inertia).abs() <= 1e-8 * sse.max(1e-300) + 1e-300;
        note(
            "k-means inertia",
            monotone && consistent,
            format!("n={n} k={k}"),
            &mut violations,
        );
    }

    let total: usize = cases.values().sum();
    let summary = cases
        .iter()
        .map(|(k, v)| format!("{k} {v}"))
        .collect::<Vec<_>>()
        .join(", ");
    let detail = if violations.is_empty() {
        format!("{total} cases ({summary}), no violations")
    } else {
        format!(
            "{total} cases ({summary}); violations: {}",
            violations.join("; ")
        )
    };
    Outcome::new(violations.is_empty(), detail)
}

struct Run {
    code: i32,
    stdout: Vec<u8>,
}

fn tenspca(cwd: &Path, args: &[&str], threads_env: Option<&str>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tenspca"));
    cmd.current_dir(cwd)
        .args(args)
        .env_remove("TENSPCA_THREADS");
    if let Some(t) = threads_env {
        cmd.env("TENSPCA_THREADS", t);
    }
    let out = cmd.output().expect("spawn tenspca");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: out.stdout,
    }
}

fn dir_contents(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        out.insert(p.file_name().unwrap().into(), std::fs::read(&p).unwrap());
    }
    out
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let work = tmp.path();
    let mut problems = Vec::new();
    let mut compared = 0;

    let setup: [&[&str]; 2] = [
        &[
            "generate", "rank1", "--d", "20", "--lambda", "4", "--seed", "5", "--out", "gen1",
        ],
        &[
            "generate",
            "cluster",
            "--n-genes",
            "150",
            "--k",
            "5",
            "--sigma",
            "2",
            "--seed",
            "6",
            "--out",
            "genc",
        ],
    ];
    for args in setup {
        let r = tenspca(work, args, None);
        if r.code != 0 {
            return Outcome::new(false, format!("{args:?} exited {}", r.code));
        }
    }

    let commands: [(&str, Vec<&str>); 4] = [
        (
            "generate",
            vec![
                "generate", "rank4", "--dims", "30x6x7", "--lambda", "6", "--seed", "9",
            ],
        ),
        (
            "decompose",
            vec![
                "decompose",
                "gen1/tensor.bin",
                "--rank",
                "2",
                "--variant",
                "direct",
            ],
        ),
        (
            "cluster",
            vec![
                "cluster",
                "genc/tensor.bin",
                "--k",
                "5",
                "--dims",
                "3",
                "--seed",
                "7",
            ],
        ),
        (
            "bench",
            vec![
                "bench",
                "--experiment",
                "rank1",
                "--d",
                "15",
                "--lambda",
                "3,5",
                "--runs",
                "6",
                "--seed",
                "8",
                "--methods",
                "UFD,PIT,classicalPCA",
            ],
        ),
    ];
    let variants: [(&str, Vec<&str>, Option<&str>); 4] = [
        ("default", vec![], None),
        ("repeat", vec![], None),
        ("threads1", vec!["--threads", "1"], None),
        ("env4", vec!["--threads", "2"], Some("4")),
    ];
    for (name, base) in &commands {
        let mut reference: Option<(String, Vec<u8>, BTreeMap<PathBuf, Vec<u8>>)> = None;
        for (vname, extra, env) in &variants {
            let out = format!("{name}_{vname}");
            let mut args = base.clone();
            args.extend(extra.iter().copied());
            args.extend(["--out", out.as_str()]);
            let r = tenspca(work, &args, *env);
            if r.code != 0 {
                problems.push(format!("{name} ({vname}) exited {}", r.code));
                continue;
            }
            // bench prints the output directory nowhere; generate names it
            let stdout = String::from_utf8_lossy(&r.stdout)
                .replace(&out, "OUT")
                .into_bytes();
            let files = dir_contents(&work.join(&out));
            match &reference {
                None => reference = Some((vname.to_string(), stdout, files)),
                Some((rname, rstdout, rfiles)) => {
                    compared += 1;
                    if rfiles != &files {
                        problems.push(format!("{name}: files differ between {rname} and {vname}"));
                    }
                    if rstdout != &stdout {
                        problems.push(format!(
                            "{name}: stdout differs between {rname} and {vname}"
                        ));
                    }
                }
            }
        }
    }

    let mut expected: Vec<String> = vec!["gen1".into(), "genc".into()];
    for (name, _) in &commands {
        for (vname, _, _) in &variants {
            expected.push(format!("{name}_{vname}"));
        }
    }
    expected.sort();
    let mut found: Vec<String> = std::fs::read_dir(work)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    found.sort();
    if found != expected {
        problems.push(format!(
            "unexpected entries in the working directory: {found:?}"
        ));
    }

    Outcome::new(
        problems.is_empty() && compared == commands.len() * (variants.len() - 1),
        if problems.is_empty() {
            format!(
                "{compared} output sets byte-identical across repeats, --threads 1 and TENSPCA_THREADS=4; nothing written outside --out"
            )
        } else {
            problems.join("; ")
        },
    )
}
