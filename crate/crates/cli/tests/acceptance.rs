//! Acceptance run: one `PASS`/`FAIL` line per criterion, non-zero exit if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mixkern::estimators::{density_at, nw_at, panel_mean_at, EstimatorConfig};
use mixkern::experiments::{
    growth_n, run_envelope, run_mse, run_panel_growth_demo, BandwidthRule, EnvelopePlan, ExperimentPlan,
};
use mixkern::kernels::{make_kernel, KernelFamily, GAUSSIAN_CUTOFF};
use mixkern::processes::{ProcessKind, ProcessSpec, RegressionFn, ScaleFn};
use mixkern::sample::{PanelSample, Sample};
use mixkern::seed;
use mixkern::theory::{
    figure1_curves, figure1_grid, gamma_density, gamma_regression_model1, gamma_regression_model2,
    mixing_size_bounds, panel_exponents, EstimatorKind, ModelSpec,
};
use rand::Rng;

type Formula = Box<dyn Fn(f64) -> f64>;
type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------------------------
// 1. Oracle equivalence

/// Univariate kernel written out per family, independent of the library's evaluation.
fn oracle_ell(family: KernelFamily, coefficients: &[f64], u: f64) -> f64 {
    match family {
        KernelFamily::Rectangular => {
            if u.abs() <= 0.5 {
                1.0
            } else {
                0.0
            }
        }
        KernelFamily::Gaussian => {
            if u.abs() > GAUSSIAN_CUTOFF {
                0.0
            } else {
                (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
        }
        KernelFamily::Epanechnikov | KernelFamily::Polynomial => {
            if u.abs() > 1.0 {
                0.0
            } else {
                let mut poly = 0.0;
                for (k, c) in coefficients.iter().enumerate() {
                    poly += c * u.powi(2 * k as i32);
                }
                (1.0 - u * u) * poly
            }
        }
    }
}

struct Instance {
    family: KernelFamily,
    order: u32,
    b: Vec<f64>,
    z: Vec<f64>,
    /// `[individual][time][coordinate]`
    design: Vec<Vec<Vec<f64>>>,
    response: Vec<Vec<f64>>,
}

impl Instance {
    fn random(case: u64) -> Instance {
        let mut rng = seed::rng(seed::derive(0xACCE_0001, &[case]));
        let families = [
            (KernelFamily::Rectangular, 2),
            (KernelFamily::Epanechnikov, 2),
            (KernelFamily::Gaussian, 2),
            (KernelFamily::Polynomial, 2),
            (KernelFamily::Polynomial, 4),
            (KernelFamily::Polynomial, 6),
        ];
        let (family, order) = families[rng.random_range(0..families.len())];
        let n = rng.random_range(1..=4);
        let t = rng.random_range(1..=64);
        let d = rng.random_range(1..=2);
        let b = (0..n).map(|_| rng.random_range(0.3..2.0)).collect();
        let z = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let design = (0..n)
            .map(|_| (0..t).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect())
            .collect();
        let response = (0..n).map(|_| (0..t).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        Instance { family, order, b, z, design, response }
    }

    fn kernel_value(&self, coefficients: &[f64], b: f64, zt: &[f64]) -> f64 {
        let mut product = 1.0;
        for (zk, at) in zt.iter().zip(&self.z) {
            product *= oracle_ell(self.family, coefficients, (zk - at) / b) / b;
        }
        product
    }

    /// `(f̂_i, ĝ_i)` for individual `i` by direct summation.
    fn sums(&self, coefficients: &[f64], i: usize) -> (f64, f64) {
        let t = self.design[i].len() as f64;
        let mut f = 0.0;
        let mut g = 0.0;
        for (zt, x) in self.design[i].iter().zip(&self.response[i]) {
            let k = self.kernel_value(coefficients, self.b[i], zt);
            f += k;
            g += x * k;
        }
        (f / t, g / t)
    }

    fn sample(&self, i: usize) -> Sample<f64> {
        let d = self.z.len();
        Sample::new(self.design[i].concat(), d, Some(self.response[i].clone())).unwrap()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 || (a.is_nan() && b.is_nan())
}

fn criterion_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let inst = Instance::random(case);
        let kernel = make_kernel::<f64>(inst.family, inst.order).unwrap();
        let coefficients = kernel.coefficients().to_vec();

        let series = inst.sample(0);
        let cfg = EstimatorConfig::single(kernel.clone(), inst.b[0]);
        let (f, g) = inst.sums(&coefficients, 0);
        let density = density_at(&series, &cfg, &inst.z).unwrap();
        let nw = nw_at(&series, &cfg, &inst.z).unwrap();
        let nw_ok = if nw.is_ok() { close(nw.value, g / f) } else { f < cfg.denom_floor };
        if !close(density, f) || !close(nw.denominator, f) || !nw_ok {
            return outcome(false, format!("case {case}: series mismatch"));
        }
        worst = worst.max((density - f).abs());
        if nw.is_ok() {
            worst = worst.max((nw.value - g / f).abs());
        }

        let n = inst.design.len();
        let panel = PanelSample::new((0..n).map(|i| inst.sample(i)).collect()).unwrap();
        let cfg = EstimatorConfig::panel(kernel, inst.b.clone());
        let (mut f_sum, mut g_sum) = (0.0, 0.0);
        for i in 0..n {
            let (f, g) = inst.sums(&coefficients, i);
            f_sum += f;
            g_sum += g;
        }
        let (f_bar, g_bar) = (f_sum / n as f64, g_sum / n as f64);
        let pm = panel_mean_at(&panel, &cfg, &inst.z).unwrap();
        let ok = close(pm.denominator, f_bar) && if pm.is_ok() { close(pm.value, g_bar / f_bar) } else { f_bar < 1e-12 };
        if !ok {
            return outcome(false, format!("case {case}: panel mismatch"));
        }
        if pm.is_ok() {
            worst = worst.max((pm.value - g_bar / f_bar).abs());
        }
    }
    outcome(true, format!("100 instances, max abs difference {worst:.1e}"))
}

// ---------------------------------------------------------------------------------------------
// 2. Kernel construction

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut acc = f(a) + f(b);
    for k in 1..intervals {
        acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn criterion_kernels() -> Outcome {
    let mut details = Vec::new();
    for r in [2u32, 4, 6] {
        let k = make_kernel::<f64>(KernelFamily::Polynomial, r).unwrap();
        let moment = |j: i32| simpson(|u| u.powi(j) * k.eval(u), -1.0, 1.0, 20_000);
        let mass = moment(0);
        let vanishing = (1..r as i32).map(|j| moment(j).abs()).fold(0.0, f64::max);
        let abs_r = simpson(|u| u.abs().powi(r as i32) * k.eval(u), -1.0, 1.0, 20_000);
        if (mass - 1.0).abs() > 1e-10 || vanishing > 1e-10 || abs_r <= 0.0 {
            return outcome(false, format!("order {r}: mass {mass}, max vanishing moment {vanishing:e}, |u|^r {abs_r}"));
        }
        details.push(format!("r={r}: |u|^r moment {abs_r:.4}"));
    }
    outcome(true, details.join(", "))
}

// ---------------------------------------------------------------------------------------------
// 3. Exponent formulas

fn criterion_exponents() -> Outcome {
    let start = Instant::now();
    let eps = 1e-6;
    let inf = f64::MAX;
    let mut fail = Vec::new();
    let mut points = 0usize;
    // 5 values of q_f × 4 smoothness levels × 20 sizes = 400 grid points
    let q_values = [0.2, 0.4, 0.6, 0.8, 1.0];
    let smoothness = [0.5, 1.0, 2.0, 5.0];
    let sizes: Vec<f64> = (0..20).map(|i| 0.3 * i as f64).collect();
    for &qf in &q_values {
        for &s in &smoothness {
            let q = 0.5;
            let formulas: [(&str, Formula); 5] = [
                ("density", Box::new(move |v| gamma_density(v, qf, s).unwrap())),
                ("model1", Box::new(move |v| gamma_regression_model1(inf, v, q, qf, s, 1).unwrap())),
                ("model1-u", Box::new(move |v| gamma_regression_model1(0.7, v, q, qf, s, 2).unwrap())),
                ("model2", Box::new(move |v| gamma_regression_model2(v, q, qf, s, 1).unwrap())),
                ("panel-delta", Box::new(move |v| panel_exponents(inf, v, q, qf, s, 1).unwrap().1)),
            ];
            for (name, gamma) in &formulas {
                let values: Vec<f64> = sizes.iter().map(|&v| gamma(v)).collect();
                points += values.len();
                if values.iter().any(|g| !(0.0..=1.0).contains(g)) {
                    fail.push(format!("{name} out of [0,1] at q_f={qf}, s={s}"));
                }
                if values.windows(2).any(|w| w[1] < w[0] - 1e-15) {
                    fail.push(format!("{name} not monotone at q_f={qf}, s={s}"));
                }
                // branch boundaries: the size-one kink and the saturation threshold
                let thresholds = match *name {
                    "density" => vec![1.0, 1.0 + 1.0 / qf],
                    "model1" | "model1-u" => vec![1.0 / q, (1.0 + 1.0 / qf) / q],
                    _ => vec![1.0 / q, (1.0 + q / qf) / q],
                };
                for v0 in thresholds {
                    let jump = (gamma(v0 + eps) - gamma(v0 - eps)).abs();
                    if jump > 1e-4 {
                        fail.push(format!("{name} jumps by {jump:e} at v={v0}, q_f={qf}, s={s}"));
                    }
                }
            }
            let curves = figure1_curves(s, qf, &figure1_grid()).unwrap();
            for p in &curves {
                if p.mixing > p.linear + 1e-15 {
                    fail.push(format!("figure 1 dominance fails at m={}, rho={s}, q_f={qf}", p.m));
                }
                if p.m > 1.0 + 1.0 / qf && (p.mixing - p.linear).abs() > 1e-15 {
                    fail.push(format!("figure 1 curves differ at m={} > 1+1/q_f, rho={s}, q_f={qf}", p.m));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 1.0 {
        fail.push(format!("took {secs:.2}s"));
    }
    match fail.first() {
        None => outcome(true, format!("400 grid points × 5 formulas ({points} evaluations), {secs:.3}s")),
        Some(first) => outcome(false, format!("{} failures, first: {first}", fail.len())),
    }
}

// ---------------------------------------------------------------------------------------------
// 4. iid calibration

fn criterion_iid() -> Outcome {
    let start = Instant::now();
    let model = ModelSpec { v: f64::MAX, u: f64::MAX, ..Default::default() };
    let density_plan = ExperimentPlan {
        process: ProcessSpec::iid(1),
        model,
        estimator: EstimatorKind::Density,
        t_grid: vec![512, 1024, 2048, 4096, 8192, 16384],
        replications: 500,
        ..Default::default()
    };
    let nw_plan = ExperimentPlan {
        process: ProcessSpec::iid(1).with_regression(RegressionFn::Sin, ScaleFn::Const(1.0)),
        estimator: EstimatorKind::RegressionModel1,
        ..density_plan.clone()
    };
    let density = run_mse(&density_plan).unwrap();
    let nw = run_mse(&nw_plan).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let within = |e: f64| (e - 0.8).abs() <= 0.15;
    outcome(
        within(density.fitted_exponent) && within(nw.fitted_exponent) && density.is_valid() && nw.is_valid() && secs <= 300.0,
        format!(
            "density {:.3} ± {:.3}, NW {:.3} ± {:.3} (target 0.8 ± 0.15), {secs:.1}s",
            density.fitted_exponent, density.fitted_stderr, nw.fitted_exponent, nw.fitted_stderr
        ),
    )
}

// ---------------------------------------------------------------------------------------------
// 5 and 6. Fixed-design panel

fn fixed_design_plan() -> ExperimentPlan {
    let mut process = ProcessSpec::new(ProcessKind::PanelFixedDesign);
    process.h = ScaleFn::Const(0.1);
    ExperimentPlan {
        process,
        model: ModelSpec { v: 0.0, u: f64::MAX, ..Default::default() },
        estimator: EstimatorKind::Panel,
        replications: 200,
        panel_n: 8,
        ..Default::default()
    }
}

fn criterion_misspecified() -> Outcome {
    let plan = ExperimentPlan {
        kernel: KernelFamily::Gaussian,
        t_grid: vec![512, 1024, 2048, 4096],
        bandwidth: BandwidthRule::MisspecifiedIid,
        ..fixed_design_plan()
    };
    let report = run_mse(&plan).unwrap();
    outcome(
        report.fitted_exponent.abs() <= 2.0 * report.fitted_stderr && report.is_valid(),
        format!("fitted {:.4}, stderr {:.4}", report.fitted_exponent, report.fitted_stderr),
    )
}

fn criterion_panel_growth() -> Outcome {
    let start = Instant::now();
    let plan = ExperimentPlan {
        t_grid: vec![256, 512, 1024, 2048, 4096],
        zeta_override: Some(1.0),
        ..fixed_design_plan()
    };
    let demo = run_panel_growth_demo(&plan, 1.0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let schedule_exact = demo.growing.t_grid.iter().zip(&demo.growing.n_individuals).all(|(&t, &n)| n == growth_n(t, 1.0) && n == t);
    outcome(
        demo.fixed.fitted_exponent <= 0.05
            && demo.growing.fitted_exponent >= 0.2
            && schedule_exact
            && demo.fixed.is_valid()
            && demo.growing.is_valid()
            && secs <= 600.0,
        format!(
            "fixed N {:.4} ± {:.4}, N = T {:.4} ± {:.4}, {secs:.1}s",
            demo.fixed.fitted_exponent, demo.fixed.fitted_stderr, demo.growing.fitted_exponent, demo.growing.fitted_stderr
        ),
    )
}

// ---------------------------------------------------------------------------------------------
// 7. Envelope

fn criterion_envelope() -> Outcome {
    let iid = run_envelope(&EnvelopePlan { process: ProcessSpec::iid(1), replications: 2000, ..Default::default() }).unwrap();
    let worst_iid = (1..iid.lags.len()).map(|k| iid.cov[k].abs() / iid.stderr[k]).fold(0.0, f64::max);

    let theta = 2.0;
    let (v, _) = mixing_size_bounds(theta, 4.0).unwrap();
    let linear = run_envelope(&EnvelopePlan {
        process: ProcessSpec::linear_gaussian(theta),
        b: 1.0,
        z: vec![0.5],
        replications: 2000,
        window: 64,
        v: Some(v),
        ..Default::default()
    })
    .unwrap();
    let worst_linear = (1..linear.lags.len())
        .map(|k| (linear.cov[k].abs() - linear.scaled_envelope(k)) / linear.stderr[k])
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        iid.consistent_with_zero(3.0) && linear.within_envelope(3.0),
        format!(
            "iid max |cov|/se {worst_iid:.2}; linear θ=2 max (|cov| - C·env)/se {worst_linear:.2} with C = {:.4}",
            linear.constant
        ),
    )
}

// ---------------------------------------------------------------------------------------------
// 8. Determinism

const SMALL_CONFIG: &str = r#"
[process]
kind = "linear_gaussian"
theta = 1.5
phi = "sin"

[experiment]
estimator = "regression-model1"
t_grid = [128, 256, 512]
replications = 16
t = 400
sample = "SAMPLE"
envelope_replications = 64
"#;

const PANEL_CONFIG: &str = r#"
[process]
kind = "panel_fixed_design"

[model]
v = 0

[experiment]
t_grid = [32, 64, 128]
replications = 8
zeta = 1
"#;

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_mixkern")).args(args).output().map(|o| o.status.success()).unwrap_or(false)
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let fixture = root.path().join("fixture");
    let series_cfg = root.path().join("series.toml");
    let panel_cfg = root.path().join("panel.toml");
    let sample = fixture.join("sample.csv");
    fs::write(&series_cfg, SMALL_CONFIG.replace("SAMPLE", &sample.to_string_lossy().replace('\\', "/"))).unwrap();
    fs::write(&panel_cfg, PANEL_CONFIG).unwrap();
    let series = series_cfg.to_string_lossy().into_owned();
    let panel = panel_cfg.to_string_lossy().into_owned();
    if !run_cli(&["simulate", "--config", &series, "--out", &fixture.to_string_lossy(), "--seed", "11", "--quiet"]) {
        return outcome(false, "could not create the estimate fixture");
    }

    let commands: [(&str, &str); 7] = [
        ("bandwidth", &series),
        ("simulate", &series),
        ("estimate", &series),
        ("rates", &series),
        ("figure1", &series),
        ("envelope", &series),
        ("panel-demo", &panel),
    ];
    for (command, config) in commands {
        let mut outputs = Vec::new();
        for (run, threads) in ["1", "8", "1"].iter().enumerate() {
            let out = root.path().join(format!("{command}-{run}"));
            let args = [command, "--config", config, "--out", &out.to_string_lossy(), "--seed", "7", "--threads", threads, "--quiet"];
            if !run_cli(&args) {
                return outcome(false, format!("`{command}` failed"));
            }
            outputs.push(dir_contents(&out));
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] || outputs[0] != outputs[2] {
            return outcome(false, format!("`{command}` output differs between runs or thread counts"));
        }
    }
    outcome(true, "7 subcommands byte-identical over two runs and --threads 1 vs 8")
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", criterion_oracle),
        ("kernel construction", criterion_kernels),
        ("exponent formulas", criterion_exponents),
        ("iid calibration", criterion_iid),
        ("misspecification", criterion_misspecified),
        ("panel growth", criterion_panel_growth),
        ("envelope diagnostic", criterion_envelope),
        ("determinism", criterion_determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        println!("{} criterion {} ({name}): {}", if result.pass { "PASS" } else { "FAIL" }, k + 1, result.detail);
        failed += usize::from(!result.pass);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
