//! `be-stability-lab`: spectral gaps, Wasserstein splits, and theorem-level
//! sweeps from the command line.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 hypothesis violation,
//! 3 certificate failure under --check, 64 configuration error.

use be_stability_core::harness::{self, MeasureFamily, SweepOptions};
use be_stability_core::measure::{
    build_grid_measure, check_uniform_convexity, Interval, LogConcaveMeasure1D, PotentialFamily,
    TOL_CONVEXITY,
};
use be_stability_core::{functionals::GridFunction, spectral, Error};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

const EXIT_OK: i32 = 0;
const EXIT_NUMERICAL: i32 = 1;
const EXIT_HYPOTHESIS: i32 = 2;
const EXIT_CERTIFICATE: i32 = 3;
const EXIT_CONFIG: i32 = 64;

#[derive(Parser)]
#[command(name = "be-stability-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat key-value config file; command-line flags win on conflict
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    #[arg(long = "domain-halfwidth")]
    domain_halfwidth: Option<f64>,
    /// JSON report path (written atomically)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Spectral gap and Poincare constant of one measure
    Poincare {
        #[command(flatten)]
        common: Common,
        /// gaussian | quartic | tilted | bimodal
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        variance: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
        /// number of nonzero eigenvalues to report
        #[arg(long)]
        eigs: Option<usize>,
    },
    /// Theorem-level parameter sweep
    Sweep {
        #[command(flatten)]
        common: Common,
        /// poincare-stability | coordinate | lsi | herbst | tail
        #[arg(long)]
        experiment: Option<String>,
        /// gaussian-scaled | quartic | tilted | bimodal-rescaled | gaussian
        #[arg(long)]
        family: Option<String>,
        /// parameter grid, "start:end:n" or a comma list
        #[arg(long)]
        deltas: Option<String>,
        /// comma list of tilt exponents for the LSI sweep
        #[arg(long = "tilt-p")]
        tilt_p: Option<String>,
        /// ambient dimension for the Poincare sweep (1 or 2)
        #[arg(long)]
        dim: Option<usize>,
        /// comma list of factor axes for the near-optimal family
        #[arg(long)]
        axes: Option<String>,
        /// mixture width for bimodal-rescaled
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        variance: Option<f64>,
        /// test function for herbst/tail: linear | abs
        #[arg(long = "F")]
        f: Option<String>,
        /// Lipschitz bound L for herbst
        #[arg(long = "L")]
        l: Option<f64>,
        /// deviation level t for the tail corollary
        #[arg(long)]
        t: Option<f64>,
        /// CSV output path
        #[arg(long = "out-csv")]
        out_csv: Option<PathBuf>,
        /// nonzero exit when a theorem certificate fails
        #[arg(long)]
        check: bool,
    },
    /// Dump a family member's grid, potential, and weights as CSV
    MeasureExport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        variance: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
    },
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidGrid(_) => EXIT_CONFIG,
        Error::Precondition(_)
        | Error::SpectrumGap(_)
        | Error::Degenerate(_)
        | Error::Unsupported(_) => EXIT_HYPOTHESIS,
        _ => EXIT_NUMERICAL,
    }
}

const CONFIG_KEYS: &[&str] = &[
    "seed",
    "grid-points",
    "domain-halfwidth",
    "out",
    "out-csv",
    "experiment",
    "family",
    "deltas",
    "tilt-p",
    "dim",
    "axes",
    "check",
    "variance",
    "delta",
    "lambda",
    "a",
    "s",
    "F",
    "L",
    "t",
    "eigs",
];

/// Flat `key = value` file; `#` starts a comment.
fn load_config(path: &Path) -> Result<BTreeMap<String, String>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                lineno + 1
            )));
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Config(format!(
                "{}:{}: unknown config key `{key}`",
                path.display(),
                lineno + 1
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Config values with flag overrides layered on top.
struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    fn new(common: &Common) -> Result<Self, Error> {
        let map = match &common.config {
            Some(path) => load_config(path)?,
            None => BTreeMap::new(),
        };
        let mut s = Settings { map };
        s.set_opt("seed", common.seed.map(|v| v.to_string()));
        s.set_opt("grid-points", common.grid_points.map(|v| v.to_string()));
        s.set_opt("domain-halfwidth", common.domain_halfwidth.map(|v| v.to_string()));
        s.set_opt("out", common.out.as_ref().map(|p| p.display().to_string()));
        Ok(s)
    }

    fn set_opt(&mut self, key: &str, value: Option<String>) {
        if let Some(v) = value {
            self.map.insert(key.to_string(), v);
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn get_f64(&self, key: &str) -> Result<Option<f64>, Error> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not a number")))
            })
            .transpose()
    }

    fn get_usize(&self, key: &str) -> Result<Option<usize>, Error> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not an integer")))
            })
            .transpose()
    }

    fn grid_points(&self) -> Result<usize, Error> {
        Ok(self.get_usize("grid-points")?.unwrap_or(1201))
    }

    fn seed(&self) -> Result<u64, Error> {
        Ok(self
            .get("seed")
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("key `seed`: `{v}` is not an integer")))
            })
            .transpose()?
            .unwrap_or(0))
    }
}

/// "start:end:n" or a comma-separated list.
fn parse_param_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = |msg: String| Error::Config(msg);
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("`{spec}`: expected start:end:n")));
        }
        let start: f64 = parts[0].parse().map_err(|_| bad(format!("bad start in `{spec}`")))?;
        let end: f64 = parts[1].parse().map_err(|_| bad(format!("bad end in `{spec}`")))?;
        let n: usize = parts[2].parse().map_err(|_| bad(format!("bad count in `{spec}`")))?;
        if n < 2 {
            return Err(bad(format!("`{spec}`: need at least 2 points")));
        }
        // geometric spacing keeps log-log rate fits well conditioned
        if start <= 0.0 || end <= start {
            return Err(bad(format!("`{spec}`: need 0 < start < end")));
        }
        let ratio = (end / start).powf(1.0 / (n - 1) as f64);
        Ok((0..n).map(|i| start * ratio.powi(i as i32)).collect())
    } else {
        spec.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("`{v}` is not a number")))
            })
            .collect()
    }
}

fn atomic_write(path: &Path, content: &str) -> Result<(), Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn potential_for(settings: &Settings) -> Result<PotentialFamily, Error> {
    let name = settings
        .get("family")
        .ok_or_else(|| Error::Config("missing required key `family`".into()))?;
    let pf = match name {
        "gaussian" => PotentialFamily::Gaussian {
            variance: settings.get_f64("variance")?.unwrap_or(1.0),
        },
        "quartic" => PotentialFamily::Quartic {
            delta: settings
                .get_f64("delta")?
                .ok_or_else(|| Error::Config("quartic needs `delta`".into()))?,
        },
        "tilted" => PotentialFamily::Tilted {
            lambda: settings
                .get_f64("lambda")?
                .ok_or_else(|| Error::Config("tilted needs `lambda`".into()))?,
        },
        "bimodal" => PotentialFamily::Mixture {
            a: settings
                .get_f64("a")?
                .ok_or_else(|| Error::Config("bimodal needs `a`".into()))?,
            s: settings
                .get_f64("s")?
                .ok_or_else(|| Error::Config("bimodal needs `s`".into()))?,
        },
        other => return Err(Error::Config(format!("unknown family `{other}`"))),
    };
    // parameter validity is a configuration concern at this boundary
    pf.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(pf)
}

fn build_member(settings: &Settings) -> Result<LogConcaveMeasure1D, Error> {
    let pf = potential_for(settings)?;
    let n = settings.grid_points()?;
    match settings.get_f64("domain-halfwidth")? {
        Some(hw) => build_grid_measure(|x| pf.eval(x), Interval::symmetric(hw, n)?),
        None => LogConcaveMeasure1D::from_family(pf, n),
    }
}

fn cmd_poincare(settings: &Settings) -> Result<i32, Error> {
    let m = build_member(settings)?;
    let n_eigs = settings.get_usize("eigs")?.unwrap_or(3);
    let spec = spectral::poincare_spectrum(&m, n_eigs)?;
    let convexity = check_uniform_convexity(&m, TOL_CONVEXITY);
    println!("C_P = {:.3}", spec.poincare_constant);
    for (i, lam) in spec.eigenvalues.iter().enumerate() {
        println!("lambda_{} = {:.6}", i + 1, lam);
    }
    let mut doc = serde_json::Map::new();
    doc.insert("c_p".into(), spec.poincare_constant.into());
    doc.insert("eigenvalues".into(), spec.eigenvalues.clone().into());
    doc.insert("residual_norms".into(), spec.residual_norms.clone().into());
    doc.insert("uniform".into(), convexity.uniform.into());
    doc.insert("convexity_margin".into(), convexity.margin.into());
    doc.insert(
        "config".into(),
        serde_json::Value::Object(
            settings
                .map
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        ),
    );
    if let Some(out) = settings.get("out") {
        atomic_write(Path::new(out), &serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(EXIT_OK)
}

fn sweep_family(settings: &Settings) -> Result<MeasureFamily, Error> {
    let name = settings
        .get("family")
        .ok_or_else(|| Error::Config("missing required key `family`".into()))?;
    let params = parse_param_grid(
        settings
            .get("deltas")
            .ok_or_else(|| Error::Config("missing required key `deltas`".into()))?,
    )?;
    let hw = settings.get_f64("domain-halfwidth")?;
    let fam = match name {
        "gaussian-scaled" => match hw {
            None => MeasureFamily::gaussian_scaled(params),
            Some(hw) => MeasureFamily::new("gaussian-scaled", params, true, move |d, n| {
                let pf = PotentialFamily::Gaussian { variance: 1.0 - d };
                pf.validate()?;
                build_grid_measure(|x| pf.eval(x), Interval::symmetric(hw, n)?)
            }),
        },
        "quartic" => match hw {
            None => MeasureFamily::quartic(params),
            Some(hw) => MeasureFamily::new("quartic", params, true, move |d, n| {
                let pf = PotentialFamily::Quartic { delta: d };
                pf.validate()?;
                build_grid_measure(|x| pf.eval(x), Interval::symmetric(hw, n)?)
            }),
        },
        "tilted" => match hw {
            None => MeasureFamily::tilted(params),
            Some(hw) => MeasureFamily::new("tilted", params, true, move |c, n| {
                let pf = PotentialFamily::Tilted { lambda: c };
                pf.validate()?;
                build_grid_measure(|x| pf.eval(x), Interval::symmetric(hw, n)?)
            }),
        },
        "bimodal-rescaled" => {
            if hw.is_some() {
                return Err(Error::Config(
                    "bimodal-rescaled picks its own domain; drop domain-halfwidth".into(),
                ));
            }
            let s = settings
                .get_f64("s")?
                .ok_or_else(|| Error::Config("bimodal-rescaled needs `s`".into()))?;
            MeasureFamily::bimodal_rescaled(params, s)
        }
        other => return Err(Error::Config(format!("unknown sweep family `{other}`"))),
    };
    Ok(fam)
}

fn lipschitz_test_function(settings: &Settings, m: &LogConcaveMeasure1D, l: f64) -> Result<GridFunction, Error> {
    match settings.get("F").unwrap_or("linear") {
        "linear" => Ok(GridFunction::on_measure(m, |x| l * x)),
        "abs" => Ok(GridFunction::on_measure(m, |x| l * x.abs())),
        other => Err(Error::Config(format!("unknown test function `{other}` (linear | abs)"))),
    }
}

fn cmd_sweep(settings: &Settings, check: bool) -> Result<i32, Error> {
    let experiment = settings
        .get("experiment")
        .ok_or_else(|| Error::Config("missing required key `experiment`".into()))?
        .to_string();
    let opts = SweepOptions {
        n_points: settings.grid_points()?,
        seed: settings.seed()?,
        eps_target: 1.0,
    };
    let (json, csv, pass) = match experiment.as_str() {
        "poincare-stability" => {
            let fam = sweep_family(settings)?;
            let dim = settings.get_usize("dim")?.unwrap_or(2);
            let axes: Vec<usize> = match settings.get("axes") {
                None => vec![0],
                Some(spec) => spec
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Config(format!("bad axis `{v}`")))
                    })
                    .collect::<Result<_, _>>()?,
            };
            let report = harness::run_poincare_stability(&fam, dim, &axes, &opts)?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            (report.to_json()?, Some(csv), report.pass)
        }
        "coordinate" => {
            let fam = sweep_family(settings)?;
            let report = harness::run_coordinate_variant(&fam, &opts)?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            (report.to_json()?, Some(csv), report.pass)
        }
        "lsi" => {
            let fam = sweep_family(settings)?;
            let ps = parse_param_grid(settings.get("tilt-p").unwrap_or("0.5,1"))?;
            let report = harness::run_lsi_stability(&fam, &ps, &opts)?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            (report.to_json()?, Some(csv), report.pass)
        }
        "herbst" => {
            let m = build_member(settings)?;
            let l = settings.get_f64("L")?.unwrap_or(1.0);
            let f = lipschitz_test_function(settings, &m, l)?;
            let report = harness::run_herbst(&f, &m, l)?;
            println!("eps = {:.6}  lambda0 = {:.4}  W1 = {:.5}", report.eps, report.lambda0, report.w1);
            (report.to_json()?, None, report.pass)
        }
        "tail" => {
            let m = build_member(settings)?;
            let t = settings
                .get_f64("t")?
                .ok_or_else(|| Error::Config("tail needs `t`".into()))?;
            let f = lipschitz_test_function(settings, &m, 1.0)?;
            let report = harness::run_tail_corollary(&f, &m, t)?;
            println!(
                "tail = {:.6}  eps = {:.6}  vacuous = {}",
                report.tail_probability, report.eps, report.vacuous
            );
            (report.to_json()?, None, report.herbst.pass)
        }
        other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
    };
    match settings.get("out") {
        Some(out) => atomic_write(Path::new(out), &json)?,
        None => println!("{json}"),
    }
    if let (Some(csv), Some(path)) = (csv, settings.get("out-csv")) {
        atomic_write(Path::new(path), std::str::from_utf8(&csv).expect("csv is ascii"))?;
    }
    if check && !pass {
        eprintln!("certificate failure: at least one row violates its bound");
        return Ok(EXIT_CERTIFICATE);
    }
    Ok(EXIT_OK)
}

fn cmd_measure_export(settings: &Settings) -> Result<i32, Error> {
    let m = build_member(settings)?;
    let mut buf = Vec::new();
    m.write_csv(&mut buf)?;
    match settings.get("out") {
        Some(out) => atomic_write(Path::new(out), std::str::from_utf8(&buf).expect("csv is ascii"))?,
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(EXIT_OK)
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.cmd {
        Cmd::Poincare { common, family, variance, delta, lambda, a, s, eigs } => {
            let mut settings = Settings::new(&common)?;
            settings.set_opt("family", family);
            settings.set_opt("variance", variance.map(|v| v.to_string()));
            settings.set_opt("delta", delta.map(|v| v.to_string()));
            settings.set_opt("lambda", lambda.map(|v| v.to_string()));
            settings.set_opt("a", a.map(|v| v.to_string()));
            settings.set_opt("s", s.map(|v| v.to_string()));
            settings.set_opt("eigs", eigs.map(|v| v.to_string()));
            cmd_poincare(&settings)
        }
        Cmd::Sweep {
            common,
            experiment,
            family,
            deltas,
            tilt_p,
            dim,
            axes,
            s,
            variance,
            f,
            l,
            t,
            out_csv,
            check,
        } => {
            let mut settings = Settings::new(&common)?;
            settings.set_opt("experiment", experiment);
            settings.set_opt("family", family);
            settings.set_opt("deltas", deltas);
            settings.set_opt("tilt-p", tilt_p);
            settings.set_opt("dim", dim.map(|v| v.to_string()));
            settings.set_opt("axes", axes);
            settings.set_opt("s", s.map(|v| v.to_string()));
            settings.set_opt("variance", variance.map(|v| v.to_string()));
            settings.set_opt("F", f);
            settings.set_opt("L", l.map(|v| v.to_string()));
            settings.set_opt("t", t.map(|v| v.to_string()));
            settings.set_opt("out-csv", out_csv.map(|p| p.display().to_string()));
            let check = check || settings.get("check").map(|v| v == "true") == Some(true);
            cmd_sweep(&settings, check)
        }
        Cmd::MeasureExport { common, family, variance, delta, lambda, a, s } => {
            let mut settings = Settings::new(&common)?;
            settings.set_opt("family", family);
            settings.set_opt("variance", variance.map(|v| v.to_string()));
            settings.set_opt("delta", delta.map(|v| v.to_string()));
            settings.set_opt("lambda", lambda.map(|v| v.to_string()));
            settings.set_opt("a", a.map(|v| v.to_string()));
            settings.set_opt("s", s.map(|v| v.to_string()));
            cmd_measure_export(&settings)
        }
    }
}
