//! Subcommand implementations. Each returns its data so tests can drive
//! them without going through the binary; writing is ordered and
//! single-threaded so artifacts are byte-for-byte reproducible.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rbsim::clifford::{sample_sequence, CliffordTable, Target};
use rbsim::fit::{aggregate, fit_decay, SpamInit};
use rbsim::rb::{epsilon_sweep, read_records_csv, write_records_csv, MeasurementMode, SweepRow};
use rbsim::rng::{sequence_stream, Purpose};
use rbsim::su2::{apply, BlochState};
use rbsim::{expand, run_experiment, CompensationScheme, DecayFit, Pulse, PulseSequence, SchemeKind};
use serde::Serialize;

use crate::{CliError, Config, DEFAULT_OUT_DIR, OUT_DIR_ENV, VERSION};

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub exact: bool,
    pub repeats: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.exact {
            cfg.experiment.measurement = MeasurementMode::Exact;
        }
        if let Some(r) = self.repeats {
            cfg.sweep.repeats = r;
        }
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = Some(dir.clone());
        }
    }
}

/// Flag or config value, then `$RBSIM_OUT_DIR`, then `./rbsim-out`.
pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// The reported uncertainty is one standard deviation from the covariance.
    pub stderr_convention: &'static str,
    #[serde(flatten)]
    pub fit: DecayFit,
}

impl FitReport {
    fn new(fit: DecayFit, scheme: Option<SchemeKind>, seed: Option<u64>) -> Self {
        Self { version: VERSION, scheme, seed, stderr_convention: "1-sigma", fit }
    }
}

#[derive(Serialize)]
struct DecayRow {
    #[serde(rename = "L")]
    length: usize,
    mean_survival: Option<f64>,
    variance_bound: Option<f64>,
    fitted: f64,
}

/// Measured points plus the fitted curve on a log-spaced integer grid.
fn write_decay_csv(dir: &Path, fit: &DecayFit) -> Result<(), CliError> {
    let max_len = fit.residuals.iter().map(|r| r.length).max().unwrap_or(1).max(1);
    let mut grid: Vec<usize> = (0..=100)
        .map(|k| ((max_len as f64).ln() * f64::from(k) / 100.0).exp().round() as usize)
        .chain(fit.residuals.iter().map(|r| r.length))
        .collect();
    grid.sort_unstable();
    grid.dedup();
    let mut w = csv::Writer::from_writer(create(dir, "decay.csv")?);
    for length in grid {
        let measured = fit.residuals.iter().find(|r| r.length == length);
        w.serialize(DecayRow {
            length,
            mean_survival: measured.map(|r| r.mean_survival),
            variance_bound: measured.map(|r| r.variance),
            fitted: fit.model(length as f64),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// `rb run`: records.csv, records.json, fit.json, decay.csv.
///
/// Records are written before fitting, so a fit failure still leaves the
/// raw data behind.
pub fn rb_run(cfg: &Config, out_dir: &Path) -> Result<FitReport, CliError> {
    let exp = cfg.experiment();
    let records = run_experiment(&exp)?;
    fs::create_dir_all(out_dir)?;
    let mut w = create(out_dir, "records.csv")?;
    write_records_csv(&records, &mut w)?;
    w.flush()?;
    write_json(out_dir, "records.json", &records)?;

    let fit = fit_decay(&aggregate(&records)?, cfg.spam())?;
    let report = FitReport::new(fit, Some(exp.scheme), Some(exp.seed));
    write_json(out_dir, "fit.json", &report)?;
    write_decay_csv(out_dir, &report.fit)?;
    Ok(report)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    version: &'static str,
    seed: u64,
    stderr_convention: &'static str,
    rows: &'a [SweepRow],
}

/// `rb sweep`: sweep.csv (one row per ε × scheme × repeat) and sweep.json.
pub fn rb_sweep(cfg: &Config, out_dir: &Path) -> Result<Vec<SweepRow>, CliError> {
    let exp = cfg.experiment();
    exp.validate()?;
    let rows = epsilon_sweep(&exp, &cfg.sweep.epsilons, &cfg.sweep.schemes, cfg.sweep.repeats, cfg.spam())?;
    fs::create_dir_all(out_dir)?;
    let mut w = csv::Writer::from_writer(create(out_dir, "sweep.csv")?);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    write_json(
        out_dir,
        "sweep.json",
        &SweepReport { version: VERSION, seed: cfg.seed, stderr_convention: "1-sigma", rows: &rows },
    )?;
    Ok(rows)
}

/// `fit`: refits an existing records CSV.
pub fn fit_records(path: &Path, spam: SpamInit) -> Result<FitReport, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let rows = read_records_csv(file)?;
    let scheme = rows.first().map(|r| r.scheme);
    let fit = fit_decay(&aggregate(&rows)?, spam)?;
    Ok(FitReport::new(fit, scheme, None))
}

pub fn write_fit_artifacts(report: &FitReport, out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)?;
    write_json(out_dir, "fit.json", report)?;
    write_decay_csv(out_dir, &report.fit)
}

/// Parses `1.57`, `pi`, `-pi/2`, `3pi/4` or `3*pi/4`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    let Some(at) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| format!("cannot parse angle `{s}`"));
    };
    let (coef, rest) = (t[..at].trim_end_matches('*'), &t[at + 2..]);
    let k = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| format!("cannot parse angle `{s}`"))?,
    };
    let d = match rest {
        "" => 1.0,
        r => r
            .strip_prefix('/')
            .and_then(|d| d.parse::<f64>().ok())
            .filter(|d| *d != 0.0)
            .ok_or_else(|| format!("cannot parse angle `{s}`"))?,
    };
    Ok(k * PI / d)
}

pub fn expand_target(theta: f64, phi: f64, scheme: SchemeKind) -> Result<PulseSequence, CliError> {
    Ok(expand(Pulse::drive(theta, phi), &CompensationScheme::from(scheme))?)
}

/// One line per pulse, then the total driven angle.
pub fn format_expansion(seq: &PulseSequence) -> String {
    let mut out = String::new();
    for (i, p) in seq.pulses.iter().enumerate() {
        let kind = if p.is_physical() { "drive" } else { "frame" };
        out.push_str(&format!(
            "{:>2}  theta = {:>9.6}π  phi = {:>9.6}π  {kind}\n",
            i + 1,
            p.theta / PI,
            p.phi / PI
        ));
    }
    out.push_str(&format!("total = {:.6}π ({:.9} rad)\n", seq.total_angle() / PI, seq.total_angle()));
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub gates: Vec<rbsim::clifford::GateAudit>,
    pub inversion_sequences: usize,
    pub inversion_failures: usize,
}

/// Table with the first driven pulse of `gate` shifted in phase.
pub fn corrupted_table(gate: usize, phase: f64) -> Result<CliffordTable, CliError> {
    let mut table = CliffordTable::standard();
    if gate == 0 || gate > table.gates.len() {
        return Err(CliError::Usage(format!("gate index {gate} out of range 1..=24")));
    }
    let pulse = table.gates[gate - 1]
        .decomposition
        .iter_mut()
        .find(|p| p.is_physical())
        .ok_or_else(|| CliError::Usage(format!("gate {gate} has no driven pulse to corrupt")))?;
    pulse.phi += phase;
    Ok(table)
}

/// Table audit plus inversion exactness: for `sequences` random sequences
/// (lengths cycling through 1..=64, both targets) the physical pulse
/// realization of sequence + inversion gate must land on the target.
pub fn clifford_check(table: &CliffordTable, sequences: usize, seed: u64) -> CheckReport {
    let audit = table.audit();
    let physical: Vec<_> = table.gates.iter().map(|g| g.decomposition_product()).collect();
    let mut failures = 0;
    for k in 0..sequences {
        let length = 1 + k % 64;
        let target = if (k / 64) % 2 == 0 { Target::Zero } else { Target::One };
        let mut rng = sequence_stream(seed, Purpose::Gates, 1, length, k);
        let mut seq = sample_sequence(length, &mut rng);
        seq.push(table.inversion_gate(&seq, target).index);
        let mut state = BlochState::ZERO;
        for &g in &seq {
            state = apply(&physical[g - 1], &state);
        }
        if target.probability(&state) < 1.0 - 1e-10 {
            failures += 1;
        }
    }
    CheckReport {
        passed: audit.passed() && failures == 0,
        gates: audit.gates,
        inversion_sequences: sequences,
        inversion_failures: failures,
    }
}

pub fn format_check(report: &CheckReport) -> String {
    let mut out = String::new();
    for g in &report.gates {
        let status = if g.passed() { "PASS".to_string() } else { format!("FAIL: {}", g.failures.join("; ")) };
        out.push_str(&format!("gate {:>2}  {:<12} {status}\n", g.index, g.label));
    }
    out.push_str(&format!(
        "inversion: {}/{} sequences exact\n",
        report.inversion_sequences - report.inversion_failures,
        report.inversion_sequences
    ));
    out.push_str(if report.passed { "clifford check: PASS\n" } else { "clifford check: FAIL\n" });
    out
}

impl CheckReport {
    pub fn into_result(self) -> Result<Self, CliError> {
        if self.passed {
            Ok(self)
        } else {
            Err(CliError::Audit {
                gates: self.gates.iter().filter(|g| !g.passed()).map(|g| g.index).collect(),
                inversion_failures: self.inversion_failures,
            })
        }
    }
}
