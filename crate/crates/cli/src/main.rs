use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use turbo_bec::codec::{decoder_by_name, decoder_names, TurboCode, DEFAULT_MAX_ITERATIONS};
use turbo_bec::density::{
    coding_rate, puncture_fraction_for_rate, punctured_rate, threshold, DegreeProfile, ThresholdOptions,
    TurboEnsemble,
};
use turbo_bec::erasure::{ErasureAnalysis, PuncturePattern};
use turbo_bec::optimizer::{optimize, OptimizerConfig};
use turbo_bec::peg::{compute_girth, girth_lower_bound, girth_upper_bound, graph_to_interleaver, peg_build};
use turbo_bec::sim::{results_to_csv, run_fer, StopRule};
use turbo_bec::trellis::RscSpec;

#[derive(Parser)]
#[command(name = "turbo-bec", version, about = "Irregular turbo codes on the binary erasure channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// State alphabets, transition matrices and extrinsic erasure probabilities.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Grid points per axis for the (p, q) table.
        #[arg(long, default_value_t = 11)]
        grid: usize,
    },
    /// Density-evolution threshold of an ensemble.
    Threshold {
        #[command(flatten)]
        common: Common,
        /// Puncturing period used when the pattern is derived from --rate.
        #[arg(long)]
        period: Option<usize>,
    },
    /// Differential-evolution search for a degree profile.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 12)]
        dmax: usize,
        #[arg(long, default_value_t = 200)]
        generations: usize,
        #[arg(long, default_value_t = 40)]
        population: usize,
        #[arg(long, default_value_t = 0.5)]
        scale: f64,
        #[arg(long, default_value_t = 0.9)]
        crossover: f64,
        /// Comma-separated degrees allowed to carry mass.
        #[arg(long, value_delimiter = ',')]
        degrees: Option<Vec<usize>>,
    },
    /// Build a PEG interleaver and write the permutation (1-based).
    Interleave {
        #[command(flatten)]
        common: Common,
        /// Number of information bits.
        #[arg(long = "K", alias = "k")]
        info_len: usize,
        /// Accepted for compatibility; construction is always deterministic.
        #[arg(long)]
        seedless: bool,
    },
    /// Monte-Carlo frame error rate with a PEG interleaver.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K", alias = "k")]
        info_len: usize,
        /// Channel erasure probabilities, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        p0: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        max_trials: usize,
        #[arg(long, default_value_t = 100)]
        target_errors: usize,
        #[arg(long, default_value = "peeling")]
        decoder: String,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
        max_iters: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Constituent code in octal, e.g. 1,5/7.
    #[arg(long, default_value = "1,5/7")]
    code: String,
    /// Puncturing pattern, e.g. 1,0.
    #[arg(long)]
    pattern: Option<String>,
    /// Degree profile, e.g. f2=0.8,f4=0.2.
    #[arg(long)]
    profile: Option<String>,
    /// Target coding rate.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Common {
    fn analysis(&self) -> Result<ErasureAnalysis> {
        let spec: RscSpec = self.code.parse().with_context(|| format!("bad --code '{}'", self.code))?;
        Ok(ErasureAnalysis::new(spec)?)
    }

    fn pattern(&self) -> Result<Option<PuncturePattern>> {
        self.pattern.as_deref().map(|s| s.parse().with_context(|| format!("bad --pattern '{s}'"))).transpose()
    }

    fn profile(&self) -> Result<DegreeProfile> {
        match &self.profile {
            Some(s) => s.parse().with_context(|| format!("bad --profile '{s}'")),
            None => Ok(DegreeProfile::regular(2)?),
        }
    }

    /// Ensemble from --profile plus --pattern and/or --rate.
    fn ensemble(&self, analysis: &ErasureAnalysis, period: Option<usize>, info_len: usize) -> Result<TurboEnsemble> {
        let profile = self.profile()?;
        let ensemble = match (self.pattern()?, self.rate) {
            (Some(x), None) => TurboEnsemble::with_pattern(*analysis.spec(), profile, x, info_len)?,
            (None, Some(rate)) => TurboEnsemble::for_rate(analysis, profile, rate, period, info_len)?,
            (Some(x), Some(rate)) => {
                let phi = puncture_fraction_for_rate(&profile, analysis.spec().rate(), rate)?;
                let e = TurboEnsemble::with_pattern(*analysis.spec(), profile, x, info_len)?;
                if (e.pattern.puncture_fraction() - phi).abs() > 0.5 / e.pattern.period() as f64 + 1e-9 {
                    bail!("pattern punctures {:.4} but rate {rate} needs {phi:.4}", e.pattern.puncture_fraction());
                }
                e
            }
            (None, None) => TurboEnsemble::with_pattern(*analysis.spec(), profile, PuncturePattern::unpunctured(1), info_len)?,
        };
        Ok(ensemble)
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(io::BufWriter::new(fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { common, grid } => analyze(&common, grid),
        Command::Threshold { common, period } => threshold_cmd(&common, period),
        Command::Optimize { common, dmax, generations, population, scale, crossover, degrees } => {
            let config = OptimizerConfig {
                population_size: population,
                scale_factor: scale,
                crossover_rate: crossover,
                generations,
                seed: common.seed,
                max_degree: dmax,
                active_degrees: degrees,
                ..Default::default()
            };
            optimize_cmd(&common, &config)
        }
        Command::Interleave { common, info_len, seedless: _ } => interleave(&common, info_len),
        Command::Simulate { common, info_len, p0, max_trials, target_errors, decoder, max_iters } => {
            simulate(&common, info_len, &p0, StopRule { max_trials, target_frame_errors: target_errors }, &decoder, max_iters)
        }
    }
}

fn analyze(common: &Common, grid: usize) -> Result<()> {
    if grid < 2 {
        bail!("--grid must be at least 2");
    }
    let a = common.analysis()?;
    let x = common.pattern()?.unwrap_or_else(|| PuncturePattern::unpunctured(1));
    let axis: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let mut rows = Vec::new();
    for &p in &axis {
        for &q in &axis {
            rows.push((p, q, a.punctured_extrinsic_probability(p, q, &x)?));
        }
    }
    let masks = |members: &[turbo_bec::erasure::StateMask]| -> Vec<Vec<usize>> { members.iter().map(|m| m.states().collect()).collect() };
    let table = |m: &turbo_bec::erasure::BilinearMatrix| -> Vec<Vec<String>> {
        (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j).to_string()).collect()).collect()
    };
    let ind = a.indicator();
    let erased: Vec<Vec<u8>> = (0..ind.rows()).map(|i| (0..ind.cols()).map(|j| ind.erased(i, j)).collect()).collect();
    let received: Vec<Vec<u8>> = (0..ind.rows()).map(|i| (0..ind.cols()).map(|j| ind.received(i, j)).collect()).collect();
    let catastrophic = a.is_catastrophic(&x);

    let mut w = common.writer()?;
    match common.format {
        Format::Json => {
            let doc = json!({
                "code": common.code,
                "pattern": x.to_string(),
                "forward_alphabet": masks(a.forward_alphabet().members()),
                "backward_alphabet": masks(a.backward_alphabet().members()),
                "forward_matrix": table(a.forward_matrix()),
                "backward_matrix": table(a.backward_matrix()),
                "indicator_erased": erased,
                "indicator_received": received,
                "catastrophic": catastrophic.catastrophic,
                "grid": rows.iter().map(|&(p, q, v)| json!({"p": p, "q": q, "P_ext": v})).collect::<Vec<_>>(),
            });
            writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
        }
        Format::Csv => {
            writeln!(w, "# code {} pattern {}", common.code, x)?;
            writeln!(w, "# forward alphabet {:?}", masks(a.forward_alphabet().members()))?;
            writeln!(w, "# backward alphabet {:?}", masks(a.backward_alphabet().members()))?;
            for (name, m) in [("M_F", a.forward_matrix()), ("M_B", a.backward_matrix())] {
                for (i, row) in table(m).iter().enumerate() {
                    writeln!(w, "# {name}[{}] {}", i + 1, row.join(" | "))?;
                }
            }
            for (name, m) in [("A", &erased), ("B", &received)] {
                for (i, row) in m.iter().enumerate() {
                    writeln!(w, "# T.{name}[{}] {:?}", i + 1, row)?;
                }
            }
            writeln!(w, "p,q,pattern,P_ext")?;
            for (p, q, v) in rows {
                writeln!(w, "{p},{q},{},{v}", x.to_string().replace(',', ""))?;
            }
        }
    }
    Ok(())
}

fn threshold_cmd(common: &Common, period: Option<usize>) -> Result<()> {
    let a = common.analysis()?;
    let e = common.ensemble(&a, period, 1)?;
    let r = threshold(&e.profile.edge_distribution(), &a, &e.pattern, &ThresholdOptions::default())?;
    let gap = 1.0 - e.coding_rate - r.threshold;
    let mut w = common.writer()?;
    match common.format {
        Format::Json => {
            let doc = json!({
                "p_th": r.threshold,
                "catastrophic": r.catastrophic,
                "phi_p": e.puncture_fraction,
                "pattern": e.pattern.to_string(),
                "pattern_phi_p": e.pattern.puncture_fraction(),
                "coding_rate": e.coding_rate,
                "average_degree": e.profile.average_degree(),
                "gap_to_capacity": gap,
            });
            writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
        }
        Format::Csv => {
            writeln!(w, "p_th,catastrophic,phi_p,pattern,coding_rate,gap_to_capacity")?;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.threshold,
                r.catastrophic,
                e.puncture_fraction,
                e.pattern.to_string().replace(',', ""),
                e.coding_rate,
                gap
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GenerationLine<'a> {
    generation: usize,
    profile: String,
    phi_p: f64,
    p_th: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern: Option<&'a str>,
}

fn optimize_cmd(common: &Common, config: &OptimizerConfig) -> Result<()> {
    let a = common.analysis()?;
    let Some(rate) = common.rate else { bail!("optimize needs --rate") };
    let mut w = common.writer()?;
    if common.format == Format::Csv {
        writeln!(w, "generation,p_th,phi_p,profile")?;
    }
    let mut io_err = None;
    let result = optimize(rate, &a, config, |g| {
        let line = match common.format {
            Format::Json => serde_json::to_string(&GenerationLine {
                generation: g.generation,
                profile: g.profile.to_string(),
                phi_p: g.puncture_fraction,
                p_th: g.threshold,
                pattern: None,
            })
            .expect("plain data serializes"),
            Format::Csv => format!("{},{},{},\"{}\"", g.generation, g.threshold, g.puncture_fraction, g.profile),
        };
        if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let pattern = result.pattern.to_string();
    let rho = punctured_rate(a.spec().rate(), result.puncture_fraction)?;
    match common.format {
        Format::Json => writeln!(
            w,
            "{}",
            json!({
                "final": true,
                "profile": result.profile.to_string(),
                "phi_p": result.puncture_fraction,
                "pattern": pattern,
                "p_th": result.threshold,
                "coding_rate": coding_rate(&result.profile, rho),
            })
        )?,
        Format::Csv => writeln!(w, "final,{},{},\"{}\"", result.threshold, result.puncture_fraction, result.profile)?,
    }
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn interleave(common: &Common, info_len: usize) -> Result<()> {
    if info_len == 0 {
        bail!("--K must be positive");
    }
    let a = common.analysis()?;
    let e = common.ensemble(&a, None, info_len)?;
    let punctured = !e.pattern.is_unpunctured();
    let g = peg_build(info_len, &e.profile, 1, punctured.then_some(&e.pattern))?;
    let pi = graph_to_interleaver(&g)?;
    let girth = compute_girth(&g);
    let n = pi.len();
    let summary = json!({
        "K": info_len,
        "N": n,
        "profile": e.profile.to_string(),
        "pattern": e.pattern.to_string(),
        "degree_counts": g.degree_histogram(),
        "girth": girth.girth,
        "bit_transition_girth": girth.bit_transition_girth,
        "girth_lower_bound": girth_lower_bound(n, 1, e.profile.max_degree())?,
        "girth_upper_bound": if n >= 2 { Some(girth_upper_bound(n, 1)?) } else { None },
    });
    let mut w = common.writer()?;
    for p in pi.one_based() {
        writeln!(w, "{p}")?;
    }
    w.flush()?;
    match &common.out {
        Some(out) => {
            let path = sidecar_path(out);
            fs::write(&path, serde_json::to_string_pretty(&summary)?).with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => eprintln!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(())
}

fn simulate(common: &Common, info_len: usize, p0: &[f64], stop: StopRule, decoder: &str, max_iters: usize) -> Result<()> {
    if info_len == 0 {
        bail!("--K must be positive");
    }
    let decoder = decoder_by_name(decoder, max_iters).with_context(|| format!("available decoders: {}", decoder_names().join(", ")))?;
    let a = common.analysis()?;
    let e = common.ensemble(&a, None, info_len)?;
    let punctured = !e.pattern.is_unpunctured();
    let g = peg_build(info_len, &e.profile, 1, punctured.then_some(&e.pattern))?;
    let code = TurboCode::from_ensemble(&e, graph_to_interleaver(&g)?)?;
    let results = run_fer(&code, decoder.as_ref(), p0, stop, common.seed)?;
    let mut w = common.writer()?;
    match common.format {
        Format::Csv => write!(w, "{}", results_to_csv(&results))?,
        Format::Json => {
            let doc = json!({
                "config": {
                    "code": common.code,
                    "profile": e.profile.to_string(),
                    "pattern": e.pattern.to_string(),
                    "K": info_len,
                    "N": code.steps(),
                    "coding_rate": code.rate(),
                    "design_rate": e.coding_rate,
                    "decoder": decoder.name(),
                    "max_iterations": max_iters,
                    "seed": common.seed,
                    "stop_rule": stop,
                },
                "results": results,
            });
            writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["turbo-bec", "threshold", "--rate", "0.5", "--profile", "f2=1"]).unwrap();
        assert!(matches!(cli.command, Command::Threshold { .. }));
        assert!(Cli::try_parse_from(["turbo-bec", "simulate", "--K", "10"]).is_err());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("/tmp/pi.txt")), PathBuf::from("/tmp/pi.txt.json"));
    }
}
