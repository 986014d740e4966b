use std::path::PathBuf;

use clap::{Parser, Subcommand};
use mixreg_core::simulate::{simulate, Scenario};
use mixreg_core::{fit, FittedModel};

use crate::error::{CliError, CliResult};
use crate::files::{FittedModelFile, ModelSpecFile};
use crate::table::{read_csv, write_csv, Cell};

#[derive(Debug, Parser)]
#[command(name = "mixreg", version, about = "Fit and query mixture-of-experts distributional regressions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model spec to a CSV file and save the fitted model.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `train.seed` in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-component parameters, component means and the mixture mean.
    Predict(QueryArgs),
    /// Posterior component probabilities; the data must include the response.
    Posteriors(QueryArgs),
    /// One summary row per component.
    Stats(QueryArgs),
    /// Inputs and fitted component means, optionally with mean ± 2·scale bands.
    PlotData {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        bands: bool,
    },
    /// Write one of the built-in two-class data sets.
    Simulate {
        /// npreg, hetero or zeroinf.
        #[arg(long)]
        scenario: String,
        /// Rows per class.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs one command and returns the text to print on success.
pub fn execute(cmd: Command) -> CliResult<String> {
    match cmd {
        Command::Fit { data, spec, out, seed } => cmd_fit(&data, &spec, &out, seed),
        Command::Predict(q) => cmd_predict(&q),
        Command::Posteriors(q) => cmd_posteriors(&q),
        Command::Stats(q) => cmd_stats(&q),
        Command::PlotData { query, bands } => cmd_plotdata(&query, bands),
        Command::Simulate { scenario, n, seed, out } => cmd_simulate(&scenario, n, seed, &out),
    }
}

fn num(v: f64) -> Cell {
    Cell::Num(v)
}

pub fn cmd_fit(data: &std::path::Path, spec: &std::path::Path, out: &std::path::Path, seed: Option<u64>) -> CliResult<String> {
    let mut file = ModelSpecFile::load(spec)?;
    if let Some(s) = seed {
        file.train.seed = s;
    }
    let mixture = file.mixture_spec()?;
    let dataset = file.dataset(read_csv(data)?)?;
    let fitted = fit(&mixture, &dataset, &file.train)?;
    FittedModelFile::from_fit(&file.response, &fitted).save(out)?;
    let h = fitted.history();
    Ok(format!(
        "train_loss={} val_loss={} stopped_epoch={} best_epoch={}",
        h.final_train_loss(),
        h.final_val_loss().map_or_else(|| "NA".to_string(), |v| v.to_string()),
        h.stopped_epoch,
        h.best_epoch
    ))
}

fn load(q: &QueryArgs) -> CliResult<(FittedModelFile, crate::table::Columns)> {
    let file = FittedModelFile::load(&q.model)?;
    let cols = read_csv(&q.data)?;
    Ok((file, cols))
}

fn wrote(path: &std::path::Path, rows: usize) -> String {
    format!("wrote {rows} rows to {}", path.display())
}

pub fn cmd_predict(q: &QueryArgs) -> CliResult<String> {
    let (file, cols) = load(q)?;
    let model = file.model_on(cols, false)?;
    let stats = model.mixture_stats()?;
    let families = model.spec().families();
    let m_total = families.len();
    let max_k = families.iter().map(|f| f.n_params()).max().unwrap_or(0);

    let mut header = Vec::new();
    let mut picks = Vec::new();
    for k in 0..max_k {
        for (m, fam) in families.iter().enumerate() {
            if let Some(name) = fam.param_names().get(k) {
                header.push(format!("{name}_{}", m + 1));
                picks.push((m, k));
            }
        }
    }
    header.extend((1..=m_total).map(|m| format!("component_mean_{m}")));
    header.push("mixture_mean".to_string());

    let n = model.n_obs();
    let rows = (0..n).map(|i| {
        let mut row: Vec<Cell> = picks.iter().map(|&(m, k)| num(stats.params[m][[i, k]])).collect();
        row.extend((0..m_total).map(|m| num(stats.component_means[[i, m]])));
        row.push(num(stats.mixture_mean[i]));
        row
    });
    write_csv(&q.out, &header, rows)?;
    Ok(wrote(&q.out, n))
}

pub fn cmd_posteriors(q: &QueryArgs) -> CliResult<String> {
    let (file, cols) = load(q)?;
    let model = file.model_on(cols, true)?;
    let post = model.posteriors()?;
    let header: Vec<String> = (1..=model.n_components()).map(|m| format!("pi_{m}")).collect();
    write_csv(&q.out, &header, post.rows().into_iter().map(|r| r.iter().map(|&v| num(v)).collect()))?;
    Ok(wrote(&q.out, post.nrows()))
}

pub fn cmd_stats(q: &QueryArgs) -> CliResult<String> {
    let (file, cols) = load(q)?;
    let has_response = cols.contains_key(&file.response);
    let model = file.model_on(cols, false)?;
    let stats = model.mixture_stats()?;
    let posterior = if has_response { Some(model.posteriors()?) } else { None };
    let families = model.spec().families();

    let mut param_names: Vec<&str> = Vec::new();
    for fam in &families {
        for name in fam.param_names() {
            if !param_names.contains(name) {
                param_names.push(name);
            }
        }
    }
    let mut header: Vec<String> =
        ["component", "family", "gate", "posterior", "expected_response"].iter().map(|s| s.to_string()).collect();
    header.extend(param_names.iter().map(|s| s.to_string()));

    let rows = families.iter().enumerate().map(|(m, fam)| {
        let mut row = vec![
            Cell::Int(m as i64 + 1),
            Cell::Text(fam.name().to_string()),
            num(mean(stats.gates.column(m))),
            posterior.as_ref().map_or(Cell::Empty, |p| num(mean(p.column(m)))),
            num(mean(stats.component_means.column(m))),
        ];
        for name in &param_names {
            row.push(match fam.param_names().iter().position(|p| p == name) {
                Some(k) => num(mean(stats.params[m].column(k))),
                None => Cell::Empty,
            });
        }
        row
    });
    write_csv(&q.out, &header, rows)?;
    Ok(wrote(&q.out, families.len()))
}

pub fn cmd_plotdata(q: &QueryArgs, bands: bool) -> CliResult<String> {
    let (file, cols) = load(q)?;
    let inputs: Vec<(String, Vec<f64>)> = cols
        .iter()
        .filter(|(k, _)| file.train_ranges.contains_key(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let model = file.model_on(cols, false)?;
    let stats = model.mixture_stats()?;
    let families = model.spec().families();

    let mut header: Vec<String> = inputs.iter().map(|(k, _)| k.clone()).collect();
    header.extend((1..=families.len()).map(|m| format!("mean_{m}")));
    let scale_of: Vec<Option<usize>> = families
        .iter()
        .map(|f| if bands { f.param_names().iter().position(|p| *p == "scale") } else { None })
        .collect();
    for (m, s) in scale_of.iter().enumerate() {
        if s.is_some() {
            header.push(format!("lo_{}", m + 1));
            header.push(format!("hi_{}", m + 1));
        }
    }

    let n = model.n_obs();
    let rows = (0..n).map(|i| {
        let mut row: Vec<Cell> = inputs.iter().map(|(_, v)| num(v[i])).collect();
        row.extend((0..families.len()).map(|m| num(stats.component_means[[i, m]])));
        for (m, s) in scale_of.iter().enumerate() {
            if let Some(k) = *s {
                let (mu, sd) = (stats.component_means[[i, m]], stats.params[m][[i, k]]);
                row.push(num(mu - 2.0 * sd));
                row.push(num(mu + 2.0 * sd));
            }
        }
        row
    });
    write_csv(&q.out, &header, rows)?;
    Ok(wrote(&q.out, n))
}

pub fn cmd_simulate(scenario: &str, n: usize, seed: u64, out: &std::path::Path) -> CliResult<String> {
    let scenario: Scenario = scenario.parse().map_err(|e: mixreg_core::Error| CliError::Spec(e.to_string()))?;
    if n < 2 {
        return Err(CliError::Spec(format!("--n must be at least 2, got {n}")));
    }
    let sim = simulate(scenario, n, seed)?;
    let header: Vec<String> = ["x", "xsq", "yn", "true_class"].iter().map(|s| s.to_string()).collect();
    let rows = (0..sim.len()).map(|i| {
        vec![num(sim.x[i]), num(sim.xsq[i]), num(sim.yn[i]), Cell::Int(i64::from(sim.true_class[i]))]
    });
    write_csv(out, &header, rows)?;
    Ok(wrote(out, sim.len()))
}

/// Reloads a fitted model file against `data` for library callers.
pub fn load_fitted(model: &std::path::Path, data: &std::path::Path) -> CliResult<FittedModel> {
    FittedModelFile::load(model)?.fitted(read_csv(data)?)
}

fn mean<'a>(values: impl IntoIterator<Item = &'a f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { f64::NAN } else { sum / n as f64 }
}
