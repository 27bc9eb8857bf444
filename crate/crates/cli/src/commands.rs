use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ace_core::ace::{
    ace_at, saliency, saliency_recurrent, sweep_feedforward_on, sweep_recurrent_on, tau, AceResult, InterventionGrid,
    InterventionSweep, SaliencyConfig, SweepConfig,
};
use ace_core::data::{load_domain_map, read_labels, write_labels};
use ace_core::ndarray::Axis;
use ace_core::net::DEFAULT_HESSIAN_CAP;
use ace_core::regressor::{CausalRegressor, Hyper};
use ace_core::report::{write_ace_csv, write_matrix_csv, write_pgm, write_sweep_csv};
use ace_core::train::{
    gru_accuracy, minmax_normalize, mlp_accuracy, synth_sequences, train_gru, train_mlp, write_log_csv, EpochLog,
};
use ace_core::{AceError, Dataset, Domain, GruNetwork, Model, Network, SequenceDataset, Warning};

use crate::args::{
    AceArgs, Command, FeatureArgs, ModelArgs, RegressorArgs, SaliencyArgs, SweepArgs, SynthArgs, TauArgs, TrainCommand,
    TrainGruArgs, TrainMlpArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Flags that parse but make no sense together.
    Usage(String),
    /// A failed step, named by `op`.
    Op { op: String, source: AceError },
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Op { source, .. } => match source {
                AceError::IllConditioned(_) => 5,
                AceError::NonFinite(_)
                | AceError::HessianCap { .. }
                | AceError::Asymmetric(_)
                | AceError::NotPsd(_)
                | AceError::Divergence(_)
                | AceError::AlreadyIntervened(_)
                | AceError::LagOutOfRange { .. } => 4,
                _ => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Op { op, source } => write!(f, "{op} failed: {source}"),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

trait Context<T> {
    fn op(self, op: impl Into<String>) -> Result<T>;
}

impl<T> Context<T> for ace_core::Result<T> {
    fn op(self, op: impl Into<String>) -> Result<T> {
        self.map_err(|source| CliError::Op { op: op.into(), source })
    }
}

fn usage(e: AceError) -> CliError {
    CliError::Usage(e.to_string())
}

fn warn_all(warnings: &[Warning]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> ace_core::Result<()>) -> Result<()> {
    let op = format!("writing {}", path.display());
    let mut w = BufWriter::new(File::create(path).map_err(AceError::from).op(op.clone())?);
    f(&mut w).and_then(|_| w.flush().map_err(AceError::from)).op(op)
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Ace(args) => cmd_ace(&args),
        Command::Saliency(args) => cmd_saliency(&args),
        Command::Tau(args) => cmd_tau(&args),
        Command::Train(TrainCommand::Mlp(args)) => cmd_train_mlp(&args),
        Command::Train(TrainCommand::Gru(args)) => cmd_train_gru(&args),
        Command::Synth(args) => cmd_synth(&args),
    }
}

#[allow(clippy::large_enum_variant)]
enum Loaded {
    Mlp(Network, Dataset),
    Gru(GruNetwork, SequenceDataset),
}

fn load(model: &ModelArgs) -> Result<Loaded> {
    let net = Model::load(&model.net).op(format!("reading network {}", model.net.display()))?;
    let domains = match &model.domains {
        Some(p) => Some(load_domain_map(p).op(format!("reading domains {}", p.display()))?),
        None => None,
    };
    let reading = format!("reading data {}", model.data.display());
    match net {
        Model::Mlp(net) => {
            if model.out_step.is_some() {
                return Err(CliError::Usage("--out-step applies to recurrent networks only".into()));
            }
            Ok(Loaded::Mlp(net, Dataset::load_csv(&model.data, domains.as_ref()).op(reading)?))
        }
        Model::Gru(rnn) => {
            let mut data = SequenceDataset::load_csv(&model.data).op(reading.clone())?;
            if let Some(map) = domains {
                data = data.with_domains(&map).op(reading)?;
            }
            Ok(Loaded::Gru(rnn, data))
        }
    }
}

fn sweep_config(model: &ModelArgs) -> SweepConfig {
    SweepConfig { method: model.method.into(), eps: model.eps, hessian_cap: DEFAULT_HESSIAN_CAP }
}

fn hyper(reg: &RegressorArgs) -> Hyper {
    Hyper { prior_precision: reg.prior_precision, noise_precision: reg.noise_precision }
}

fn run_sweep(model: &ModelArgs, feature: &FeatureArgs) -> Result<InterventionSweep> {
    let cfg = sweep_config(model);
    let range = feature.low.zip(feature.high).map(|(low, high)| Domain::new(low, high));
    let swept = match load(model)? {
        Loaded::Mlp(net, data) => {
            if feature.step.is_some() {
                return Err(CliError::Usage("--step applies to recurrent networks only".into()));
            }
            let i = data.feature_index(&feature.feature).map_err(usage)?;
            let grid = InterventionGrid::new(i, range.unwrap_or(data.domains[i]), model.num).map_err(usage)?;
            sweep_feedforward_on(&net, &data, grid, model.output_index, &cfg).op("sweep")?
        }
        Loaded::Gru(rnn, data) => {
            let i = data.feature_index(&feature.feature).map_err(usage)?;
            let t_out = model.out_step.unwrap_or(data.min_len() - 1);
            let t_hat = feature.step.unwrap_or(t_out);
            let domain = match range {
                Some(d) => d,
                None => data.domain(t_hat, i).op("sweep")?,
            };
            let grid = InterventionGrid::new(i, domain, model.num).map_err(usage)?.at_step(t_hat);
            sweep_recurrent_on(&rnn, &data, grid, t_out, model.output_index, &cfg).op("sweep")?
        }
    };
    warn_all(&swept.warnings);
    Ok(swept.value)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let sweep = run_sweep(&args.model, &args.feature)?;
    write_file(&args.output, |w| write_sweep_csv(w, &sweep))
}

fn cmd_ace(args: &AceArgs) -> Result<()> {
    if let Some(bad) = args.alpha_at.iter().find(|a| !a.is_finite()) {
        return Err(CliError::Usage(format!("--alpha-at value {bad} is not finite")));
    }
    let sweep = run_sweep(&args.model, &args.feature)?;
    if let Some(path) = &args.sweep_output {
        write_file(path, |w| write_sweep_csv(w, &sweep))?;
    }
    let fitted = CausalRegressor::fit(sweep.alphas(), &sweep.ie, args.regressor.max_order, hyper(&args.regressor))
        .op("regressor fit")?;
    warn_all(&fitted.warnings);
    let reg = fitted.value;
    let alphas = if args.alpha_at.is_empty() { sweep.alphas().to_vec() } else { args.alpha_at.clone() };
    let mut warnings: Vec<Warning> = Vec::new();
    let rows: Vec<AceResult> = alphas
        .iter()
        .map(|&a| {
            let r = ace_at(&reg, a);
            warnings.extend(r.warnings);
            r.value
        })
        .collect();
    warn_all(&warnings);
    write_file(&args.output, |w| write_ace_csv(w, &rows, sweep.method))?;
    let doc_path = args.regressor_output.clone().unwrap_or_else(|| args.output.with_extension("regressor.json"));
    let doc = serde_json::to_string_pretty(&reg.to_document()).map_err(AceError::from).op("regressor document")?;
    write_file(&doc_path, |w| writeln!(w, "{doc}").map_err(AceError::from))
}

fn cmd_saliency(args: &SaliencyArgs) -> Result<()> {
    let model = &args.model;
    let cfg = SaliencyConfig {
        num: model.num,
        sweep: sweep_config(model),
        max_order: (!args.raw).then_some(args.regressor.max_order),
        hyper: hyper(&args.regressor),
        threshold: args.threshold,
    };
    let (map, columns, rows) = match load(model)? {
        Loaded::Mlp(net, data) => {
            let idx: usize = args
                .instance
                .parse()
                .ok()
                .filter(|&i| i < data.len())
                .ok_or_else(|| CliError::Usage(format!("--instance must be a row index below {}", data.len())))?;
            let instance = data.rows.row(idx).to_owned();
            let map = saliency(&net, &data, &instance, model.output_index, &cfg).op("saliency")?;
            warn_all(&map.warnings);
            (map.value.insert_axis(Axis(0)), data.feature_names.clone(), None)
        }
        Loaded::Gru(rnn, data) => {
            let idx = data
                .ids
                .iter()
                .position(|id| *id == args.instance)
                .or_else(|| args.instance.parse().ok().filter(|&i| i < data.len()))
                .ok_or_else(|| CliError::Usage(format!("no sequence `{}`", args.instance)))?;
            let seq = &data.sequences[idx];
            let t_out = model.out_step.unwrap_or(seq.nrows().min(data.min_len()) - 1);
            let map = saliency_recurrent(&rnn, &data, seq, t_out, model.output_index, &cfg).op("saliency")?;
            warn_all(&map.warnings);
            let steps: Vec<String> = (0..=t_out).map(|t| t.to_string()).collect();
            (map.value, data.feature_names.clone(), Some(steps))
        }
    };
    write_file(&args.output, |w| write_matrix_csv(w, &map, &columns, rows.as_deref()))?;
    if let Some(path) = &args.pgm {
        write_file(path, |w| write_pgm(w, &map))?;
    }
    Ok(())
}

fn cmd_tau(args: &TauArgs) -> Result<()> {
    let rnn = match Model::load(&args.net).op(format!("reading network {}", args.net.display()))? {
        Model::Gru(rnn) => rnn,
        Model::Mlp(_) => return Err(CliError::Usage("tau needs a recurrent network".into())),
    };
    let data = SequenceDataset::load_csv(&args.data).op(format!("reading data {}", args.data.display()))?;
    let value = tau(&rnn, &data, args.step, args.output_index, args.tol).op("tau")?;
    println!("{value}");
    if let Some(path) = &args.output {
        write_file(path, |w| writeln!(w, "{value}").map_err(AceError::from))?;
    }
    Ok(())
}

fn save_training(model: Model, output: &Path, log: Option<&Path>, history: &[EpochLog]) -> Result<()> {
    model.save(output).op(format!("writing {}", output.display()))?;
    if let Some(path) = log {
        write_file(path, |w| write_log_csv(w, history))?;
    }
    Ok(())
}

fn cmd_train_mlp(args: &TrainMlpArgs) -> Result<()> {
    let reading = format!("reading data {}", args.data.display());
    let mut data = Dataset::load_csv(&args.data, None).op(reading.clone())?;
    let raw = data.take_column(&args.label_column).map_err(usage)?;
    let mut labels = Vec::with_capacity(raw.len());
    for &l in &raw {
        if l < 0.0 || l.fract() != 0.0 {
            return Err(AceError::Parse(format!("label {l} is not a class index"))).op(reading);
        }
        labels.push(l as usize);
    }
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    let x = match &args.normalize {
        Some(path) => {
            let (x, _) = minmax_normalize(&data.rows);
            let normalized = Dataset::new(data.feature_names.clone(), x, None).op("normalizing")?;
            write_file(path, |w| normalized.write_csv(w))?;
            normalized.rows
        }
        None => data.rows.clone(),
    };
    let mut sizes = vec![x.ncols()];
    sizes.extend(&args.hidden);
    sizes.push(classes);
    let trained = train_mlp(&x, &labels, &sizes, args.activation, args.epochs, args.lr, args.seed).op("training")?;
    let acc = mlp_accuracy(&trained.model, &x, &labels).op("training")?;
    println!("train accuracy {acc:.4}");
    save_training(Model::Mlp(trained.model), &args.output, args.log.as_deref(), &trained.log)
}

fn cmd_train_gru(args: &TrainGruArgs) -> Result<()> {
    let data = SequenceDataset::load_csv(&args.data).op(format!("reading data {}", args.data.display()))?;
    let reading = format!("reading labels {}", args.labels.display());
    let file = File::open(&args.labels).map_err(AceError::from).op(reading.clone())?;
    let table = read_labels(file).op(reading.clone())?;
    let by_id: std::collections::HashMap<&str, f64> = table.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let labels = data
        .ids
        .iter()
        .map(|id| by_id.get(id.as_str()).copied().ok_or_else(|| AceError::Parse(format!("no label for `{id}`"))))
        .collect::<ace_core::Result<Vec<f64>>>()
        .op(reading)?;
    let trained = train_gru(&data, &labels, args.hidden, args.epochs, args.lr, args.seed).op("training")?;
    let acc = gru_accuracy(&trained.model, &data, &labels).op("training")?;
    println!("train accuracy {acc:.4}");
    save_training(Model::Gru(trained.model), &args.output, args.log.as_deref(), &trained.log)
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let (data, labels) = synth_sequences(args.n, args.seed).op("synth")?;
    write_file(&args.output, |w| data.write_csv(w))?;
    write_file(&args.labels, |w| write_labels(w, &data.ids, &labels))
}
