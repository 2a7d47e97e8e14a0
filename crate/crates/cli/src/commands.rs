use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use serde_json::{json, Value};
use tsdshap_core::analysis::{
    correlations_to_csv, correlations_to_text, generate_noisy_benchmark, read_sweep_records,
    sweep_correlations, BenchmarkConfig, SweepAxis,
};
use tsdshap_core::baselines::{knn_shapley_values, loo_values, random_values};
use tsdshap_core::classifier::make_dev_accuracy_value_fn;
use tsdshap_core::data::Normalization;
use tsdshap_core::ingest::{
    apply_pca, fit_pca, load_embedding_matrix, load_labels, write_embedding_matrix, write_labels,
    PcaModel,
};
use tsdshap_core::selection::{
    default_step, random_removal, select_subset, write_curve_csv, write_indices,
};
use tsdshap_core::shapley::{estimate_values, exact_shapley};
use tsdshap_core::{ClassifierConfig, Dataset, EmbeddingMatrix, SamplingConfig, ValuationResult};

use crate::args::*;
use crate::output::{
    digest_inputs, manifest_path_for, write_json, Digests, RunManifest, ValuesFile,
};

/// Leave-one-out above this many rows needs `--confirm-large`.
const LOO_CONFIRM_THRESHOLD: usize = 50_000;
const DEFAULT_CHAINS: usize = 10;

#[derive(Debug)]
pub enum Failure {
    /// Bad or missing arguments; exit code 1.
    Usage(String),
    /// Unreadable, malformed or inconsistent data; exit code 2.
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<tsdshap_core::Error> for Failure {
    fn from(e: tsdshap_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

fn classifier_config(args: &ClassifierArgs) -> Result<ClassifierConfig, Failure> {
    let config = ClassifierConfig {
        reg_c: args.reg_c,
        epochs: args.epochs,
    };
    config
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(config)
}

fn fit_rows(
    train: &EmbeddingMatrix,
    dev: &EmbeddingMatrix,
    fit: PcaFit,
) -> anyhow::Result<EmbeddingMatrix> {
    Ok(match fit {
        PcaFit::All => train.vstack(dev)?,
        PcaFit::Train => train.clone(),
    })
}

fn reduce(
    train: &EmbeddingMatrix,
    dev: &EmbeddingMatrix,
    dims: usize,
    fit: PcaFit,
) -> anyhow::Result<(EmbeddingMatrix, EmbeddingMatrix, PcaModel)> {
    let model = fit_pca(&fit_rows(train, dev, fit)?, dims)?;
    Ok((apply_pca(&model, train)?, apply_pca(&model, dev)?, model))
}

struct LoadedData {
    dataset: Dataset,
    digests: Digests,
}

fn load_data(args: &DataArgs) -> Result<LoadedData, Failure> {
    if args.pca_dims == Some(0) {
        return Err(Failure::Usage("--pca-dims must be at least 1".into()));
    }
    let e = &args.embeddings;
    let dataset = Dataset::new(
        load_embedding_matrix(&e.train_embeddings)?,
        load_labels(&args.train_labels)?,
        load_embedding_matrix(&e.dev_embeddings)?,
        load_labels(&args.dev_labels)?,
    )?;
    let dataset = match args.pca_dims {
        Some(dims) => {
            let (train, dev, _) = reduce(
                &dataset.train_features,
                &dataset.dev_features,
                dims,
                args.pca_fit,
            )?;
            dataset.with_features(train, dev)?
        }
        None => dataset,
    };
    let digests = digest_inputs([
        ("train_embeddings", e.train_embeddings.as_path()),
        ("train_labels", args.train_labels.as_path()),
        ("dev_embeddings", e.dev_embeddings.as_path()),
        ("dev_labels", args.dev_labels.as_path()),
    ])?;
    Ok(LoadedData { dataset, digests })
}

fn data_echo(args: &DataArgs, classifier: &ClassifierConfig, n: usize) -> Value {
    json!({
        "n": n,
        "pca_dims": args.pca_dims,
        "pca_fit": args.pca_dims.map(|_| pca_fit_name(args.pca_fit)),
        "reg_c": classifier.reg_c,
        "epochs": classifier.epochs,
    })
}

fn pca_fit_name(fit: PcaFit) -> &'static str {
    match fit {
        PcaFit::All => "all",
        PcaFit::Train => "train",
    }
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

fn with_threads(params: &Value, threads: &ThreadArgs) -> Value {
    merge(params.clone(), json!({ "threads": threads.threads }))
}

fn write_values(
    command: &str,
    out: &Path,
    result: ValuationResult,
    digests: Digests,
    threads: &ThreadArgs,
) -> CmdResult {
    let params = with_threads(&result.config_echo, threads);
    let seed = result.seed;
    let method = result.method;
    let n = result.len();
    write_json(out, &ValuesFile::new(result, digests.clone()))?;
    RunManifest::new(command, params, &digests, Some(seed)).write(&manifest_path_for(out))?;
    eprintln!("{method}: wrote {n} values to {}", out.display());
    Ok(())
}

pub fn pca(args: &PcaArgs) -> CmdResult {
    if args.pca_dims == 0 {
        return Err(Failure::Usage("--pca-dims must be at least 1".into()));
    }
    let e = &args.embeddings;
    let train = load_embedding_matrix(&e.train_embeddings)?;
    let dev = load_embedding_matrix(&e.dev_embeddings)?;
    let (train_out, dev_out, model) = reduce(&train, &dev, args.pca_dims, args.pca_fit)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_embedding_matrix(&train_out, args.out.join("train.tsds"))?;
    write_embedding_matrix(&dev_out, args.out.join("dev.tsds"))?;
    let d = model.input_dim();
    let components: Vec<&[f64]> = (0..model.num_components())
        .map(|c| model.component(c))
        .collect();
    write_json(
        &args.out.join("pca.json"),
        &json!({
            "input_dim": d,
            "mean": model.mean,
            "components": components,
            "explained_variance": model.explained_variance,
        }),
    )?;

    let digests = digest_inputs([
        ("train_embeddings", e.train_embeddings.as_path()),
        ("dev_embeddings", e.dev_embeddings.as_path()),
    ])?;
    let params = json!({
        "pca_dims": args.pca_dims,
        "components": model.num_components(),
        "pca_fit": pca_fit_name(args.pca_fit),
        "threads": args.threads.threads,
    });
    RunManifest::new("pca", params, &digests, None).write(&args.out.join("manifest.json"))?;
    eprintln!(
        "pca: {d} -> {} dims, wrote {}",
        model.num_components(),
        args.out.display()
    );
    Ok(())
}

fn resolve_subset_size(args: &ValueArgs, n: usize) -> Result<usize, Failure> {
    if let Some(s) = args.subset_size {
        return Ok(s);
    }
    if let Some(pct) = args.subset_size_pct {
        if !(pct > 0.0 && pct <= 100.0) {
            return Err(Failure::Usage(format!(
                "--subset-size-pct must lie in (0, 100], got {pct}"
            )));
        }
        return Ok(((pct / 100.0 * n as f64).round() as usize).max(1));
    }
    if let Some(preset) = args.preset {
        return Ok(preset.sampling().0);
    }
    Err(Failure::Usage(
        "one of --subset-size, --subset-size-pct or --preset is required".into(),
    ))
}

pub fn value(args: &ValueArgs) -> CmdResult {
    if args.subset_size.is_none() && args.subset_size_pct.is_none() && args.preset.is_none() {
        return Err(Failure::Usage(
            "one of --subset-size, --subset-size-pct or --preset is required".into(),
        ));
    }
    let classifier = classifier_config(&args.classifier)?;
    let LoadedData { dataset, digests } = load_data(&args.data)?;
    let n = dataset.num_train();
    let subset_size = resolve_subset_size(args, n)?;
    let chains = args
        .chains
        .or(args.preset.map(|p| p.sampling().1))
        .unwrap_or(DEFAULT_CHAINS);
    let config = SamplingConfig {
        subset_size,
        iterations: args.iterations,
        chains,
        master_seed: args.seed,
        normalization: match args.normalize {
            Normalize::Iterations => Normalization::Iterations,
            Normalize::Inclusions => Normalization::Inclusions,
        },
    };
    config.validate(n)?;

    let value_fn = make_dev_accuracy_value_fn(&dataset, classifier)?;
    let mut result = estimate_values(&value_fn, n, &config)?;
    result.config_echo = merge(
        merge(result.config_echo, data_echo(&args.data, &classifier, n)),
        json!({ "preset": args.preset.map(Preset::name) }),
    );
    write_values("value", &args.out, result, digests, &args.threads)
}

pub fn exact(args: &ExactArgs) -> CmdResult {
    let classifier = classifier_config(&args.classifier)?;
    let LoadedData { dataset, digests } = load_data(&args.data)?;
    let n = dataset.num_train();
    let value_fn = make_dev_accuracy_value_fn(&dataset, classifier)?;
    let mut result = exact_shapley(&value_fn, n)?;
    result.config_echo = merge(result.config_echo, data_echo(&args.data, &classifier, n));
    write_values("exact", &args.out, result, digests, &args.threads)
}

pub fn baseline(args: &BaselineArgs) -> CmdResult {
    let classifier = classifier_config(&args.classifier)?;
    if args.remove.is_some() && args.method != BaselineMethod::Random {
        return Err(Failure::Usage(
            "--remove only applies to --method random".into(),
        ));
    }
    if args.knn_k == 0 {
        return Err(Failure::Usage("--knn-k must be at least 1".into()));
    }
    let LoadedData { dataset, digests } = load_data(&args.data)?;
    let n = dataset.num_train();
    let echo = data_echo(&args.data, &classifier, n);

    let mut result = match args.method {
        BaselineMethod::Loo => {
            if n > LOO_CONFIRM_THRESHOLD && !args.confirm_large {
                eprintln!(
                    "leave-one-out on {n} rows needs {} classifier trainings of {} epochs over ~{n} rows each",
                    n + 1,
                    classifier.epochs
                );
                return Err(Failure::Usage(format!(
                    "refusing leave-one-out above {LOO_CONFIRM_THRESHOLD} rows without --confirm-large"
                )));
            }
            loo_values(&dataset, classifier)?
        }
        BaselineMethod::Knn => {
            let mut r = knn_shapley_values(&dataset, args.knn_k)?;
            r.config_echo = json!({ "k": args.knn_k });
            r
        }
        BaselineMethod::Random => {
            if let Some(k_remove) = args.remove {
                let kept = random_removal(n, k_remove, args.seed)?;
                write_indices(&kept, &args.out)?;
                let params =
                    with_threads(&merge(echo, json!({ "remove": k_remove })), &args.threads);
                RunManifest::new("baseline random", params, &digests, Some(args.seed))
                    .write(&manifest_path_for(&args.out))?;
                eprintln!(
                    "random: kept {} of {n} to {}",
                    kept.len(),
                    args.out.display()
                );
                return Ok(());
            }
            random_values(n, args.seed)
        }
    };
    result.config_echo = merge(result.config_echo, echo);
    let command = format!("baseline {}", result.method);
    write_values(&command, &args.out, result, digests, &args.threads)
}

pub fn select(args: &SelectArgs) -> CmdResult {
    let classifier = classifier_config(&args.classifier)?;
    if args.step == Some(0) {
        return Err(Failure::Usage("--step must be at least 1".into()));
    }
    let LoadedData {
        dataset,
        mut digests,
    } = load_data(&args.data)?;
    let values = ValuesFile::read(&args.values)?.into_result()?;
    digests.extend(digest_inputs([("values", args.values.as_path())])?);
    let n = dataset.num_train();
    let step = args.step.unwrap_or_else(|| default_step(n));

    let (selection, curve) = select_subset(&values, &dataset, step, classifier)?;
    write_indices(&selection.kept_indices, &args.out)?;
    let curve_path = args.curve.clone().unwrap_or_else(|| {
        let mut name = args.out.file_name().unwrap_or_default().to_os_string();
        name.push(".curve.csv");
        args.out.with_file_name(name)
    });
    write_curve_csv(&curve, &curve_path)?;

    let params = with_threads(
        &merge(
            data_echo(&args.data, &classifier, n),
            json!({
                "step": step,
                "values_method": values.method,
                "optimal_removed": selection.optimal_removed,
                "best_dev_accuracy": selection.best_dev_accuracy,
                "full_dev_accuracy": curve.dev_accuracies[0],
            }),
        ),
        &args.threads,
    );
    RunManifest::new("select", params, &digests, Some(values.seed))
        .write(&manifest_path_for(&args.out))?;
    eprintln!(
        "select: removing {} of {n} raises dev accuracy {:.4} -> {:.4}; kept indices in {}",
        selection.optimal_removed,
        curve.dev_accuracies[0],
        selection.best_dev_accuracy,
        args.out.display()
    );
    Ok(())
}

pub fn correlate(args: &CorrelateArgs) -> CmdResult {
    let records = read_sweep_records(&args.records)?;
    if records.is_empty() {
        return Err(Failure::Data(anyhow!(
            "{} has no records",
            args.records.display()
        )));
    }
    let axis = match args.vary {
        Vary::Chains => SweepAxis::Chains,
        Vary::SubsetSize => SweepAxis::SubsetSize,
    };
    let rows = sweep_correlations(&records, axis);
    fs::write(&args.out, correlations_to_csv(&rows, axis))
        .with_context(|| format!("writing {}", args.out.display()))?;
    print!("{}", correlations_to_text(&rows, axis, &args.label));

    let digests = digest_inputs([("records", args.records.as_path())])?;
    let params = json!({ "vary": axis, "label": args.label });
    RunManifest::new("correlate", params, &digests, None).write(&manifest_path_for(&args.out))?;
    Ok(())
}

pub fn gen_benchmark(args: &GenBenchmarkArgs) -> CmdResult {
    let config = BenchmarkConfig {
        n_train: args.n,
        n_dev: args.dev_n.unwrap_or(args.n / 4),
        dim: args.dim,
        flip_fraction: args.flip,
        separation: args.separation,
        seed: args.seed,
    };
    let bench = generate_noisy_benchmark(&config).map_err(|e| Failure::Usage(e.to_string()))?;
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let ds = &bench.dataset;
    write_embedding_matrix(&ds.train_features, out.join("train.tsds"))?;
    write_labels(&ds.train_labels, out.join("train.labels"))?;
    write_embedding_matrix(&ds.dev_features, out.join("dev.tsds"))?;
    write_labels(&ds.dev_labels, out.join("dev.labels"))?;
    write_indices(&bench.flipped, out.join("flipped.txt"))?;
    let params = serde_json::to_value(config).map_err(anyhow::Error::from)?;
    RunManifest::new("gen-benchmark", params, &Digests::new(), Some(args.seed))
        .write(&out.join("manifest.json"))?;
    eprintln!(
        "gen-benchmark: {} train / {} dev rows, {} flipped, in {}",
        config.n_train,
        config.n_dev,
        bench.flipped.len(),
        out.display()
    );
    Ok(())
}
