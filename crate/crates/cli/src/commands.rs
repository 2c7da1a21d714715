use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use log::info;
use xmodal::experiments::{
    run_cluster_distances, run_combination_study, run_mix_curve, ClassificationSplits, ClusterSort, ComboConfig, ComboInput,
    MixCurveConfig, Projector,
};
use xmodal::retrieval::write_report_csv;
use xmodal::synth::{class_histogram, write_histogram_csv, ModelSpec, SharedSpec, SubsetCounts};
use xmodal::{
    cross_modal_eval, evaluate, fit_forest, fit_pca, pair_by_clip, project_store, random_baseline_eval, train_translation,
    translate_store, ClassMap, EmbeddingStore, ForestConfig, LabeledData, Ontology, PcaModel, RandomForest, RelevanceConfig,
    SynthConfig, TrainConfig, TranslationModel,
};

use crate::args::*;
use crate::{Failure, Outcome, RunRecord};

pub fn dispatch(global: &Global, command: &Command) -> Outcome<RunRecord> {
    let out = global.out_dir.as_path();
    let seed = global.seed;
    match command {
        Command::Synth(a) => synth(a, seed, out),
        Command::ValidateStore(a) => validate_store(a),
        Command::TrainTranslation(a) => train(a, seed, out),
        Command::FitPca(a) => fit_pca_cmd(a, seed, out),
        Command::Project(a) => project(a, seed, out),
        Command::RetrieveEval(a) => retrieve(a, seed, out),
        Command::ComboStudy(a) => combo(a, seed, out),
        Command::TrainClassifier(a) => train_classifier(a, seed, out),
        Command::EvalClassifier(a) => eval_classifier(a, seed, out),
        Command::MixCurve(a) => mix_curve(a, seed, out),
        Command::ClusterDist(a) => cluster_dist(a, seed, out),
        Command::ClassHist(a) => class_hist(a, seed, out),
    }
}

fn record(seeds: Vec<u64>, inputs: Vec<PathBuf>, outputs: &[&str]) -> RunRecord {
    RunRecord {
        seeds,
        inputs,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    }
}

fn parse_model(spec: &str) -> Outcome<ModelSpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure::Usage(format!("model spec `{spec}` is not name:dim:noise"));
    match parts.as_slice() {
        [name, dim, noise] if !name.is_empty() => Ok(ModelSpec::new(
            name,
            dim.parse().map_err(|_| bad())?,
            noise.parse().map_err(|_| bad())?,
        )),
        _ => Err(bad()),
    }
}

fn synth(a: &SynthArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        n_classes: a.n_classes,
        latent_dim: a.latent_dim,
        audio: ModelSpec::new(&a.audio_model, a.audio_dim, a.audio_noise),
        image: ModelSpec::new(&a.image_model, a.image_dim, a.image_noise),
        extra_audio: a.extra_audio.iter().map(|s| parse_model(s)).collect::<Outcome<_>>()?,
        extra_image: a.extra_image.iter().map(|s| parse_model(s)).collect::<Outcome<_>>()?,
        shared: (!a.no_shared).then(|| SharedSpec {
            dim: a.shared_dim,
            alignment: a.shared_alignment,
            ..defaults.shared.clone().expect("default config has a shared model")
        }),
        samples_per_class: SubsetCounts {
            translation: a.translation_per_class,
            cross_modal: a.cross_modal_per_class,
            classification_train: a.train_per_class,
            classification_test: a.test_per_class,
        },
        latent_noise: a.latent_noise,
        class_imbalance: a.class_imbalance.clone(),
        rng_seed: seed,
        ..defaults
    };
    let data = xmodal::generate(&cfg)?;
    let written = data.write(out)?;
    info!("wrote {} stores to {}", written.len() - 1, out.display());
    Ok(RunRecord {
        seeds: vec![seed],
        inputs: Vec::new(),
        outputs: written,
    })
}

fn validate_store(a: &ValidateArgs) -> Outcome<RunRecord> {
    let ontology = a.ontology.as_ref().map(Ontology::load).transpose()?;
    for dir in &a.stores {
        let store = EmbeddingStore::read(dir)?;
        store.matrix().check_finite()?;
        if let Some(o) = &ontology {
            store.validate_labels(o)?;
        }
        let modality = store.modality().map_or("mixed", |m| m.as_str());
        println!("ok {}: {} rows, dim {}, {modality}", dir.display(), store.len(), store.dim());
    }
    let mut inputs = a.stores.clone();
    inputs.extend(a.ontology.clone());
    Ok(record(Vec::new(), inputs, &[]))
}

fn train_config(seed: u64, batch_size: usize, margin: f64, lr: f64, patience: usize, max_epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size,
        margin,
        learning_rate: lr,
        patience_epochs: patience,
        max_epochs,
        rng_seed: seed,
        ..TrainConfig::default()
    }
}

fn train(a: &TrainArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let (audio_dir, image_dir) = match (&a.pairs, &a.audio, &a.image) {
        (_, Some(audio), Some(image)) => (audio.clone(), image.clone()),
        (Some(pairs), _, _) => (pairs.join("audio"), pairs.join("image")),
        _ => return Err(Failure::Usage("give --pairs or both --audio and --image".into())),
    };
    let audio = EmbeddingStore::read(&audio_dir)?;
    let image = EmbeddingStore::read(&image_dir)?;
    let pairs = pair_by_clip(&audio, &image)?;
    let cfg = TrainConfig {
        val_fraction: a.val_fraction,
        ..train_config(seed, a.batch_size, a.margin, a.lr, a.patience, a.max_epochs)
    };
    let (model, history) = train_translation(&pairs, &cfg)?;
    info!(
        "stopped after epoch {} ({:?}); best val loss {:.6} at epoch {}",
        history.stop_epoch,
        history.stop_reason,
        history.best_val_loss(),
        history.best_epoch
    );
    model.save(out.join("model.xmtm"))?;
    history.write_csv(out.join("history.csv"))?;
    Ok(record(vec![seed], vec![audio_dir, image_dir], &["model.xmtm", "history.csv"]))
}

fn fit_pca_cmd(a: &FitPcaArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let store = EmbeddingStore::read(&a.store)?;
    let model = fit_pca(store.matrix(), a.k)?;
    model.save(out.join(&a.name))?;
    Ok(record(vec![seed], vec![a.store.clone()], &[&a.name]))
}

fn project(a: &ProjectArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let store = EmbeddingStore::read(&a.store)?;
    let (projected, checkpoint) = match (&a.translation, &a.pca) {
        (Some(path), None) => (translate_store(&TranslationModel::load(path)?, &store)?, path),
        (None, Some(path)) => (project_store(&PcaModel::load(path)?, &store)?, path),
        _ => return Err(Failure::Usage("give exactly one of --translation and --pca".into())),
    };
    projected.write(out)?;
    Ok(record(
        vec![seed],
        vec![a.store.clone(), checkpoint.clone()],
        &[xmodal::store::MANIFEST_FILE, xmodal::store::MATRIX_FILE],
    ))
}

fn relevance_config(a: &RelevanceArgs, ontology: &Ontology) -> RelevanceConfig {
    match &a.exclude_labels {
        Some(ids) => RelevanceConfig::new(a.max_distance, ids.iter().filter(|s| !s.is_empty()).cloned().collect::<BTreeSet<_>>()),
        None => RelevanceConfig {
            max_distance: a.max_distance,
            ..RelevanceConfig::for_ontology(ontology)
        },
    }
}

/// Reads both stores, translating them when a checkpoint is given.
fn load_pair(audio: &Path, image: &Path, model: Option<&PathBuf>) -> Outcome<(EmbeddingStore, EmbeddingStore)> {
    let audio = EmbeddingStore::read(audio)?;
    let image = EmbeddingStore::read(image)?;
    match model {
        Some(path) => {
            let model = TranslationModel::load(path)?;
            Ok((translate_store(&model, &audio)?, translate_store(&model, &image)?))
        }
        None => Ok((audio, image)),
    }
}

fn retrieve(a: &RetrieveArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let ontology = Ontology::load(&a.relevance.ontology)?;
    let relevance = relevance_config(&a.relevance, &ontology);
    let (audio, image) = load_pair(&a.audio, &a.image, a.model.as_ref())?;
    let report = cross_modal_eval(&audio, &image, &ontology, &relevance, a.k)?;
    let baseline = random_baseline_eval(&audio, &image, &ontology, &relevance, a.k, seed)?;
    write_report_csv(&report.reports(), out.join("ndcg.csv"))?;
    write_report_csv(&baseline.reports(), out.join("ndcg_random.csv"))?;
    for (r, b) in report.reports().iter().zip(baseline.reports()) {
        println!(
            "{}: ndcg@{} {:.4} (random {:.4}, {} skipped)",
            r.direction.as_str(),
            a.k,
            r.mean_ndcg,
            b.mean_ndcg,
            r.skipped
        );
    }
    let mut inputs = vec![a.audio.clone(), a.image.clone(), a.relevance.ontology.clone()];
    inputs.extend(a.model.clone());
    Ok(record(vec![seed], inputs, &["ndcg.csv", "ndcg_random.csv"]))
}

/// Store directory names of one modality under a subset directory, with the
/// model name read from each store.
fn discover(subset: &Path, prefix: &str) -> Outcome<Vec<(PathBuf, EmbeddingStore)>> {
    let entries = std::fs::read_dir(subset).map_err(|e| Failure::Io(format!("cannot list {}: {e}", subset.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name == prefix || name.starts_with(&format!("{prefix}-"))
        })
        .map(|e| e.path())
        .collect();
    dirs.sort();
    dirs.into_iter()
        .map(|d| {
            let store = EmbeddingStore::read(&d)?;
            Ok((d, store))
        })
        .collect()
}

fn model_name(store: &EmbeddingStore) -> String {
    store.metas().first().map(|m| m.embedding_model.clone()).unwrap_or_default()
}

fn combo(a: &ComboArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let ontology_path = a.data.join("ontology.json");
    let ontology = Ontology::load(&ontology_path)?;
    let train_dir = a.data.join("translation");
    let eval_dir = a.data.join("cross_modal");
    let load = |prefix: &str| -> Outcome<Vec<(String, EmbeddingStore, EmbeddingStore)>> {
        let train = discover(&train_dir, prefix)?;
        let eval = discover(&eval_dir, prefix)?;
        let mut out = Vec::new();
        for (dir, t) in train {
            let rel = dir.file_name().expect("listed entries have names");
            let (_, e) = eval
                .iter()
                .find(|(d, _)| d.file_name() == Some(rel))
                .ok_or_else(|| Failure::Usage(format!("no cross_modal store matches {}", dir.display())))?;
            out.push((model_name(&t), t, e.clone()));
        }
        Ok(out)
    };
    let audio = load("audio")?;
    let image = load("image")?;
    let shared = {
        let a = load("shared-audio")?;
        let v = load("shared-image")?;
        a.into_iter().zip(v).next()
    };
    let no_translation = shared.as_ref().map(|((an, at, ae), (vn, vt, ve))| {
        (
            ComboInput {
                name: an,
                translation: at,
                eval: ae,
            },
            ComboInput {
                name: vn,
                translation: vt,
                eval: ve,
            },
        )
    });
    let cfg = ComboConfig {
        train: train_config(seed, a.batch_size, a.margin, a.lr, a.patience, a.max_epochs),
        k: a.k,
        relevance: None,
        baseline_seed: seed,
    };
    let table = run_combination_study(&combo_inputs(&audio), &combo_inputs(&image), no_translation, &ontology, &cfg)?;
    table.write_csv(out.join("combo.csv"))?;
    for row in &table.rows {
        println!(
            "{:<15} {:<12} {:<12} {:.4} {:.4}",
            row.kind.as_str(),
            row.audio_model,
            row.image_model,
            row.ndcg_audio_to_image,
            row.ndcg_image_to_audio
        );
    }
    Ok(record(vec![seed], vec![train_dir, eval_dir, ontology_path], &["combo.csv"]))
}

fn combo_inputs(v: &[(String, EmbeddingStore, EmbeddingStore)]) -> Vec<ComboInput<'_>> {
    v.iter()
        .map(|(name, t, e)| ComboInput {
            name,
            translation: t,
            eval: e,
        })
        .collect()
}

fn forest_config(a: &ForestArgs, seed: u64) -> ForestConfig {
    ForestConfig {
        n_trees: a.n_trees,
        max_depth: a.max_depth,
        min_samples_split: a.min_samples_split,
        max_features: a.max_features,
        rng_seed: seed,
        ..ForestConfig::default()
    }
}

fn train_classifier(a: &TrainClassifierArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let ontology = Ontology::load(&a.ontology)?;
    let classes = ClassMap::from_ontology(&ontology)?;
    let parts = a
        .train
        .iter()
        .map(|dir| Ok(LabeledData::from_store(&EmbeddingStore::read(dir)?, &classes)))
        .collect::<Outcome<Vec<_>>>()?;
    let data = LabeledData::concat(&parts.iter().collect::<Vec<_>>())?;
    let forest = fit_forest(&data, classes.len(), &forest_config(&a.forest, seed))?;
    forest.save(out.join("forest.json"))?;
    let mut inputs = a.train.clone();
    inputs.push(a.ontology.clone());
    Ok(record(vec![seed], inputs, &["forest.json"]))
}

fn eval_classifier(a: &EvalClassifierArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let ontology = Ontology::load(&a.ontology)?;
    let classes = ClassMap::from_ontology(&ontology)?;
    let forest = RandomForest::load(&a.model)?;
    let test = LabeledData::from_store(&EmbeddingStore::read(&a.test)?, &classes);
    let report = evaluate(&forest, &test)?;
    report.write_csv(classes.names(), out.join("report.csv"))?;
    report.write_confusion_csv(classes.names(), out.join("confusion.csv"))?;
    println!("macro F1 {:.4}", report.macro_f1);
    Ok(record(
        vec![seed],
        vec![a.model.clone(), a.test.clone(), a.ontology.clone()],
        &["report.csv", "confusion.csv"],
    ))
}

fn mix_curve(a: &MixCurveArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let ontology_path = a.data.join("ontology.json");
    let classes = ClassMap::from_ontology(&Ontology::load(&ontology_path)?)?;
    let train_dir = a.data.join("classification_train");
    let test_dir = a.data.join("classification_test");
    let raw = [
        EmbeddingStore::read(train_dir.join("audio"))?,
        EmbeddingStore::read(train_dir.join("image"))?,
        EmbeddingStore::read(test_dir.join("audio"))?,
        EmbeddingStore::read(test_dir.join("image"))?,
    ];
    let joint = Projector::Joint(TranslationModel::load(&a.model)?);
    let pca = Projector::fit_pca(&raw[0], &raw[1])?;
    let project = |p: &Projector| raw.iter().map(|s| p.project(s)).collect::<xmodal::Result<Vec<_>>>();
    let (joint, pca) = (project(&joint)?, project(&pca)?);
    let source = xmodal::Modality::from(a.source);
    let cfg = MixCurveConfig {
        source,
        target: source.other(),
        grid: a.grid.clone(),
        grid_points: a.grid_points,
        seeds: a.seeds,
        seed,
        forest: forest_config(&a.forest, seed),
    };
    let curve = run_mix_curve(&cfg, &splits(&joint), &splits(&pca), &classes)?;
    curve.write_csv(out.join("mix_curve.csv"))?;
    curve.write_per_seed_csv(out.join("mix_curve_seeds.csv"))?;
    Ok(record(
        (0..a.seeds as u64).map(|s| seed + s).collect(),
        vec![train_dir, test_dir, ontology_path, a.model.clone()],
        &["mix_curve.csv", "mix_curve_seeds.csv"],
    ))
}

/// Stores in train audio, train image, test audio, test image order.
fn splits(s: &[EmbeddingStore]) -> ClassificationSplits<'_> {
    ClassificationSplits {
        audio_train: &s[0],
        image_train: &s[1],
        audio_test: &s[2],
        image_test: &s[3],
    }
}

fn cluster_dist(a: &ClusterArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let classes = ClassMap::from_ontology(&Ontology::load(&a.ontology)?)?;
    let (audio, image) = load_pair(&a.audio, &a.image, a.model.as_ref())?;
    let sort = match a.sort {
        SortArg::Modality => ClusterSort::ModalityMajor,
        SortArg::Class => ClusterSort::ClassMajor,
    };
    let matrix = run_cluster_distances(&[&audio, &image], &classes, sort)?;
    matrix.write_csv(out.join("cluster_distances.csv"))?;
    if let (Some(within), Some(cross)) = (matrix.within_class_cross_modality_mean(), matrix.cross_class_mean()) {
        println!("same class across modalities {within:.4}, across classes {cross:.4}");
    }
    for key in &matrix.missing {
        println!("missing {}", matrix.label(*key));
    }
    let mut inputs = vec![a.audio.clone(), a.image.clone(), a.ontology.clone()];
    inputs.extend(a.model.clone());
    Ok(record(vec![seed], inputs, &["cluster_distances.csv"]))
}

fn class_hist(a: &ClassHistArgs, seed: u64, out: &Path) -> Outcome<RunRecord> {
    let ontology = Ontology::load(&a.ontology)?;
    let store = EmbeddingStore::read(&a.store)?;
    let histogram = class_histogram(&store, &ontology)?;
    write_histogram_csv(&histogram, out.join("class_histogram.csv"))?;
    Ok(record(vec![seed], vec![a.store.clone(), a.ontology.clone()], &["class_histogram.csv"]))
}
