use xmodal::experiments::*;
use xmodal::forest::ForestConfig;
use xmodal::synth::{class_histogram, ModelSpec, SubsetCounts};
use xmodal::*;

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_classes: 6,
        latent_dim: 8,
        audio: ModelSpec::new("a", 32, 0.05),
        image: ModelSpec::new("v", 48, 0.05),
        shared: None,
        samples_per_class: SubsetCounts {
            translation: 60,
            cross_modal: 20,
            classification_train: 30,
            classification_test: 10,
        },
        rng_seed: seed,
        ..Default::default()
    }
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        batch_size: 64,
        max_epochs: 40,
        ..Default::default()
    }
}

fn quick_forest() -> ForestConfig {
    ForestConfig {
        n_trees: 30,
        ..Default::default()
    }
}

#[test]
fn training_lowers_validation_loss() {
    let data = generate(&small(1)).unwrap();
    let (_, history) = train_translation(&data.translation.pairs().unwrap(), &quick_train()).unwrap();
    assert!(history.best_val_loss() < history.initial_val_loss);
    let last = history.epochs.last().unwrap();
    assert!(last.val_loss < history.initial_val_loss);
}

#[test]
fn default_data_is_linearly_separable() {
    let data = generate(&SynthConfig::default()).unwrap();
    let classes = ClassMap::from_ontology(&data.ontology).unwrap();
    let train = LabeledData::from_store(&data.classification_train.audio, &classes);
    let test = LabeledData::from_store(&data.classification_test.audio, &classes);
    let dim = train.dim;
    let mut centroids = vec![vec![0.0f64; dim]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    for i in 0..train.len() {
        counts[train.labels[i]] += 1;
        for (c, &v) in centroids[train.labels[i]].iter_mut().zip(train.row(i)) {
            *c += v as f64;
        }
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= *n as f64);
    }
    let correct = (0..test.len())
        .filter(|&i| {
            let x: Vec<f64> = test.row(i).iter().map(|&v| v as f64).collect();
            let nearest = (0..classes.len())
                .min_by(|&a, &b| {
                    let da: f64 = x.iter().zip(&centroids[a]).map(|(p, q)| (p - q).powi(2)).sum();
                    let db: f64 = x.iter().zip(&centroids[b]).map(|(p, q)| (p - q).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            nearest == test.labels[i]
        })
        .count();
    assert!(correct as f64 / test.len() as f64 > 0.9);

    // Same-class rows sit closer than different-class rows.
    let store = &data.cross_modal.image;
    let (mut intra, mut inter) = ((0.0, 0usize), (0.0, 0usize));
    for i in 0..store.len() {
        for j in 0..i {
            let d = cosine_distance(store.row(i), store.row(j));
            if classes.class_of(store.meta(i)) == classes.class_of(store.meta(j)) {
                intra = (intra.0 + d, intra.1 + 1);
            } else {
                inter = (inter.0 + d, inter.1 + 1);
            }
        }
    }
    assert!(intra.0 / (intra.1 as f64) < inter.0 / (inter.1 as f64));
}

#[test]
fn balanced_histogram() {
    let data = generate(&SynthConfig {
        samples_per_class: SubsetCounts {
            classification_train: 100,
            ..small(0).samples_per_class
        },
        ..small(0)
    })
    .unwrap();
    let hist = class_histogram(&data.classification_train.image, &data.ontology).unwrap();
    assert_eq!(hist.len(), 6);
    assert!(hist.iter().all(|(_, c)| *c == 100));
}

#[test]
fn combination_study_rows_and_ordering() {
    let cfg = SynthConfig {
        extra_audio: vec![ModelSpec::new("noisy", 32, 0.6)],
        shared: Some(synth::SharedSpec {
            name: "shared".into(),
            dim: 24,
            alignment: 0.3,
            noise: 0.05,
        }),
        ..small(2)
    };
    let data = generate(&cfg).unwrap();
    let (t, e) = (&data.translation, &data.cross_modal);
    let input = |name, translation, eval| ComboInput {
        name,
        translation,
        eval,
    };
    let clean = input("a", &t.audio, &e.audio);
    let noisy = input("noisy", &t.extra_audio[0], &e.extra_audio[0]);
    let image = input("v", &t.image, &e.image);
    let (sa, si) = e.shared.as_ref().unwrap();
    let (ta, ti) = t.shared.as_ref().unwrap();
    let baseline = (input("shared", ta, sa), input("shared", ti, si));
    let combo = ComboConfig {
        train: quick_train(),
        ..Default::default()
    };

    let single = run_combination_study(&[clean], &[image], Some(baseline), &data.ontology, &combo).unwrap();
    assert_eq!(single.rows.len(), 3);
    assert_eq!(single.of_kind(RowKind::Trained).count(), 1);
    let trained = single.find(RowKind::Trained, "a", "v").unwrap();
    let random = single.of_kind(RowKind::Random).next().unwrap();
    assert!(trained.ndcg_audio_to_image > random.ndcg_audio_to_image);
    assert!(trained.ndcg_image_to_audio > random.ndcg_image_to_audio);
    assert!(single.rows.windows(2).all(|w| w[0].mean() >= w[1].mean()));

    let both = run_combination_study(&[noisy, clean], &[image], None, &data.ontology, &combo).unwrap();
    assert_eq!(both.rows.len(), 3);
    let clean_row = both.find(RowKind::Trained, "a", "v").unwrap().mean();
    let noisy_row = both.find(RowKind::Trained, "noisy", "v").unwrap().mean();
    assert!(clean_row > noisy_row, "{clean_row} vs {noisy_row}");
}

#[test]
fn untrained_model_scores_near_random() {
    let data = generate(&small(3)).unwrap();
    let (model, history) = train_translation(
        &data.translation.pairs().unwrap(),
        &TrainConfig {
            max_epochs: 0,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(history.epochs.is_empty());
    let onto = &data.ontology;
    let rc = RelevanceConfig::for_ontology(onto);
    let e = &data.cross_modal;
    let untrained = cross_modal_eval(
        &translate_store(&model, &e.audio).unwrap(),
        &translate_store(&model, &e.image).unwrap(),
        onto,
        &rc,
        30,
    )
    .unwrap();
    let random = random_baseline_eval(&e.audio, &e.image, onto, &rc, 30, 0).unwrap();
    for (u, r) in untrained.reports().iter().zip(random.reports()) {
        assert!((u.mean_ndcg - r.mean_ndcg).abs() < 0.05, "{} vs {}", u.mean_ndcg, r.mean_ndcg);
    }
}

struct Projected {
    joint: [EmbeddingStore; 4],
    pca: [EmbeddingStore; 4],
    classes: ClassMap,
}

impl Projected {
    fn new(cfg: &SynthConfig) -> Self {
        let data = generate(cfg).unwrap();
        let (model, _) = train_translation(&data.translation.pairs().unwrap(), &quick_train()).unwrap();
        let (tr, te) = (&data.classification_train, &data.classification_test);
        let joint = Projector::Joint(model);
        let pca = Projector::Pca {
            audio: fit_pca(tr.audio.matrix(), 16).unwrap(),
            image: fit_pca(tr.image.matrix(), 16).unwrap(),
        };
        let all = |p: &Projector| [&tr.audio, &tr.image, &te.audio, &te.image].map(|s| p.project(s).unwrap());
        Self {
            joint: all(&joint),
            pca: all(&pca),
            classes: ClassMap::from_ontology(&data.ontology).unwrap(),
        }
    }

    fn splits(stores: &[EmbeddingStore; 4]) -> ClassificationSplits<'_> {
        ClassificationSplits {
            audio_train: &stores[0],
            image_train: &stores[1],
            audio_test: &stores[2],
            image_test: &stores[3],
        }
    }
}

#[test]
fn mix_curve_is_reproducible_and_consistent() {
    let p = Projected::new(&small(4));
    let cfg = MixCurveConfig {
        grid_points: 3,
        seeds: 2,
        forest: quick_forest(),
        ..Default::default()
    };
    let (joint, pca) = (Projected::splits(&p.joint), Projected::splits(&p.pca));
    let a = run_mix_curve(&cfg, &joint, &pca, &p.classes).unwrap();
    let b = run_mix_curve(&cfg, &joint, &pca, &p.classes).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.points.iter().map(|q| q.n_mixed).collect::<Vec<_>>(), vec![0, 90, 180]);
    for run in &a.per_seed {
        assert!(run.iter().all(|q| q.sm_target_f1 == run[0].sm_target_f1));
    }

    // The n = 0 point is a plain zero-shot run with the same forest seed.
    let train = LabeledData::from_store(&p.joint[0], &p.classes);
    let test = LabeledData::from_store(&p.joint[3], &p.classes);
    let forest = fit_forest(&train, p.classes.len(), &quick_forest()).unwrap();
    assert_eq!(a.per_seed[0][0].mmt_f1, evaluate(&forest, &test).unwrap().macro_f1);

    let dir = tempfile::tempdir().unwrap();
    a.write_csv(dir.path().join("curve.csv")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert!(text.starts_with("n_mixed,mmt_f1,mmp_f1,sm_source_f1,sm_target_f1\n"));
    assert_eq!(text.lines().count(), 4);
    a.write_per_seed_csv(dir.path().join("seeds.csv")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("seeds.csv")).unwrap();
    assert!(text.starts_with("seed,n_mixed,mmt_f1,mmp_f1,sm_source_f1,sm_target_f1\n"));
    assert_eq!(text.lines().count(), 1 + a.per_seed.len() * a.points.len());

    let too_many = MixCurveConfig {
        grid: Some(vec![0, 181]),
        ..cfg
    };
    assert!(matches!(
        run_mix_curve(&too_many, &joint, &pca, &p.classes),
        Err(Error::Config(_))
    ));
}

#[test]
fn merged_classes_confuse_each_other() {
    // cymbals/drums and trombone/trumpet share a latent.
    let cfg = SynthConfig {
        n_classes: 18,
        shared_latent_groups: vec![vec![4, 5], vec![13, 14]],
        samples_per_class: SubsetCounts {
            translation: 20,
            cross_modal: 5,
            classification_train: 40,
            classification_test: 20,
        },
        ..small(5)
    };
    let data = generate(&cfg).unwrap();
    let classes = ClassMap::from_ontology(&data.ontology).unwrap();
    let (tr, te) = (&data.classification_train, &data.classification_test);
    let report = run_classification_report(&[&tr.audio], &te.audio, &classes, &quick_forest()).unwrap();
    assert_eq!(report.per_class.len(), 18);
    let c = &report.confusion;
    for (a, b) in [(4, 5), (13, 14)] {
        let inside = c[a][a] + c[a][b] + c[b][a] + c[b][b];
        let total: usize = c[a].iter().chain(&c[b]).sum();
        assert_eq!(inside, total, "merged pair leaks outside itself");
        assert!(c[a][b] + c[b][a] > 0);
    }
    // Most errors anywhere in the matrix come from the two merged pairs.
    let off_diagonal: usize = (0..18).flat_map(|i| (0..18).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| c[i][j]).sum();
    let merged = c[4][5] + c[5][4] + c[13][14] + c[14][13];
    assert!(2 * merged > off_diagonal, "{merged} of {off_diagonal}");

    let dir = tempfile::tempdir().unwrap();
    report.write_csv(classes.names(), dir.path().join("f1.csv")).unwrap();
    report.write_confusion_csv(classes.names(), dir.path().join("confusion.csv")).unwrap();
    let f1 = std::fs::read_to_string(dir.path().join("f1.csv")).unwrap();
    assert_eq!(f1.lines().count(), 20);
    assert!(f1.lines().last().unwrap().starts_with("macro,"));
    let confusion = std::fs::read_to_string(dir.path().join("confusion.csv")).unwrap();
    assert!(confusion.lines().next().unwrap().ends_with(",violin,voice"));
}

#[test]
fn cluster_matrix_reports_empty_cells() {
    let data = generate(&SynthConfig {
        image: ModelSpec::new("v", 32, 0.05),
        ..small(6)
    })
    .unwrap();
    let classes = ClassMap::from_ontology(&data.ontology).unwrap();
    let only_first: Vec<usize> = (0..data.cross_modal.image.len())
        .filter(|&i| classes.class_of(data.cross_modal.image.meta(i)) != Some(0))
        .collect();
    let image = data.cross_modal.image.select(&only_first);
    let m = run_cluster_distances(&[&data.cross_modal.audio, &image], &classes, ClusterSort::ModalityMajor).unwrap();
    assert_eq!(m.len(), 11);
    assert_eq!(
        m.missing,
        vec![ClusterKey {
            modality: Modality::Image,
            class: 0
        }]
    );
    assert!(m.values.iter().all(|v| v.is_finite()));
}

#[test]
fn identical_clusters_have_zero_distance() {
    let data = generate(&SynthConfig {
        latent_noise: 0.0,
        audio: ModelSpec::new("a", 8, 0.0),
        image: ModelSpec::new("v", 8, 0.0),
        ..small(7)
    })
    .unwrap();
    let classes = ClassMap::from_ontology(&data.ontology).unwrap();
    // Relabel the image rows as audio to put two copies of one cluster side by side.
    let mut metas = data.cross_modal.audio.metas().to_vec();
    for m in &mut metas {
        m.modality = Modality::Image;
    }
    let copy = EmbeddingStore::new(metas, data.cross_modal.audio.matrix().clone()).unwrap();
    let m = run_cluster_distances(&[&data.cross_modal.audio, &copy], &classes, ClusterSort::ClassMajor).unwrap();
    for c in 0..6 {
        let a = ClusterKey {
            modality: Modality::Audio,
            class: c,
        };
        let b = ClusterKey {
            modality: Modality::Image,
            class: c,
        };
        assert!(m.distance(a, b).unwrap().abs() < 1e-12);
    }
}

#[test]
fn run_manifest_records_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&small(8)).unwrap();
    data.write(dir.path()).unwrap();
    let inputs = vec![dir.path().join("translation/audio"), dir.path().join("ontology.json")];
    let manifest = RunManifest::new("synth", serde_json::json!({"seed": 8}), vec![8], &inputs).unwrap();
    assert_eq!(manifest.inputs.len(), 2);
    let again = RunManifest::new("synth", serde_json::json!({"seed": 8}), vec![8], &inputs).unwrap();
    assert_eq!(manifest.content_hash, again.content_hash);
    manifest.write(dir.path().join("run.json")).unwrap();
    let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(back, manifest);
}
