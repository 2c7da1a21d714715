use crate::classes::{ClassMap, LabeledData};
use crate::error::{Error, Result};
use crate::forest::{evaluate, fit_forest, ClassificationReport, ForestConfig};
use crate::store::EmbeddingStore;

/// Fits one forest on the concatenated training stores and scores it on
/// `test`. All stores must already live in the same projected space.
pub fn run_classification_report(
    train: &[&EmbeddingStore],
    test: &EmbeddingStore,
    classes: &ClassMap,
    forest: &ForestConfig,
) -> Result<ClassificationReport> {
    let parts: Vec<LabeledData> = train.iter().map(|s| LabeledData::from_store(s, classes)).collect();
    let refs: Vec<&LabeledData> = parts.iter().collect();
    let train = LabeledData::concat(&refs)?;
    let test = LabeledData::from_store(test, classes);
    if test.dim != train.dim {
        return Err(Error::DimMismatch {
            expected: train.dim,
            actual: test.dim,
        });
    }
    let model = fit_forest(&train, classes.len(), forest)?;
    evaluate(&model, &test)
}
