//! The four learners on one encoded feature matrix.

use multiverse::data::{synthesize, GeneratorSpec};
use multiverse::models::{train, ModelDefaults, ModelKind, ModelSpec};
use multiverse::pipeline::{apply_encoder, fit_encoder, split_frame, Encoding, Stratify};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let frame = synthesize(&GeneratorSpec::example(3000), 3)?;
    let (train_frame, test_frame, _) = split_frame(&frame, 0.3, Stratify::Target, 11)?;
    let features: Vec<String> = ["age", "income", "hours", "sex", "education", "marital"].map(String::from).to_vec();
    let encoder = fit_encoder(&train_frame, &features, Encoding::OneHot)?;
    let x_train = apply_encoder(&encoder, &train_frame)?;
    let x_test = apply_encoder(&encoder, &test_frame)?;
    let (y_train, y_test) = (train_frame.target(), test_frame.target());

    for kind in ModelKind::ALL {
        let model = train(&ModelSpec::new(kind, &ModelDefaults::default()), &x_train, &y_train, 5)?;
        let scores = model.predict_scores(&x_test)?;
        let correct = scores.iter().zip(&y_test).filter(|(s, &y)| u8::from(**s >= 0.5) == y).count();
        println!("{kind:<10} test accuracy {:.3}", correct as f64 / y_test.len() as f64);
    }
    Ok(())
}
