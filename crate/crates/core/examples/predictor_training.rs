//! Train one accuracy predictor per model online and watch held-out loss fall.
//! Also round-trips the weights through the text format.
//!
//!     cargo run --release --example predictor_training

use mess_plus::predictor::{PredictorBank, PredictorParams, PredictorSettings};
use mess_plus::zoo::{synth_trace, SynthConfig};

fn main() -> mess_plus::Result<()> {
    let trace = synth_trace(&SynthConfig::wmt14_two_model(1_200), 3)?;
    let (train, held) = trace.split_at(1_000);
    let settings = PredictorSettings {
        dim: 1 << 14,
        ..Default::default()
    };
    let mut bank = PredictorBank::new(2, &settings, 3)?;
    let held_x = held
        .iter()
        .map(|r| bank.featurize(&r.text))
        .collect::<mess_plus::Result<Vec<_>>>()?;
    let held_y: Vec<Vec<f64>> = held.iter().map(|r| r.accuracies()).collect();

    for (k, rec) in train.iter().enumerate() {
        if k % 200 == 0 {
            let l = bank.held_out_losses(&held_x, &held_y)?;
            println!(
                "after {k:>4} updates: loss small {:.4}  large {:.4}",
                l[0], l[1]
            );
        }
        let x = bank.featurize(&rec.text)?;
        bank.update_all(&x, &rec.accuracies(), 1.0)?;
    }
    let l = bank.held_out_losses(&held_x, &held_y)?;
    println!(
        "after {:>4} updates: loss small {:.4}  large {:.4}",
        train.len(),
        l[0],
        l[1]
    );

    let x = bank.featurize(&held[0].text)?;
    println!(
        "\nprediction for `{}`: {:?}",
        held[0].text,
        bank.predict_all(&x)?
    );
    println!("truth: {:?}", held[0].accuracies());

    let text = bank.params(1).to_text();
    let back = PredictorParams::read_text(text.as_bytes())?;
    assert_eq!(&back, bank.params(1));
    println!("\nserialized large-model predictor: {} bytes", text.len());
    Ok(())
}
