//! Train briefly, checkpoint, reload, and evaluate both readout heads.
//!
//! ```bash
//! cargo run --release -p cgib --example evaluate_checkpoint
//! ```

use cgib::datagen::{generate, SynthSpec};
use cgib::gnn::GinConfig;
use cgib::trainer::{evaluate, load_checkpoint, save_checkpoint, train, Head, TrainConfig};

fn main() -> cgib::Result<()> {
    let bundle = generate(&SynthSpec {
        num_train: 400,
        num_id_val: 100,
        num_id_test: 100,
        num_ood_val: 100,
        num_ood_test: 100,
        seed: 13,
        ..SynthSpec::default()
    })?;
    let config = TrainConfig {
        epochs: 25,
        eval_every: 5,
        gin: GinConfig {
            hidden_dim: 24,
            ..GinConfig::default()
        },
        ..TrainConfig::default()
    };
    let (model, _) = train(&config, &bundle, 4)?;

    let path = std::env::temp_dir().join("cgib_example_checkpoint.json");
    save_checkpoint(&model, &path)?;
    let restored = load_checkpoint(&path)?;
    println!("checkpoint round trip via {}", path.display());

    println!("\n{:<10} {:<12} {:>8} {:>8}", "split", "head", "mae", "rmse");
    for (name, graphs) in bundle.splits() {
        if graphs.is_empty() {
            continue;
        }
        for (label, head) in [("causal", Head::Causal), ("confounding", Head::Confounding)] {
            let m = evaluate(&restored, graphs, head)?;
            println!("{name:<10} {label:<12} {:>8.4} {:>8.4}", m.mae, m.rmse);
        }
    }
    Ok(())
}
