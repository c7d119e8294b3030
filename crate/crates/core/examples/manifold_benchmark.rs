//! Paired NLP / PCA / LPP comparison on the synthetic manifold benchmark.
//!
//! `cargo run --release --example manifold_benchmark -- [seed] [ambient noise]`

use nlproj::synthetic::{manifold_benchmark, ManifoldSpec};
use nlproj::{run_experiment, BaselineConfig, Classifier, MethodConfig, SplitSpec, TrainConfig};

fn main() -> nlproj::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut spec = ManifoldSpec::default();
    if let Some(s) = args.next() {
        spec.seed = s.parse().expect("seed");
    }
    if let Some(s) = args.next() {
        spec.ambient_noise = s.parse().expect("noise");
    }
    let data = manifold_benchmark(&spec);
    let split = SplitSpec::new(0.5, 1);
    for dim in [2, 5, 10] {
        let methods = [
            MethodConfig::Nlp(TrainConfig::new(5, dim)),
            MethodConfig::Baseline(BaselineConfig::pca(dim)),
            MethodConfig::Baseline(BaselineConfig::lpp(dim, 5)),
        ];
        for m in &methods {
            let r = run_experiment(&data, m, &split, Classifier::Nn)?;
            println!("d'={dim:>2} {:>4} {}", r.method, r.summary_line());
        }
    }
    Ok(())
}
