use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use qss_core::adversary::AdversaryModel;
use qss_core::channel::ChannelConfig;
use qss_core::protocol::{run_session, MonitorConfig, SessionParams};
use qss_core::source::{DimensionDistribution, SourceConfig};

fn main() {
    let p = SessionParams {
        source: SourceConfig::randomized(0.1, DimensionDistribution::Fixed(4)),
        channel: ChannelConfig { alpha: 1.0, dark: 0.0 },
        adversary: Some(AdversaryModel::EveIrEntangled),
        session_slots: 30_000,
        test_fraction: 0.1,
        monitor: MonitorConfig::default(),
    };
    for seed in 0..3000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Err(e) = run_session(&p, &mut rng) {
            println!("seed {seed} -> {e}");
            return;
        }
    }
    println!("no failure in 3000 seeds");
}
