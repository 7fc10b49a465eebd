//! Shared fixtures for the benchmarks.

use loadcast::experiments::{synth_series, SynthKind, SynthProfile};
use loadcast::series::{delay_embed, normalize, split_blocks, UNIT_RANGE};
use loadcast::trace::{TraceRecord, RECORD_SIZE};
use loadcast::{SplitSpec, Splits, SupervisedDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Normalized, delay-embedded synthetic day series and its default splits.
pub fn day_dataset(seed: u64, y_delays: &[usize]) -> (SupervisedDataset, Splits) {
    let series = synth_series(&SynthProfile::new(SynthKind::WorldcupDays, seed)).expect("synthetic profile");
    let (scaled, _) = normalize(&series, UNIT_RANGE).expect("non-constant series");
    let ds = delay_embed(&scaled, y_delays, None).expect("series longer than delays");
    let splits = split_blocks(ds.len(), &SplitSpec::default()).expect("non-empty blocks");
    (ds, splits)
}

/// Normalized per-second series of `len` points.
pub fn seconds_dataset(seed: u64, len: usize) -> (SupervisedDataset, Splits) {
    let profile = SynthProfile::new(SynthKind::Day66Seconds, seed).with_length(len);
    let series = synth_series(&profile).expect("synthetic profile");
    let (scaled, _) = normalize(&series, UNIT_RANGE).expect("non-constant series");
    let ds = delay_embed(&scaled, &[1, 2], None).expect("series longer than delays");
    let splits = split_blocks(ds.len(), &SplitSpec::default()).expect("non-empty blocks");
    (ds, splits)
}

/// `n` random epochs spread over one day.
pub fn random_epochs(seed: u64, n: usize) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| 898_207_200 + rng.gen_range(0..86_400)).collect()
}

/// `n` encoded trace records with random fields.
pub fn trace_bytes(seed: u64, n: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n * RECORD_SIZE);
    for _ in 0..n {
        let record = TraceRecord {
            timestamp: 898_207_200 + rng.gen_range(0..86_400),
            client_id: rng.gen(),
            object_id: rng.gen(),
            size: rng.gen(),
            method: rng.gen(),
            status: rng.gen(),
            doc_type: rng.gen(),
            server: rng.gen(),
        };
        out.extend_from_slice(&record.to_bytes());
    }
    out
}
