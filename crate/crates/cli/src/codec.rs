use crate::config::Manifest;
use crate::error::{CliError, Result};
use crate::output::{write_json, Csv};
use qsdc_core::gf2::BitVec;
use qsdc_core::mask_codec::{build_random_codec, CodecError, MaskCodec, ToeplitzSeed};
use qsdc_core::rng::{Purpose, RngSeed, SimRng};
use rand::Rng;
use serde::Serialize;
use std::path::Path;

pub const DEFAULT_RANDOM_FRAMES: usize = 10_000;
pub const DEFAULT_EXHAUSTIVE_SEEDS: usize = 200;
pub const EXHAUSTIVE_MAX_K: usize = 4;
pub const EXHAUSTIVE_MAX_N: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The seed was rejected before any frame was coded.
    SeedDegenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CodecCheck {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Seeds drawn and discarded for a singular pivot block.
    pub degenerate_seeds: usize,
    pub status: CheckStatus,
}

impl CodecCheck {
    fn tally(name: &str, cases: usize, failures: usize, degenerate_seeds: usize) -> Self {
        let status = if failures == 0 { CheckStatus::Pass } else { CheckStatus::Fail };
        CodecCheck { name: name.into(), cases, failures, degenerate_seeds, status }
    }
}

fn bits(s: &str) -> BitVec {
    BitVec::from_str01(s).expect("literal bit string")
}

fn int_bits(value: usize, len: usize) -> BitVec {
    BitVec::from_bits((0..len).rev().map(|j| (value >> j) & 1 == 1))
}

fn random_bits(len: usize, rng: &mut SimRng) -> BitVec {
    BitVec::from_bits((0..len).map(|_| rng.random::<bool>()))
}

/// Seed `1100100` with `k = 3`, `n = 5`, message `001`, redundancy `10`.
pub fn worked_example() -> Vec<CodecCheck> {
    let codec = MaskCodec::build(ToeplitzSeed::new(bits("1100100"), 3, 5).expect("valid")).expect("invertible");
    let t_ok = codec.toeplitz().to_u8_rows() == vec![vec![1, 1, 0, 0, 1], vec![0, 1, 1, 0, 0], vec![0, 0, 1, 1, 0]];
    let s_ok = codec.systematic().to_u8_rows() == vec![vec![0, 1, 1, 0, 0], vec![0, 1, 0, 1, 0], vec![1, 1, 0, 0, 1]];
    let masked = codec.encode(&bits("001"), &bits("10")).map(|f| f.masked());
    let enc_ok = masked.as_ref().is_ok_and(|m| *m == bits("10000"));
    let dec_ok = codec.decode(&bits("10000")).is_ok_and(|m| m == bits("001"));
    vec![
        CodecCheck::tally("worked_example_toeplitz", 1, usize::from(!t_ok), 0),
        CodecCheck::tally("worked_example_systematic", 1, usize::from(!s_ok), 0),
        CodecCheck::tally("worked_example_encode", 1, usize::from(!enc_ok), 0),
        CodecCheck::tally("worked_example_decode", 1, usize::from(!dec_ok), 0),
    ]
}

/// Every `(m, R)` pair for every `k ≤ 4 < n ≤ 8` code, `seeds` codes each.
pub fn exhaustive_small_codes(seeds: usize, seed: RngSeed) -> CodecCheck {
    let mut rng = seed.stream(Purpose::Protocol, 1000);
    let (mut cases, mut failures, mut degenerate) = (0, 0, 0);
    for k in 1..=EXHAUSTIVE_MAX_K {
        for n in k + 1..=EXHAUSTIVE_MAX_N {
            let mut built = 0;
            while built < seeds {
                let codec = match MaskCodec::build(ToeplitzSeed::random(k, n, &mut rng).expect("valid dims")) {
                    Ok(c) => c,
                    Err(CodecError::SeedDegenerate { .. }) => {
                        degenerate += 1;
                        continue;
                    }
                    Err(_) => {
                        failures += 1;
                        break;
                    }
                };
                built += 1;
                for m in 0..1usize << k {
                    let msg = int_bits(m, k);
                    for r in 0..1usize << (n - k) {
                        cases += 1;
                        let ok = codec
                            .encode(&msg, &int_bits(r, n - k))
                            .and_then(|f| codec.decode(&f.masked()))
                            .is_ok_and(|d| d == msg);
                        failures += usize::from(!ok);
                    }
                }
            }
        }
    }
    CodecCheck::tally("exhaustive_k4_n8", cases, failures, degenerate)
}

pub fn random_frames(k: usize, n: usize, frames: usize, seed: RngSeed) -> CodecCheck {
    let name = format!("random_frames_{k}_{n}");
    let mut rng = seed.stream(Purpose::Protocol, 1001);
    let (codec, draws) = match build_random_codec(k, n, &mut rng, 64) {
        Ok(v) => v,
        Err(CodecError::SeedDegenerate { .. }) => {
            return CodecCheck { name, cases: 0, failures: 0, degenerate_seeds: 64, status: CheckStatus::SeedDegenerate }
        }
        Err(_) => return CodecCheck::tally(&name, 0, 1, 0),
    };
    let mut failures = 0;
    for _ in 0..frames {
        let msg = random_bits(k, &mut rng);
        let ok = codec
            .encode_random(&msg, &mut rng)
            .and_then(|f| codec.decode(&f.masked()))
            .is_ok_and(|d| d == msg);
        failures += usize::from(!ok);
    }
    CodecCheck::tally(&name, frames, failures, draws - 1)
}

/// A seed with a singular pivot block is reported, not failed.
pub fn degenerate_seed() -> CodecCheck {
    let status = match MaskCodec::build(ToeplitzSeed::new(bits("10"), 1, 2).expect("valid")) {
        Err(CodecError::SeedDegenerate { .. }) => CheckStatus::SeedDegenerate,
        _ => CheckStatus::Fail,
    };
    CodecCheck { name: "degenerate_seed".into(), cases: 1, failures: usize::from(status == CheckStatus::Fail), degenerate_seeds: 1, status }
}

pub fn suite(k: usize, n: usize, frames: usize, seeds: usize, seed: RngSeed) -> Vec<CodecCheck> {
    let mut checks = worked_example();
    checks.push(exhaustive_small_codes(seeds, seed));
    checks.push(random_frames(k, n, frames, seed));
    checks.push(degenerate_seed());
    checks
}

pub fn cmd_codec(manifest: Option<&Manifest>, seed: u64, out: &Path) -> Result<()> {
    let section = manifest.and_then(|m| m.file.codec);
    let (k, n) = section.map(|c| (c.k, c.n)).unwrap_or((655, 1310));
    if k == 0 || k >= n {
        return Err(CliError::Config(format!("[codec] need 0 < k < n, got k={k} n={n}")));
    }
    let frames = section.and_then(|c| c.random_frames).unwrap_or(DEFAULT_RANDOM_FRAMES);
    let seeds = section.and_then(|c| c.exhaustive_seeds).unwrap_or(DEFAULT_EXHAUSTIVE_SEEDS);
    let checks = suite(k, n, frames, seeds, RngSeed(seed));

    println!("{:<28} {:>10} {:>9} {:>11}  status", "check", "cases", "failures", "degenerate");
    let mut csv = Csv::new(&["check", "cases", "failures", "degenerate_seeds", "status"]);
    for c in &checks {
        let status = serde_json::to_value(c.status)?.as_str().unwrap_or_default().to_string();
        println!("{:<28} {:>10} {:>9} {:>11}  {status}", c.name, c.cases, c.failures, c.degenerate_seeds);
        csv.row([c.name.clone(), c.cases.to_string(), c.failures.to_string(), c.degenerate_seeds.to_string(), status]);
    }
    std::fs::create_dir_all(out)?;
    csv.write(&out.join("codec_report.csv"))?;
    write_json(&out.join("codec_report.json"), &checks)?;
    let failed: Vec<&str> = checks.iter().filter(|c| c.status == CheckStatus::Fail).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(CliError::Internal(format!("codec checks failed: {}", failed.join(", "))));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let checks = suite(16, 32, 200, 5, RngSeed(1));
        assert!(checks.iter().all(|c| c.status != CheckStatus::Fail), "{checks:?}");
        assert_eq!(checks.last().unwrap().status, CheckStatus::SeedDegenerate);
    }

    #[test]
    fn exhaustive_case_count() {
        let c = exhaustive_small_codes(1, RngSeed(2));
        // Σ over k ≤ 4 < n ≤ 8 of 2^n
        let want: usize = (1..=4).flat_map(|k| (k + 1..=8).map(|n| 1usize << n)).sum();
        assert_eq!(c.cases, want);
    }
}
