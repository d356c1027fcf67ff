//! Data and time overhead of a defense, measured over paired traces.
//!
//! For a pair `(w, D(w))` of the same page load without and with the defense,
//! the data ratio is `(|D(w)| - |w|) / |w|` with `|.|` the total bytes of the
//! trace, and the time ratio is `(t(D(w)) - t(w)) / t(w)` with `t(.)` the
//! timestamp of the last real packet. Corpus overheads are the arithmetic
//! means of the per-trace ratios.

use thiserror::Error;

use crate::num::Scalar;
use crate::trace::Trace;

/// Corpus-level overhead summary plus the per-trace ratios it averages.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadReport<T> {
    /// Mean of the per-trace data ratios.
    pub data_overhead: T,
    /// Mean of the per-trace time ratios.
    pub time_overhead: T,
    /// `(data_ratio, time_ratio)` per input pair, in input order.
    pub per_trace: Vec<(T, T)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no trace pairs given")]
    EmptyInput,
    #[error("trace has no real packets")]
    NoRealPackets,
    #[error("pair {pair}: trace has no real packets")]
    PairNoRealPackets { pair: usize },
    #[error("pair {pair}: undefended trace has zero bytes")]
    ZeroBaselineBytes { pair: usize },
    #[error("pair {pair}: undefended load time is zero")]
    ZeroBaselineTime { pair: usize },
}

/// Load time of a trace: the timestamp of its last real packet.
pub fn load_time<T: Scalar>(trace: &Trace<T>) -> Result<T, MetricsError> {
    trace.last_real_time().ok_or(MetricsError::NoRealPackets)
}

/// Computes per-pair overhead ratios and their corpus means.
///
/// Each pair is `(undefended, defended)` for the same load. Pairs whose
/// undefended trace has zero bytes or a zero load time are rejected rather
/// than producing infinite ratios.
pub fn compute_overhead<T: Scalar>(
    pairs: &[(Trace<T>, Trace<T>)],
) -> Result<OverheadReport<T>, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }

    let mut per_trace = Vec::with_capacity(pairs.len());
    let mut data_sum = T::zero();
    let mut time_sum = T::zero();

    for (pair, (baseline, defended)) in pairs.iter().enumerate() {
        let base_bytes = baseline.total_bytes();
        if base_bytes == 0 {
            return Err(MetricsError::ZeroBaselineBytes { pair });
        }
        let base_time = baseline
            .last_real_time()
            .ok_or(MetricsError::PairNoRealPackets { pair })?;
        if base_time <= T::zero() {
            return Err(MetricsError::ZeroBaselineTime { pair });
        }
        let def_time = defended
            .last_real_time()
            .ok_or(MetricsError::PairNoRealPackets { pair })?;

        let base_bytes = T::from_u64(base_bytes).expect("byte count fits scalar");
        let def_bytes = T::from_u64(defended.total_bytes()).expect("byte count fits scalar");

        let data_ratio = (def_bytes - base_bytes) / base_bytes;
        let time_ratio = (def_time - base_time) / base_time;
        data_sum += data_ratio;
        time_sum += time_ratio;
        per_trace.push((data_ratio, time_ratio));
    }

    let n = T::from_usize(per_trace.len()).expect("pair count fits scalar");
    Ok(OverheadReport {
        data_overhead: data_sum / n,
        time_overhead: time_sum / n,
        per_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{parse_trace, Direction, Packet, PacketKind};

    fn trace(text: &str) -> Trace<f64> {
        parse_trace(text).unwrap()
    }

    #[test]
    fn identity_pair_has_zero_overhead() {
        let w = trace("0\t514\n10\t-514");
        let report = compute_overhead(&[(w.clone(), w)]).unwrap();
        assert_eq!(report.data_overhead, 0.0);
        assert_eq!(report.time_overhead, 0.0);
    }

    #[test]
    fn worked_example_ratios() {
        // |w| = 1000 B over t(w) = 10 s; |D(w)| = 2420 B over t(D(w)) = 13 s.
        let w = trace("0\t500\n10\t-500");
        let d = trace("0\t500\n10\t-500\n13\t-500\tR\n13\t920\tD");
        let report = compute_overhead(&[(w, d)]).unwrap();
        assert_eq!(report.data_overhead, 1.42);
        assert_eq!(report.time_overhead, 0.30);
    }

    #[test]
    fn corpus_mean_is_mean_of_ratios() {
        // Ratios 1.0 and 2.0 average to 1.5 regardless of trace sizes.
        let w1 = trace("0\t100\n1\t-100");
        let d1 = trace("0\t100\n1\t-100\n1\t200\tD");
        let w2 = trace("0\t1000\n2\t-1000");
        let d2 = trace("0\t1000\n2\t-1000\n2\t4000\tD");
        let report = compute_overhead(&[(w1, d1), (w2, d2)]).unwrap();
        assert_eq!(report.per_trace[0].0, 1.0);
        assert_eq!(report.per_trace[1].0, 2.0);
        assert_eq!(report.data_overhead, 1.5);
    }

    #[test]
    fn rejects_degenerate_baselines() {
        assert_eq!(
            compute_overhead::<f64>(&[]),
            Err(MetricsError::EmptyInput)
        );

        let single_at_zero = trace("0\t514");
        let d = single_at_zero.clone();
        assert_eq!(
            compute_overhead(&[(single_at_zero, d)]),
            Err(MetricsError::ZeroBaselineTime { pair: 0 })
        );

        let no_real = trace("0\t514\tD\n1\t514\tD");
        let d = trace("0\t514\n1\t-514");
        assert_eq!(
            compute_overhead(&[(no_real, d)]),
            Err(MetricsError::PairNoRealPackets { pair: 0 })
        );
    }

    #[test]
    fn load_time_requires_a_real_packet() {
        let t = trace("0\t514\tD");
        assert_eq!(load_time(&t), Err(MetricsError::NoRealPackets));
        let t = trace("0\t514\n3\t-514\tD");
        assert_eq!(load_time(&t), Ok(0.0));
    }

    #[test]
    fn ratios_are_scale_free() {
        let w = trace("0\t100\n5\t-300");
        let d = trace("0\t100\n5\t-300\n6\t-100\tR\n7\t514\tD");
        let scale = |t: &Trace<f64>, k: u32| {
            Trace::from_packets(
                t.iter()
                    .map(|p| Packet {
                        size: p.size * k,
                        ..*p
                    })
                    .collect(),
            )
        };
        let base = compute_overhead(&[(w.clone(), d.clone())]).unwrap();
        let scaled = compute_overhead(&[(scale(&w, 7), scale(&d, 7))]).unwrap();
        assert!((base.data_overhead - scaled.data_overhead).abs() < 1e-12);
        assert_eq!(base.time_overhead, scaled.time_overhead);
    }

    #[test]
    fn trailing_dummies_change_data_not_time() {
        let w = trace("0\t100\n5\t-300");
        let d = trace("0\t100\n5\t-300\n6\t-100\tR");
        let before = compute_overhead(&[(w.clone(), d.clone())]).unwrap();

        let mut extended = d.clone();
        extended.push(Packet::dummy(9.0, Direction::Incoming, 514));
        assert_eq!(extended.packets().last().unwrap().kind, PacketKind::Dummy);
        let after = compute_overhead(&[(w, extended)]).unwrap();

        assert!(after.data_overhead > before.data_overhead);
        assert_eq!(after.time_overhead, before.time_overhead);
    }
}
