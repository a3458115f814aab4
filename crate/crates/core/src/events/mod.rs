//! Timestamped event streams: a brute-force reference simulator and voxel
//! builders for recorded or simulated events.
//!
//! The reference simulator linearly interpolates each pixel's log luminance
//! between frames and emits one event per threshold crossing at the exact
//! crossing time. Binning its output with [`discrete_voxel_from_events`]
//! gives the voxel that the frame-stepped path in [`crate::sensor`] computes
//! without ever producing events.

mod io;

pub use io::{
    read_events, read_events_from, write_events, write_events_to, EventFormat, ReadOptions,
};

use crate::error::{Error, Result};
use crate::rng::{SceneKey, StreamTag};
use crate::sensor::{step_perturbation, SimConfig, SNAP_TOLERANCE};
use crate::types::{
    Dims, DiscreteVoxel, EventRecord, EventStream, Frame, Grid, InterpolatedVoxel, LogLuminance,
    ResidualState, SensorParams,
};

/// Reference event stream for `B + 1` log-luminance frames.
///
/// Frame `i` sits at `t = i / B`. Noise and hot pixels enter as per-step
/// constants drawn exactly as [`crate::sensor::v2v_voxel_log`] draws them, so
/// both paths see the same signal.
///
/// A crossing that lands exactly on a frame timestamp is stamped just before
/// it, so events caused by frame interval `i` always fall in bin `i`.
pub fn oracle_simulate_log(
    logs: &[LogLuminance],
    params: &SensorParams,
    initial: &ResidualState,
    keys: &SceneKey,
    first_frame_index: u64,
) -> Result<EventStream> {
    if logs.len() < 2 {
        return Err(Error::data(format!(
            "event simulation needs at least 2 frames, got {}",
            logs.len()
        )));
    }
    let dims = initial.dims();
    for l in logs {
        dims.ensure_same(l.dims())?;
    }
    check_coordinate_range(dims)?;
    let intervals = logs.len() - 1;

    // Signal seen by the comparator: log luminance plus all perturbations so far.
    let mut signal: Vec<f64> = logs[0].values().to_vec();
    let mut reference: Vec<f64> = signal
        .iter()
        .zip(initial.values())
        .map(|(s, r)| s - r)
        .collect();

    let mut per_pixel: Vec<Vec<EventRecord>> = vec![Vec::new(); dims.len()];
    for i in 1..=intervals {
        let key = keys.key(StreamTag::Noise, first_frame_index + i as u64);
        let perturbation = step_perturbation(params, dims, &key)?;
        let t_start = (i - 1) as f64 / intervals as f64;
        let t_end = i as f64 / intervals as f64;
        let t_last = if i == intervals {
            t_end
        } else {
            t_end.next_down()
        };
        for p in 0..dims.len() {
            let start = signal[p];
            let mut end = start + (logs[i].values()[p] - logs[i - 1].values()[p]);
            if let Some(pert) = &perturbation {
                end += pert[p];
            }
            let x = (p % dims.width) as u16;
            let y = (p / dims.width) as u16;
            let emit = |level: f64, polarity: i8, out: &mut Vec<EventRecord>| {
                let frac = if end == start {
                    0.0
                } else {
                    ((level - start) / (end - start)).clamp(0.0, 1.0)
                };
                let t = (t_start + frac * (t_end - t_start)).clamp(t_start, t_last);
                out.push(EventRecord::new(t, x, y, polarity));
            };
            while crossed(end - reference[p], params.c_plus) {
                reference[p] += params.c_plus;
                emit(reference[p], 1, &mut per_pixel[p]);
            }
            while crossed(reference[p] - end, params.c_minus) {
                reference[p] -= params.c_minus;
                emit(reference[p], -1, &mut per_pixel[p]);
            }
            signal[p] = end;
        }
    }
    let records = per_pixel.into_iter().flatten().collect();
    EventStream::from_unsorted(dims, records)
}

/// True once `gap` reaches one full threshold, with the same integer snapping
/// the stepped path applies to its quotients.
fn crossed(gap: f64, threshold: f64) -> bool {
    gap / threshold >= 1.0 - SNAP_TOLERANCE
}

/// [`oracle_simulate_log`] on 8-bit frames.
pub fn oracle_simulate(
    frames: &[Frame],
    config: &SimConfig,
    params: &SensorParams,
    initial: &ResidualState,
    keys: &SceneKey,
    first_frame_index: u64,
) -> Result<EventStream> {
    config.validate()?;
    oracle_simulate_log(
        &config.frames_log(frames),
        params,
        initial,
        keys,
        first_frame_index,
    )
}

fn check_coordinate_range(dims: Dims) -> Result<()> {
    if dims.width > u16::MAX as usize + 1 || dims.height > u16::MAX as usize + 1 {
        return Err(Error::config(format!(
            "{dims} exceeds 16-bit event coordinates"
        )));
    }
    Ok(())
}

fn check_normalized(stream: &EventStream) -> Result<()> {
    for (i, r) in stream.records().iter().enumerate() {
        if !(0.0..=1.0).contains(&r.t) {
            return Err(Error::parse(
                format!("record {i}"),
                format!("timestamp {} outside [0, 1]", r.t),
            ));
        }
    }
    Ok(())
}

/// Half-open bin `b` with `b/B <= t < (b+1)/B`; `t = 1` goes to the last bin.
pub fn discrete_bin(t: f64, bins: usize) -> usize {
    let b_f = bins as f64;
    if t >= 1.0 {
        return bins - 1;
    }
    let mut b = ((t * b_f).floor().max(0.0) as usize).min(bins - 1);
    // correct for rounding in t * B against the boundaries b / B
    while b > 0 && t < b as f64 / b_f {
        b -= 1;
    }
    while b + 1 < bins && t >= (b + 1) as f64 / b_f {
        b += 1;
    }
    b
}

/// Sum of polarities per time bin.
pub fn discrete_voxel_from_events(stream: &EventStream, bins: usize) -> Result<DiscreteVoxel> {
    if bins == 0 {
        return Err(Error::config("voxel needs at least one bin"));
    }
    check_normalized(stream)?;
    let dims = stream.dims();
    let mut voxel = DiscreteVoxel::zeros(bins, dims)?;
    for r in stream.records() {
        let b = discrete_bin(r.t, bins);
        voxel.bin_mut(b)[dims.index(r.x as usize, r.y as usize)] += i32::from(r.p);
    }
    Ok(voxel)
}

/// Polarity split linearly between the two bins nearest to `(B - 1) t`.
pub fn interpolated_voxel_from_events(
    stream: &EventStream,
    bins: usize,
) -> Result<InterpolatedVoxel> {
    if bins < 2 {
        return Err(Error::config(format!(
            "interpolated voxels need at least 2 bins, got {bins}"
        )));
    }
    check_normalized(stream)?;
    let dims = stream.dims();
    let plane = dims.len();
    let mut voxel = InterpolatedVoxel::zeros(bins, dims)?;
    let data = voxel.data_mut();
    for r in stream.records() {
        let pos = (bins - 1) as f64 * r.t;
        let lower = (pos.floor() as usize).min(bins - 1);
        let upper_weight = pos - lower as f64;
        let p = f64::from(r.p);
        let pixel = dims.index(r.x as usize, r.y as usize);
        data[lower * plane + pixel] += p * (1.0 - upper_weight);
        if upper_weight > 0.0 {
            data[(lower + 1) * plane + pixel] += p * upper_weight;
        }
    }
    Ok(voxel)
}

/// Net polarity per pixel over `t1 <= t < t2`.
pub fn event_stack(stream: &EventStream, t1: f64, t2: f64) -> Result<Grid<i32>> {
    // negated so NaN bounds are rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(t1 < t2) {
        return Err(Error::config(format!(
            "event window needs t1 < t2, got [{t1}, {t2})"
        )));
    }
    let dims = stream.dims();
    let mut out = vec![0i32; dims.len()];
    let records = stream.records();
    let start = records.partition_point(|r| r.t < t1);
    for r in records[start..].iter().take_while(|r| r.t < t2) {
        out[dims.index(r.x as usize, r.y as usize)] += i32::from(r.p);
    }
    Grid::from_vec(dims, out)
}

/// Events with `t0 <= t <= t1`, timestamps mapped affinely onto `[0, 1]`.
///
/// When `closed_end` is false the window is `[t0, t1)`.
pub fn normalize_window(
    stream: &EventStream,
    t0: f64,
    t1: f64,
    closed_end: bool,
) -> Result<EventStream> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::config(format!(
            "event window needs t0 < t1, got [{t0}, {t1}]"
        )));
    }
    let span = t1 - t0;
    let records = stream
        .records()
        .iter()
        .filter(|r| r.t >= t0 && (r.t < t1 || (closed_end && r.t == t1)))
        .map(|r| EventRecord::new(((r.t - t0) / span).clamp(0.0, 1.0), r.x, r.y, r.p))
        .collect();
    EventStream::new(stream.dims(), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1() -> Dims {
        Dims::new(1, 1).unwrap()
    }

    fn ramp(from: f64, to: f64) -> Vec<LogLuminance> {
        vec![
            LogLuminance::from_vec(d1(), vec![from]).unwrap(),
            LogLuminance::from_vec(d1(), vec![to]).unwrap(),
        ]
    }

    fn stream(records: Vec<EventRecord>) -> EventStream {
        EventStream::new(Dims::new(2, 2).unwrap(), records).unwrap()
    }

    #[test]
    fn oracle_rising_ramp_crossing_times() {
        let p = SensorParams::ideal(0.1, 0.1, d1()).unwrap();
        let s = oracle_simulate_log(
            &ramp(0.0, 0.25),
            &p,
            &ResidualState::zeros(d1()),
            &SceneKey::new(0, 0, 0),
            0,
        )
        .unwrap();
        let got: Vec<_> = s.records().iter().map(|r| (r.t, r.p)).collect();
        assert_eq!(got.len(), 2);
        assert!((got[0].0 - 0.4).abs() < 1e-12 && got[0].1 == 1);
        assert!((got[1].0 - 0.8).abs() < 1e-12 && got[1].1 == 1);
    }

    #[test]
    fn oracle_falling_ramp_crossing_times() {
        let p = SensorParams::ideal(0.1, 0.1, d1()).unwrap();
        let s = oracle_simulate_log(
            &ramp(0.0, -0.25),
            &p,
            &ResidualState::zeros(d1()),
            &SceneKey::new(0, 0, 0),
            0,
        )
        .unwrap();
        let got: Vec<_> = s.records().iter().map(|r| (r.t, r.p)).collect();
        assert_eq!(got.len(), 2);
        assert!((got[0].0 - 0.4).abs() < 1e-12 && got[0].1 == -1);
        assert!((got[1].0 - 0.8).abs() < 1e-12 && got[1].1 == -1);
    }

    #[test]
    fn oracle_constant_frames_are_silent() {
        let d = Dims::new(3, 3).unwrap();
        let frames = vec![Frame::filled(d, 40); 4];
        let p = SensorParams::ideal(0.1, 0.1, d).unwrap();
        let s = oracle_simulate(
            &frames,
            &SimConfig::default(),
            &p,
            &ResidualState::zeros(d),
            &SceneKey::new(0, 0, 0),
            0,
        )
        .unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn oracle_crossing_on_frame_time_stays_in_its_interval() {
        // exactly two thresholds over the first interval
        let logs: Vec<_> = [0.0, 0.5, 0.5]
            .into_iter()
            .map(|v| LogLuminance::from_vec(d1(), vec![v]).unwrap())
            .collect();
        let p = SensorParams::ideal(0.25, 0.25, d1()).unwrap();
        let s = oracle_simulate_log(
            &logs,
            &p,
            &ResidualState::zeros(d1()),
            &SceneKey::new(0, 0, 0),
            0,
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.records()[1].t < 0.5);
        assert_eq!(discrete_voxel_from_events(&s, 2).unwrap().data(), &[2, 0]);
    }

    #[test]
    fn discrete_single_event() {
        let s = stream(vec![EventRecord::new(0.1, 0, 0, 1)]);
        let v = discrete_voxel_from_events(&s, 5).unwrap();
        assert_eq!(v.get(0, 0, 0), 1);
        assert_eq!(v.data().iter().map(|c| c.abs()).sum::<i32>(), 1);
    }

    #[test]
    fn discrete_empty_and_final_timestamp() {
        let v = discrete_voxel_from_events(&stream(vec![]), 5).unwrap();
        assert!(v.data().iter().all(|c| *c == 0));
        let v =
            discrete_voxel_from_events(&stream(vec![EventRecord::new(1.0, 1, 1, -1)]), 5).unwrap();
        assert_eq!(v.get(4, 1, 1), -1);
    }

    #[test]
    fn discrete_rejects_unnormalized_time() {
        let s = stream(vec![EventRecord::new(1.5, 0, 0, 1)]);
        assert!(discrete_voxel_from_events(&s, 5).is_err());
        assert!(interpolated_voxel_from_events(&s, 5).is_err());
    }

    #[test]
    fn bin_boundaries_follow_half_open_intervals() {
        for bins in 1..60usize {
            for b in 0..bins {
                let edge = b as f64 / bins as f64;
                assert_eq!(discrete_bin(edge, bins), b, "edge {b}/{bins}");
                if b > 0 {
                    assert_eq!(discrete_bin(edge.next_down(), bins), b - 1);
                }
            }
        }
    }

    #[test]
    fn interpolated_examples() {
        let v = interpolated_voxel_from_events(&stream(vec![EventRecord::new(0.0, 0, 0, 1)]), 5)
            .unwrap();
        assert_eq!(v.get(0, 0, 0), 1.0);
        let v = interpolated_voxel_from_events(&stream(vec![EventRecord::new(0.25, 0, 0, 1)]), 5)
            .unwrap();
        assert_eq!(v.get(1, 0, 0), 1.0);
        assert_eq!(v.get(2, 0, 0), 0.0);
        let v = interpolated_voxel_from_events(&stream(vec![EventRecord::new(0.3, 0, 0, -1)]), 5)
            .unwrap();
        assert!((v.get(1, 0, 0) + 0.8).abs() < 1e-12);
        assert!((v.get(2, 0, 0) + 0.2).abs() < 1e-12);
        assert!(interpolated_voxel_from_events(&stream(vec![]), 1).is_err());
    }

    #[test]
    fn stack_windows() {
        let s = stream(vec![
            EventRecord::new(0.1, 0, 0, 1),
            EventRecord::new(0.5, 0, 0, -1),
        ]);
        assert_eq!(event_stack(&s, 0.0, 0.3).unwrap().as_slice()[0], 1);
        assert_eq!(event_stack(&s, 0.0, 1.0).unwrap().as_slice()[0], 0);
        assert_eq!(event_stack(&s, 0.6, 0.9).unwrap().as_slice()[0], 0);
        assert!(event_stack(&s, 0.5, 0.5).is_err());
    }

    #[test]
    fn normalize_window_maps_to_unit_interval() {
        let s = stream(vec![
            EventRecord::new(10.0, 0, 0, 1),
            EventRecord::new(15.0, 1, 0, 1),
            EventRecord::new(20.0, 0, 1, -1),
        ]);
        let n = normalize_window(&s, 10.0, 20.0, true).unwrap();
        let ts: Vec<_> = n.records().iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_window(&s, 10.0, 20.0, false).unwrap().len(), 2);
    }
}
