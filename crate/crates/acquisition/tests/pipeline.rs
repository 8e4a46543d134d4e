use std::thread;
use std::time::{Duration, Instant};

use peeg_acquisition::{
    AcquisitionError, CodeMode, Overflow, Pacing, Pipeline, PipelineConfig, ReplayBackend,
    ReplayChunk, ReplaySource, SampleBlock, SimulatorBackend,
};
use peeg_ads1299::{addr, code_to_microvolts, ConversionParams, DataRate, Gain, RegisterFile, CHANNELS};
use peeg_synth::{fig6_scenario, Scenario};

fn unpaced(block_len: usize) -> PipelineConfig {
    PipelineConfig {
        block_len,
        pacing: Pacing::Unpaced,
        ..Default::default()
    }
}

fn simulator(s: Scenario) -> Box<SimulatorBackend> {
    Box::new(SimulatorBackend::new(s).unwrap())
}

fn drain(sub: peeg_acquisition::Subscription) -> Vec<SampleBlock> {
    sub.collect()
}

#[test]
fn fig6_yields_thirty_one_second_blocks() {
    let p = Pipeline::new(simulator(fig6_scenario()), RegisterFile::default(), unpaced(250)).unwrap();
    let sub = p.subscribe_with(8, Overflow::Block).unwrap();
    p.start().unwrap();
    let blocks = drain(sub);
    p.wait().unwrap();
    assert_eq!(blocks.len(), 30);
    for (i, b) in blocks.iter().enumerate() {
        assert_eq!(b.seq, i as u64);
        assert_eq!(b.len(), 250);
        assert_eq!(b.dropped_before, 0);
        assert_eq!(b.fs, 250);
        assert_eq!(b.t0_ns, i as u64 * 1_000_000_000);
    }
    let stats = p.stats();
    assert_eq!(stats.produced, 7500);
    assert_eq!(stats.produced_blocks, 30);
    assert_eq!(stats.dropped, 0);
}

#[test]
fn codes_convert_under_block_gains() {
    let p = Pipeline::new(simulator(fig6_scenario()), RegisterFile::default(), unpaced(125)).unwrap();
    let sub = p.subscribe_with(4, Overflow::Block).unwrap();
    p.start().unwrap();
    for b in sub.take(5) {
        for c in 0..CHANNELS {
            let params = ConversionParams::new(b.vref, b.gains[c]).unwrap();
            for (uv, code) in b.channel(c).iter().zip(b.channel_codes(c)) {
                assert_eq!(*uv, code_to_microvolts(*code, &params));
            }
        }
    }
}

#[test]
fn second_start_is_rejected() {
    let p = Pipeline::new(simulator(fig6_scenario()), RegisterFile::default(), unpaced(250)).unwrap();
    p.start().unwrap();
    assert!(matches!(p.start(), Err(AcquisitionError::AlreadyRunning)));
    p.wait().unwrap();
    assert!(matches!(p.start(), Err(AcquisitionError::AlreadyRunning)));
}

#[test]
fn idle_stats_are_zero() {
    let p = Pipeline::new(simulator(fig6_scenario()), RegisterFile::default(), unpaced(25)).unwrap();
    let _sub = p.subscribe(4).unwrap();
    let s = p.stats();
    assert_eq!((s.produced, s.dropped, s.jitter_ns), (0, 0, 0));
    assert_eq!(s.subscriber_lag, vec![0]);
}

#[test]
fn subscribe_after_close() {
    let p = Pipeline::new(simulator(fig6_scenario()), RegisterFile::default(), unpaced(25)).unwrap();
    p.close();
    assert!(matches!(p.subscribe(4), Err(AcquisitionError::PipelineClosed)));
}

#[test]
fn subscribe_after_natural_end_sees_end_of_stream() {
    let s = Scenario::new(1.0, 250, 1, 5.0);
    let p = Pipeline::new(simulator(s), RegisterFile::default(), unpaced(25)).unwrap();
    p.start().unwrap();
    p.wait().unwrap();
    let sub = p.subscribe(4).unwrap();
    assert!(sub.recv().is_none());
}

#[test]
fn block_len_bounds() {
    for bad in [0, 251] {
        assert!(matches!(
            Pipeline::new(simulator(fig6_scenario()), RegisterFile::default(), unpaced(bad)),
            Err(AcquisitionError::InvalidBlockLen { .. })
        ));
    }
}

#[test]
fn rate_mismatch_is_reported_at_start() {
    let rf = RegisterFile::default().with_data_rate(DataRate::from_sps(500).unwrap()).unwrap();
    let p = Pipeline::new(simulator(fig6_scenario()), rf, unpaced(25)).unwrap();
    assert!(matches!(p.start(), Err(AcquisitionError::RateMismatch { .. })));
}

fn replay_source(seconds: usize, gains_per_chunk: &[(usize, Gain)]) -> ReplaySource {
    let mut chunks = Vec::new();
    let mut n = 0i32;
    for &(len, gain) in gains_per_chunk {
        let frames = (0..len)
            .map(|_| {
                n += 1;
                std::array::from_fn(|c| n * 8 + c as i32)
            })
            .collect();
        chunks.push(ReplayChunk {
            gains: [gain; CHANNELS],
            frames,
        });
    }
    let source = ReplaySource {
        fs: 250,
        vref: 4.5,
        chunks,
    };
    assert_eq!(source.sample_count(), seconds * 250);
    source
}

#[test]
fn replay_ten_seconds_in_fifty_blocks() {
    let source = replay_source(10, &[(2500, Gain::X24)]);
    let backend = ReplayBackend::new(source, 50).unwrap();
    let p = Pipeline::new(Box::new(backend), RegisterFile::default(), unpaced(50)).unwrap();
    let sub = p.subscribe_with(4, Overflow::Block).unwrap();
    p.start().unwrap();
    let blocks = drain(sub);
    assert_eq!(blocks.len(), 50);
    assert_eq!(blocks.iter().map(|b| b.seq).collect::<Vec<_>>(), (0..50).collect::<Vec<_>>());
    assert_eq!(blocks[0].channel_codes(3)[0], 8 + 3);
}

#[test]
fn replay_follows_recorded_gain_epochs() {
    let source = replay_source(4, &[(500, Gain::X24), (500, Gain::X1)]);
    let backend = ReplayBackend::new(source, 50).unwrap();
    let p = Pipeline::new(Box::new(backend), RegisterFile::default(), unpaced(50)).unwrap();
    let sub = p.subscribe_with(4, Overflow::Block).unwrap();
    p.start().unwrap();
    let blocks = drain(sub);
    assert_eq!(blocks.len(), 20);
    assert!(blocks[..10].iter().all(|b| b.gains == [Gain::X24; CHANNELS]));
    assert!(blocks[10..].iter().all(|b| b.gains == [Gain::X1; CHANNELS]));
    assert!(blocks[10].epoch > blocks[9].epoch);
}

#[test]
fn replay_rejects_misaligned_blocks_and_writes() {
    let source = replay_source(4, &[(510, Gain::X24), (490, Gain::X1)]);
    assert!(matches!(
        ReplayBackend::new(source.clone(), 50),
        Err(AcquisitionError::InvalidBlockLen { .. })
    ));
    let backend = ReplayBackend::new(source, 10).unwrap();
    let p = Pipeline::new(Box::new(backend), RegisterFile::default(), unpaced(10)).unwrap();
    assert!(matches!(
        p.write_register(addr::CH1SET, 0x00),
        Err(AcquisitionError::Unsupported(_))
    ));
}

fn realtime(block_len: usize) -> PipelineConfig {
    PipelineConfig {
        block_len,
        pacing: Pacing::RealTime,
        ..Default::default()
    }
}

#[test]
fn slow_subscriber_drops_with_exact_accounting() {
    let s = Scenario::new(4.0, 250, 3, 5.0);
    let p = Pipeline::new(simulator(s), RegisterFile::default(), realtime(25)).unwrap();
    let sub = p.subscribe(4).unwrap();
    p.start().unwrap();
    let mut received = 0u64;
    let mut dropped = 0u64;
    let mut last_seq = None;
    let mut first = true;
    while let Some(b) = sub.recv() {
        if first {
            thread::sleep(Duration::from_secs(2));
            first = false;
        }
        assert!(last_seq.map_or(true, |s| b.seq > s));
        last_seq = Some(b.seq);
        received += b.len() as u64;
        dropped += b.dropped_before;
    }
    p.wait().unwrap();
    let stats = p.stats();
    assert!(dropped > 0);
    assert_eq!(received + dropped, stats.produced);
    assert_eq!(stats.produced, 1000);
    assert!(stats.jitter_ns < 5_000_000, "jitter {} ns", stats.jitter_ns);
}

#[test]
fn stalled_subscriber_does_not_disturb_others() {
    let s = Scenario::new(3.0, 250, 4, 5.0);
    let p = Pipeline::new(simulator(s), RegisterFile::default(), realtime(25)).unwrap();
    let stalled = p.subscribe(2).unwrap();
    let fast = p.subscribe(16).unwrap();
    let started = Instant::now();
    p.start().unwrap();
    let mut arrivals = Vec::new();
    while let Some(b) = fast.recv() {
        assert_eq!(b.dropped_before, 0);
        arrivals.push(Instant::now());
    }
    assert_eq!(arrivals.len(), 30);
    // 3 s of data at real time
    let elapsed = started.elapsed().as_secs_f64();
    assert!((elapsed - 3.0).abs() < 0.3, "{elapsed}");
    let gaps: Vec<f64> = arrivals.windows(2).map(|w| (w[1] - w[0]).as_secs_f64()).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!((mean - 0.1).abs() < 0.01, "{mean}");
    let st = stalled.stats();
    assert_eq!(st.offered, st.delivered + st.dropped + st.backlog);
    assert_eq!(st.backlog_blocks, 2);
    assert_eq!(st.offered, 750);
}

/// Renders a scenario through a pipeline, optionally writing CH1SET after `after_blocks`.
fn run_fixed_codes(write_after: Option<usize>) -> Vec<SampleBlock> {
    let s = Scenario::new(3.0, 250, 9, 20.0);
    let backend = SimulatorBackend::new(s).unwrap().with_code_mode(CodeMode::Fixed(Gain::X24));
    let p = Pipeline::new(Box::new(backend), RegisterFile::default(), realtime(25)).unwrap();
    let sub = p.subscribe(64).unwrap();
    p.start().unwrap();
    let mut blocks = Vec::new();
    while let Some(b) = sub.recv() {
        blocks.push(b);
        if Some(blocks.len()) == write_after {
            let rf = p.register_file();
            let value = rf.chset_with_gain(0, Gain::X1);
            let ack = p.write_register(addr::CH1SET, value).unwrap();
            assert_eq!(ack.epoch, 1);
        }
    }
    blocks
}

#[test]
fn gain_change_takes_effect_on_a_block_boundary() {
    let reference = run_fixed_codes(None);
    let changed = run_fixed_codes(Some(5));
    assert_eq!(reference.len(), changed.len());
    let boundary = changed.iter().position(|b| b.epoch == 1).expect("epoch advanced");
    assert!(boundary >= 5);
    for (i, (a, b)) in reference.iter().zip(&changed).enumerate() {
        assert_eq!(a.codes, b.codes, "identical codes in block {i}");
        if i < boundary {
            assert_eq!(b.gains[0], Gain::X24);
            assert_eq!(a.channel(0), b.channel(0));
        } else {
            assert_eq!(b.gains[0], Gain::X1);
            for (post, pre) in b.channel(0).iter().zip(a.channel(0)) {
                assert_eq!(post / 24.0, *pre);
                assert_eq!(*post, 24.0 * pre);
            }
            // other channels untouched
            assert_eq!(a.channel(1), b.channel(1));
        }
    }
}

#[test]
fn rate_write_is_refused_without_disrupting_the_stream() {
    let s = Scenario::new(2.0, 250, 5, 5.0);
    let p = Pipeline::new(simulator(s), RegisterFile::default(), realtime(25)).unwrap();
    let sub = p.subscribe(64).unwrap();
    p.start().unwrap();
    let first = sub.recv().unwrap();
    let rf = p.register_file();
    let faster = rf.config1_with_rate(DataRate::from_sps(500).unwrap());
    assert!(matches!(
        p.write_register(addr::CONFIG1, faster),
        Err(AcquisitionError::Unsupported(_))
    ));
    assert!(matches!(
        p.write_register(addr::CH1SET, 0x70),
        Err(AcquisitionError::Register(_))
    ));
    let rest: Vec<SampleBlock> = sub.collect();
    assert_eq!(1 + rest.len(), 20);
    assert!(rest.iter().all(|b| b.epoch == first.epoch && b.fs == 250));
}

#[test]
fn idle_writes_update_the_pending_configuration() {
    let p = Pipeline::new(simulator(fig6_scenario()), RegisterFile::default(), unpaced(250)).unwrap();
    let value = p.register_file().chset_with_gain(2, Gain::X6);
    p.write_register(addr::chset(2), value).unwrap();
    assert_eq!(p.read_register(addr::chset(2)).unwrap(), value);
    let sub = p.subscribe_with(4, Overflow::Block).unwrap();
    p.start().unwrap();
    assert_eq!(sub.recv().unwrap().gains[2], Gain::X6);
}

#[test]
fn high_rate_stream_keeps_up() {
    let rf = RegisterFile::default().with_data_rate(DataRate::from_sps(16000).unwrap()).unwrap();
    let s = Scenario::new(1.0, 16000, 2, 5.0);
    let p = Pipeline::new(simulator(s), rf, realtime(160)).unwrap();
    let sub = p.subscribe(64).unwrap();
    p.start().unwrap();
    let blocks: Vec<SampleBlock> = sub.collect();
    assert_eq!(blocks.len(), 100);
    assert!(blocks.iter().all(|b| b.dropped_before == 0));
}
