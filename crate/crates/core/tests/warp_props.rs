use heartwarp::audio_io::AudioClip;
use heartwarp::warp::{
    frames_to_consume, render_constant, render_offline, warp_chunk, WarpError, WarpState,
};
use proptest::prelude::*;

/// Frame `i` holds `i + 1`, so every non-zero output names its source frame.
fn ramp_clip(len: usize) -> AudioClip {
    AudioClip::mono(44100, (1..=len).map(|i| i as f32).collect()).unwrap()
}

fn source_index(x: f32) -> Option<usize> {
    (x != 0.0).then(|| x as usize - 1)
}

/// Counts chunks by stepping an integer cursor, independent of the renderer.
fn expected_chunks(len: usize, n: usize, tempo: f64) -> usize {
    let m = (n as f64 * tempo + 0.5).floor() as usize;
    let (mut pos, mut chunks) = (0usize, 0usize);
    while pos < len {
        pos += m;
        chunks += 1;
    }
    chunks
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn single_chunk_invariants(
        n in 1usize..600,
        tempo in 0.05f64..4.0,
        len in 1usize..4000,
        start_frac in 0.0f64..1.0,
    ) {
        let clip = ramp_clip(len);
        let pos = ((len as f64) * start_frac) as usize % len;
        let mut state = WarpState { src_pos: pos, chunk_frames: n, finished: false };
        let m = match frames_to_consume(n, tempo) {
            Ok(m) => m,
            Err(e) => {
                prop_assert_eq!(e, WarpError::InvalidTempo(tempo));
                prop_assert!(n as f64 * tempo < 0.5);
                return Ok(());
            }
        };
        prop_assert_eq!(m, (n as f64 * tempo).round() as usize);
        let chunk = warp_chunk(&clip, &mut state, tempo).unwrap();
        let out = &chunk.channels()[0];
        let end = (pos + m).min(len);

        prop_assert_eq!(out.len(), n);
        prop_assert_eq!(state.src_pos, end);
        prop_assert_eq!(state.finished, end == len);

        // every output frame is silence or a consumed frame, in source order
        let idx: Vec<usize> = out.iter().filter_map(|&x| source_index(x)).collect();
        prop_assert!(idx.iter().all(|&i| i >= pos && i < end));
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1] || (m >= n && w[0] <= w[1])));

        if m >= n {
            // speedup: silence only as tail padding, none with a full window
            let avail = out.iter().take_while(|&&x| x != 0.0).count();
            prop_assert!(out[avail..].iter().all(|&x| x == 0.0));
            if end - pos == m {
                prop_assert_eq!(avail, n);
            }
        } else {
            // slowdown: every consumed frame appears exactly once
            prop_assert_eq!(idx, (pos..end).collect::<Vec<_>>());
        }
    }

    #[test]
    fn duration_follows_the_frame_count(
        n in 1usize..2048,
        tempo in 0.25f64..3.0,
        len in 1usize..50_000,
    ) {
        let clip = ramp_clip(len);
        let out = render_constant(&clip, tempo, n).unwrap();
        let chunks = expected_chunks(len, n, tempo);
        prop_assert_eq!(out.len_frames(), chunks * n);
        let m = frames_to_consume(n, tempo).unwrap();
        prop_assert!((out.len_frames() as f64 - len as f64 * n as f64 / m as f64).abs() <= n as f64);
    }

    #[test]
    fn unit_tempo_is_identity(len in 1usize..20_000, n in 1usize..2048) {
        let clip = ramp_clip(len);
        let out = render_constant(&clip, 1.0, n).unwrap();
        prop_assert_eq!(&out.channel(0)[..len], clip.channel(0));
        prop_assert!(out.channel(0)[len..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn varying_tempo_conserves_order(
        tempos in prop::collection::vec(0.3f64..2.5, 1..80),
        len in 1usize..30_000,
    ) {
        let clip = ramp_clip(len);
        let out = render_offline(&clip, tempos.iter().copied(), 256).unwrap();
        let idx: Vec<usize> = out.channel(0).iter().filter_map(|&x| source_index(x)).collect();
        prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(out.len_frames() % 256, 0);
        prop_assert!(out.len_frames() / 256 <= tempos.len());
    }
}

#[test]
fn ten_seconds_at_1_25_lasts_eight_seconds() {
    let clip = AudioClip::mono(44100, vec![0.25; 441_000]).unwrap();
    let out = render_constant(&clip, 1.25, 1024).unwrap();
    assert!((out.len_frames() as i64 - 352_800).abs() <= 1024);
    assert_eq!(
        out.len_frames(),
        expected_chunks(441_000, 1024, 1.25) * 1024
    );
}

#[test]
fn stereo_channels_warp_alike() {
    let left: Vec<f32> = (1..=5000).map(|i| i as f32).collect();
    let right: Vec<f32> = left.iter().map(|x| -x).collect();
    let clip = AudioClip::new(48000, vec![left, right]).unwrap();
    for tempo in [0.5, 0.8, 1.0, 1.25, 1.5] {
        let out = render_constant(&clip, tempo, 300).unwrap();
        let (l, r) = (out.channel(0), out.channel(1));
        assert!(l.iter().zip(r).all(|(a, b)| *a == -*b));
    }
}

#[test]
fn finished_source_rejects_further_chunks() {
    let clip = ramp_clip(100);
    let mut state = WarpState::new(64).unwrap();
    warp_chunk(&clip, &mut state, 2.0).unwrap();
    assert!(state.finished);
    assert_eq!(
        warp_chunk(&clip, &mut state, 1.0),
        Err(WarpError::AlreadyFinished)
    );
}
