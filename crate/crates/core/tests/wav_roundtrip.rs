use heartwarp::audio_io::{decode_wav, encode_wav, AudioClip, WavFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_clip(seed: u64, channels: usize, frames: usize) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioClip::new(
        44100,
        (0..channels)
            .map(|_| (0..frames).map(|_| rng.gen_range(-1.0f32..=1.0)).collect())
            .collect(),
    )
    .unwrap()
}

#[test]
fn silence_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let clip = AudioClip::mono(44100, vec![0.0; 44100]).unwrap();
    for format in [WavFormat::Pcm16, WavFormat::Float32] {
        let path = dir.path().join("s.wav");
        encode_wav(&clip, &path, format).unwrap();
        assert_eq!(decode_wav(&path).unwrap(), clip);
    }
}

#[test]
fn float_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.wav");
    let clip = random_clip(3, 2, 10_000);
    encode_wav(&clip, &path, WavFormat::Float32).unwrap();
    assert_eq!(decode_wav(&path).unwrap(), clip);
}

#[test]
fn pcm16_round_trip_within_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.wav");
    let mut clip = random_clip(4, 2, 10_000);
    // include both full-scale extremes
    let mut chans = clip.channels().to_vec();
    chans[0][0] = 1.0;
    chans[0][1] = -1.0;
    clip = AudioClip::new(44100, chans).unwrap();
    encode_wav(&clip, &path, WavFormat::Pcm16).unwrap();
    let back = decode_wav(&path).unwrap();
    assert_eq!(back.len_frames(), clip.len_frames());
    let max_err = clip
        .channels()
        .iter()
        .zip(back.channels())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0f32, f32::max);
    assert!(max_err <= 1.0 / 32768.0, "{max_err}");
    assert_eq!(back.channel(0)[1], -1.0);
}
