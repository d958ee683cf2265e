use std::collections::VecDeque;

use hrlnav::replay::{ReplayBuffer, ReplayError, Transition};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tr(tag: f64) -> Transition<usize> {
    Transition { obs: vec![tag, -tag], action: tag as usize % 7, reward: tag * 0.5, next_obs: vec![tag + 1.0, 0.0], done: tag as u64 % 3 == 0, steps: 1 + tag as u32 % 4 }
}

#[test]
fn sampling_is_uniform_over_stored_slots() {
    let mut buf = ReplayBuffer::new(32, 2).unwrap();
    // Wrap the ring so the sampled slots mix old and new writes.
    for i in 0..50 {
        buf.push(tr(i as f64)).unwrap();
    }
    let n = buf.len();
    let mut counts = vec![0u64; n];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 100_000;
    for _ in 0..draws / 25 {
        for i in buf.sample_indices(25, &mut rng).unwrap() {
            counts[i] += 1;
        }
    }
    let expected = draws as f64 / n as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // Upper 1% point of chi-squared with 31 degrees of freedom.
    assert!(chi2 < 52.191, "chi2 {chi2}");
}

#[test]
fn underfull_and_dimension_errors() {
    let mut buf: ReplayBuffer<usize> = ReplayBuffer::new(4, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(buf.sample_indices(1, &mut rng), Err(ReplayError::Underfull { requested: 1, size: 0 }));
    buf.push(tr(1.0)).unwrap();
    assert!(buf.sample(2, &mut rng).is_err());
    let mut bad = tr(2.0);
    bad.next_obs.push(0.0);
    assert_eq!(buf.push(bad), Err(ReplayError::Dimension { expected: 2, got: 3 }));
    assert!(ReplayBuffer::<usize>::new(0, 2).is_err());
}

#[test]
fn snapshot_rejects_tampering() {
    let mut buf = ReplayBuffer::new(3, 2).unwrap();
    buf.push(tr(1.0)).unwrap();
    let snap = buf.snapshot();
    let mut wrong_len = snap.clone();
    wrong_len.pop();
    assert!(ReplayBuffer::<usize>::from_snapshot(&wrong_len).is_err());
    let mut wrong_done = snap.clone();
    let done_at = snap.len() - 2;
    wrong_done[done_at] = 0.5;
    assert!(ReplayBuffer::<usize>::from_snapshot(&wrong_done).is_err());
    assert!(ReplayBuffer::<[f64; 2]>::from_snapshot(&snap).is_err());
}

proptest! {
    #[test]
    fn ring_buffer_matches_bounded_deque(capacity in 1usize..20, pushes in 0usize..80) {
        let mut buf = ReplayBuffer::new(capacity, 2).unwrap();
        let mut model: VecDeque<Transition<usize>> = VecDeque::new();
        for i in 0..pushes {
            let t = tr(i as f64);
            buf.push(t.clone()).unwrap();
            if model.len() == capacity {
                model.pop_front();
            }
            model.push_back(t);
            prop_assert_eq!(buf.len(), model.len());
        }
        let ours: Vec<_> = buf.iter_oldest_first().cloned().collect();
        let theirs: Vec<_> = model.into_iter().collect();
        prop_assert_eq!(ours, theirs);
    }

    #[test]
    fn snapshot_round_trip_samples_identically(capacity in 1usize..16, pushes in 1usize..40, seed: u64) {
        let mut buf = ReplayBuffer::new(capacity, 2).unwrap();
        for i in 0..pushes {
            buf.push(tr(i as f64)).unwrap();
        }
        let mut copy = ReplayBuffer::<usize>::from_snapshot(&buf.snapshot()).unwrap();
        let batch = buf.len().min(5);
        let a = buf.sample(batch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().into_iter().cloned().collect::<Vec<_>>();
        let b = copy.sample(batch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().into_iter().cloned().collect::<Vec<_>>();
        prop_assert_eq!(a, b);
        // The write cursor survives too: the next push evicts the same slot.
        buf.push(tr(1000.0)).unwrap();
        copy.push(tr(1000.0)).unwrap();
        prop_assert!(buf.iter_oldest_first().eq(copy.iter_oldest_first()));
    }
}
