use simba_core::nets::{evaluate, Variant};
use simba_core::rl::{Agent, Algo, NetConfig, TrainConfig, Trainer};
use simba_core::rng::{normal, rng_from_seed};
use simba_core::Tensor;
use simba_lab::checkpoint::{restore, snapshot, Archive};
use simba_lab::{make_env, LabError};

fn tiny(algo: Algo) -> TrainConfig {
    TrainConfig {
        algo,
        actor: NetConfig { variant: Variant::Simba, num_blocks: 1, hidden_dim: 8, lr: 1e-3 },
        critic: NetConfig { variant: Variant::Simba, num_blocks: 1, hidden_dim: 16, lr: 1e-3 },
        batch_size: 16,
        warmup_steps: 50,
        clipped_double_q: true,
        ..TrainConfig::default()
    }
}

fn trained(algo: Algo) -> Trainer<simba_lab::LabEnv> {
    let mut t = Trainer::new(make_env(2, 5).unwrap(), tiny(algo), 5).unwrap();
    t.run(120).unwrap();
    t
}

fn inputs(n: usize, d: usize) -> Tensor {
    let mut rng = rng_from_seed(42);
    Tensor::new(vec![n, d], (0..n * d).map(|_| normal(&mut rng)).collect()).unwrap()
}

fn bits(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|x| x.to_bits()).collect()
}

#[test]
fn save_load_save_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    for algo in [Algo::Sac, Algo::Ddpg] {
        let t = trained(algo);
        let a = snapshot(t.agent(), t.normalizer());
        let p1 = dir.path().join("a.bin");
        let p2 = dir.path().join("b.bin");
        a.save(&p1).unwrap();
        let b = Archive::load(&p1).unwrap();
        b.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(a.entries.len(), b.entries.len());
        for ((na, ta), (nb, tb)) in a.entries.iter().zip(&b.entries) {
            assert_eq!(na, nb);
            assert_eq!(ta.shape(), tb.shape());
            assert_eq!(bits(ta), bits(tb), "{na}");
        }
    }
}

#[test]
fn restored_agent_forward_is_bitwise_identical() {
    for algo in [Algo::Sac, Algo::Ddpg] {
        let t = trained(algo);
        let bytes = snapshot(t.agent(), t.normalizer()).to_bytes();
        let archive = Archive::from_bytes(&bytes, std::path::Path::new("mem")).unwrap();

        let obs_dim = t.normalizer().dim();
        let mut fresh = Agent::new(t.config(), obs_dim, 1, 999).unwrap();
        let stats = restore(&archive, &mut fresh).unwrap();
        assert_eq!(&stats, t.normalizer().stats());

        let x = inputs(7, obs_dim);
        let a = t.agent().actor();
        let b = fresh.actor();
        assert_eq!(bits(&evaluate(&a.spec, &a.params, &x).unwrap()), bits(&evaluate(&b.spec, &b.params, &x).unwrap()));
        let xa = inputs(7, obs_dim + 1);
        let a = t.agent().critic();
        let b = fresh.critic();
        assert_eq!(bits(&evaluate(&a.spec, &a.params, &xa).unwrap()), bits(&evaluate(&b.spec, &b.params, &xa).unwrap()));
        assert_eq!(a.opt.step, b.opt.step);
        assert_eq!(t.agent().alpha().map(f64::to_bits), fresh.alpha().map(f64::to_bits));

        // a second snapshot of the restored agent reproduces the archive
        assert_eq!(snapshot(&fresh, t.normalizer()).to_bytes(), bytes);
    }
}

#[test]
fn corruption_is_detected() {
    let t = trained(Algo::Sac);
    let bytes = snapshot(t.agent(), t.normalizer()).to_bytes();
    let path = std::path::Path::new("mem");

    for at in [9, bytes.len() / 2, bytes.len() - 1] {
        let mut bad = bytes.clone();
        bad[at] ^= 0x10;
        let err = Archive::from_bytes(&bad, path).unwrap_err();
        assert!(matches!(err, LabError::Corrupt { .. }), "byte {at}: {err}");
        assert_eq!(err.exit_code(), 3);
    }
    let err = Archive::from_bytes(&bytes[..bytes.len() - 9], path).unwrap_err();
    assert!(matches!(err, LabError::Corrupt { .. }));
    let err = Archive::from_bytes(b"NOTACHECKPOINT", path).unwrap_err();
    assert!(matches!(err, LabError::Corrupt { .. }));
}

#[test]
fn missing_file_is_an_io_error() {
    let err = Archive::load(std::path::Path::new("/nonexistent/checkpoint.bin")).unwrap_err();
    assert!(matches!(err, LabError::Io { .. }));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn missing_entry_is_reported() {
    let t = trained(Algo::Sac);
    let mut a = snapshot(t.agent(), t.normalizer());
    a.entries.retain(|(n, _)| n != "log_alpha");
    let mut fresh = Agent::new(t.config(), t.normalizer().dim(), 1, 1).unwrap();
    assert!(restore(&a, &mut fresh).is_err());
}
