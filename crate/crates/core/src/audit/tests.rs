use super::*;
use crate::codec::Topology;
use crate::field::FieldMatrix;
use crate::poly::EvalPoints;

fn params(q: u64, n: usize, k: usize, s: usize, x: usize) -> ProtocolParams {
    let f = PrimeField::new(q).unwrap();
    let topo = Topology {
        workers: n,
        blocks: k,
        sources: s,
        privacy: x,
        byzantine: 0,
        stragglers: 0,
    };
    ProtocolParams::new(f, topo, (1, 1), (1, 1), 1).unwrap()
}

fn encoding_only(q: u64, s: usize, k: usize, betas: &[u64], alphas: &[u64]) -> ProtocolParams {
    let f = PrimeField::new(q).unwrap();
    let pts = EvalPoints::new(
        f,
        k,
        betas.iter().map(|&b| f.reduce(b)).collect(),
        alphas.iter().map(|&a| f.reduce(a)).collect(),
    )
    .unwrap();
    ProtocolParams::for_encoding(s, pts, (1, 1), (1, 1)).unwrap()
}

#[test]
fn subset_enumeration() {
    assert_eq!(
        subsets(4, 2),
        vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
    );
    assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
    assert!(subsets(2, 3).is_empty());
    for (n, k) in [(6, 2), (10, 3), (8, 4), (5, 5)] {
        assert_eq!(subsets(n, k).len() as u64, binomial(n as u64, k as u64));
    }
    assert_eq!(binomial(10, 3), 120);
    assert_eq!(binomial(3, 5), 0);
}

// l_j(a) straight from the product formula, inverses by search
fn basis(q: u64, betas: &[u64], j: usize, a: u64) -> u64 {
    let inv = |v: u64| (1..q).find(|c| c * v % q == 1).unwrap();
    betas
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != j)
        .fold(1, |acc, (_, &bl)| {
            acc * ((a + q - bl) % q) % q * inv((betas[j] + q - bl) % q) % q
        })
}

#[test]
fn cauchy_q17_all_pairs() {
    let p = params(17, 6, 2, 1, 2);
    let report = check_cauchy_all_subsets(&p).unwrap();
    assert_eq!(report.subsets_checked, 15);
    assert!(report.passed());
    // independent 2x2 determinants
    let (betas, alphas) = (p.points().betas(), p.points().alphas());
    for s in subsets(6, 2) {
        let e = |r: usize, c: usize| basis(17, betas, 2 + c, alphas[s[r]]);
        let det = (e(0, 0) * e(1, 1) + 17 * 17 - e(0, 1) * e(1, 0)) % 17;
        assert_ne!(det, 0, "{s:?}");
    }
}

#[test]
fn cauchy_q257_triples() {
    let report = check_cauchy_all_subsets(&params(257, 10, 2, 1, 3)).unwrap();
    assert_eq!(report.subsets_checked, 120);
    assert!(report.passed());
}

#[test]
fn cauchy_single_colluder_entries_nonzero() {
    let p = params(101, 8, 3, 1, 1);
    assert!(check_cauchy_all_subsets(&p).unwrap().passed());
    let betas = p.points().betas();
    assert!(p.points().alphas().iter().all(|&a| basis(101, betas, 3, a) != 0));
}

#[test]
fn cauchy_detects_broken_layouts() {
    let f = PrimeField::new(17).unwrap();
    // a worker point on a data node zeroes its mask row
    let r = check_cauchy_points(f, &[1, 2, 3, 4], 2, &[1, 5, 6]).unwrap();
    assert_eq!(r.singular, vec![vec![0, 1], vec![0, 2]]);
    // two workers on the same point
    let r = check_cauchy_points(f, &[1, 2, 3, 4], 2, &[5, 5, 6]).unwrap();
    assert_eq!(r.singular, vec![vec![0, 1]]);
    // a worker point on a mask node exposes that mask but stays invertible
    let r = check_cauchy_points(f, &[1, 2, 3, 4], 2, &[3, 5, 6]).unwrap();
    assert!(r.passed());
    assert!(matches!(
        check_cauchy_points(f, &[1, 2, 3, 4, 5, 6, 7], 2, &(8..70).collect::<Vec<_>>()),
        Err(AuditError::Infeasible { .. })
    ));
}

#[test]
fn sums_of_uniforms_exhaustive() {
    let r = check_sum_uniform_exhaustive(PrimeField::new(5).unwrap(), 2).unwrap();
    assert_eq!(r.counts, vec![5; 5]);
    assert!(r.passed);
    let r = check_sum_uniform_exhaustive(PrimeField::new(7).unwrap(), 3).unwrap();
    assert_eq!(r.counts, vec![49; 7]);
    assert!(r.passed);
    let r = check_sum_uniform_exhaustive(PrimeField::new(7).unwrap(), 1).unwrap();
    assert_eq!(r.counts, vec![1; 7]);
    assert!(check_sum_uniform_exhaustive(PrimeField::mersenne31(), 2).is_err());
}

#[test]
fn sums_of_uniforms_sampled() {
    let r = check_sum_uniform_sampled(PrimeField::mersenne31(), 3, 50_000, 1, 0.001);
    assert_eq!(r.counts.len(), 16);
    assert_eq!(r.counts.iter().sum::<u64>(), 50_000);
    assert!(r.passed, "{r}");
    let r = check_sum_uniform_sampled(PrimeField::new(7).unwrap(), 2, 20_000, 2, 0.001);
    assert_eq!(r.counts.len(), 7);
    assert!(r.passed, "{r}");
    assert!(check_sum_uniform_sampled(PrimeField::new(7).unwrap(), 2, 0, 2, 0.01)
        .p_value
        .is_none());
}

#[test]
fn bucket_masses_sum_to_one() {
    for q in [5, 17, 257, crate::field::MERSENNE_31] {
        let b = bucket_count(q);
        let m = bucket_masses(q, b);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(bucket_of(q - 1, q, b), b - 1);
        assert_eq!(bucket_of(0, q, b), 0);
    }
}

#[test]
fn single_source_single_colluder_q5() {
    let p = encoding_only(5, 1, 1, &[1, 2], &[3, 4, 0]);
    let f = p.field();
    let a = Secrets {
        sources: vec![crate::codec::SourceData::partitioned(0, vec![FieldMatrix::scalar(f.reduce(1))], &p).unwrap()],
        user: crate::codec::UserData::new(vec![FieldMatrix::scalar(f.reduce(2))]).unwrap(),
    };
    let b = Secrets {
        sources: vec![crate::codec::SourceData::partitioned(0, vec![FieldMatrix::scalar(f.reduce(4))], &p).unwrap()],
        user: crate::codec::UserData::new(vec![FieldMatrix::scalar(f.reduce(0))]).unwrap(),
    };
    for probe in CollusionProbe::all(&p) {
        let r = exhaustive_privacy_audit(&p, &a, &b, &probe).unwrap();
        assert!(r.identical(), "{r}");
        assert_eq!(r.total_variation, 0.0);
        assert_eq!(r.assignments, 25);
        assert!(r.source_marginals_uniform);
    }
}

#[test]
fn no_masks_no_privacy() {
    let p = params(11, 3, 1, 1, 0);
    let (a, b) = extreme_secrets(&p).unwrap();
    let probe = CollusionProbe::beyond_threshold(vec![0], &p).unwrap();
    let r = exhaustive_privacy_audit(&p, &a, &b, &probe).unwrap();
    assert_eq!(r.assignments, 1);
    assert!(!r.identical());
    assert_eq!(r.total_variation, 1.0);
}

fn mini_audit(p: &ProtocolParams, pairs: usize) {
    let mut rng = crate::field::seeded_rng(p.field().modulus());
    let mut secret_pairs = vec![extreme_secrets(p).unwrap()];
    for _ in 0..pairs {
        secret_pairs.push((
            Secrets::random(p, &mut rng).unwrap(),
            Secrets::random(p, &mut rng).unwrap(),
        ));
    }
    for (a, b) in &secret_pairs {
        for probe in CollusionProbe::all(p) {
            let r = exhaustive_privacy_audit(p, a, b, &probe).unwrap();
            assert!(r.identical() && r.source_marginals_uniform, "{r}");
        }
    }
    let leaks = CollusionProbe::all_of_size(p, p.privacy() + 1).iter().any(|probe| {
        secret_pairs
            .iter()
            .any(|(a, b)| !exhaustive_privacy_audit(p, a, b, probe).unwrap().identical())
    });
    assert!(leaks);
}

#[test]
fn mini_instance_q11_five_workers() {
    mini_audit(&params(11, 5, 2, 2, 1), 3);
}

#[test]
fn mini_instance_q5_all_points_used() {
    mini_audit(&encoding_only(5, 2, 2, &[1, 2, 3], &[4, 0]), 3);
}

#[test]
fn probe_validation_and_limits() {
    let p = params(11, 5, 2, 2, 1);
    assert!(CollusionProbe::new(vec![0, 1], &p).is_err());
    assert!(CollusionProbe::new(vec![7], &p).is_err());
    assert!(CollusionProbe::new(vec![4], &p).is_ok());
    let big = params(crate::field::MERSENNE_31, 5, 2, 2, 1);
    let (a, b) = extreme_secrets(&big).unwrap();
    let probe = CollusionProbe::new(vec![0], &big).unwrap();
    assert!(matches!(
        exhaustive_privacy_audit(&big, &a, &b, &probe),
        Err(AuditError::Infeasible { .. })
    ));
}

#[test]
fn statistical_audit_m31() {
    let p = params(crate::field::MERSENNE_31, 4, 2, 2, 1);
    let (a, b) = extreme_secrets(&p).unwrap();
    let probe = CollusionProbe::new(vec![2], &p).unwrap();
    let honest = statistical_privacy_audit(&p, &a, &b, &probe, 100_000, 0.01, 7, MaskMode::Uniform).unwrap();
    assert_eq!(honest.tests.len(), 3);
    assert!(honest.tests.iter().all(|t| t.dof == 15));
    assert!(!honest.rejected(), "{honest}");
    let broken = statistical_privacy_audit(&p, &a, &b, &probe, 1000, 0.01, 7, MaskMode::Zeroed).unwrap();
    assert!(broken.rejected(), "{broken}");
    let empty = statistical_privacy_audit(&p, &a, &b, &probe, 0, 0.01, 7, MaskMode::Uniform).unwrap();
    assert!(empty.tests.is_empty() && !empty.rejected());
}

#[test]
fn additive_pieces_when_sources_do_not_divide_blocks() {
    let f = PrimeField::new(11).unwrap();
    let p = ProtocolParams::for_encoding(2, EvalPoints::default_layout(f, 3, 3, 1).unwrap(), (1, 1), (1, 1)).unwrap();
    let (a, b) = extreme_secrets(&p).unwrap();
    assert!(a
        .sources
        .iter()
        .all(|s| s.pieces().len() == 3 && s.pieces().iter().all(Option::is_some)));
    for probe in CollusionProbe::all(&p) {
        let r = exhaustive_privacy_audit(&p, &a, &b, &probe).unwrap();
        assert!(r.identical() && r.source_marginals_uniform, "{r}");
    }
}
