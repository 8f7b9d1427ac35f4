//! Analog network coding recovery curves over source correlation levels.

use rand::seq::index::sample;

use crate::design::{design_anc, AncReduction, FilterKind, LinearTarget};
use crate::error::Result;
use crate::experiments::{
    gaussian_mat, kind_label, run_trials, ExperimentConfig, ExperimentKind, ExperimentOutput,
    Record,
};
use crate::graph::generate_with;
use crate::linalg::RMat;

const METHODS: [(FilterKind, AncReduction); 4] = [
    (FilterKind::NodeInvariant, AncReduction::BR),
    (FilterKind::NodeInvariant, AncReduction::BSR),
    (FilterKind::NodeVariant, AncReduction::BR),
    (FilterKind::NodeVariant, AncReduction::BSR),
];

fn reduction_label(r: AncReduction) -> &'static str {
    match r {
        AncReduction::BR => "B_R",
        AncReduction::BSR => "B_SR",
    }
}

/// `R^{1/2} = I + ρ(11ᵀ − I) + 0.1ρZ` for a symmetric `Z`.
pub fn correlated_root(rho: f64, z_sym: &RMat) -> RMat {
    let s = z_sym.nrows();
    let ones = RMat::from_element(s, s, 1.0);
    let eye = RMat::identity(s, s);
    &eye + (ones - &eye) * rho + z_sym * (0.1 * rho)
}

/// Random sources, each delivered to its own sink (`B_SR = I`), recovered
/// from `y = H E_S x_S`. Error `‖E_Rᵀ y − x_S‖ / ‖x_S‖` per signal, averaged
/// over the trial's signals; groups are `rho=<ρ>`.
pub fn run_anc(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let trials = run_trials(config, |_, rng| {
        let g = generate_with(&config.graph, rng)?;
        let shift = config.shift.build(&g)?;
        let n = g.n();
        let p = config.pairs;
        let nodes = sample(rng, n, 2 * p).into_vec();
        let (sources, sinks) = nodes.split_at(p);
        let pairs: Vec<(usize, usize)> =
            sinks.iter().copied().zip(sources.iter().copied()).collect();
        let plain = LinearTarget::anc(n, sources.to_vec(), &pairs)?;
        let map = plain.anc_map().expect("anc target").clone();
        let (e_s, e_r, b_sr) = (map.e_s(n), map.e_r(n), map.b_sr());
        let z = gaussian_mat(p, p, rng);
        let z_sym = (&z + z.transpose()) / 2f64.sqrt();
        let mut records = Vec::new();
        for &rho in &config.ensemble.rhos {
            let root = correlated_root(rho, &z_sym);
            let mut full_root = RMat::identity(n, n);
            for (a, &i) in sources.iter().enumerate() {
                for (b, &j) in sources.iter().enumerate() {
                    full_root[(i, j)] = root[(a, b)];
                }
            }
            let target = plain
                .clone()
                .with_source_covariance_sqrt(root.clone())?
                .with_covariance_sqrt(full_root)?;
            let x_s = &root * gaussian_mat(p, config.ensemble.signals, rng);
            let group = format!("rho={rho}");
            for k in config.degrees() {
                for (kind, reduction) in METHODS {
                    let h = design_anc(&shift, &target, k + 1, kind, reduction)?.dense(&shift);
                    let recovered = e_r.transpose() * h * &e_s * &x_s;
                    let expected = &b_sr * &x_s;
                    let err = (0..x_s.ncols())
                        .map(|j| {
                            (recovered.column(j) - expected.column(j)).norm() / x_s.column(j).norm()
                        })
                        .sum::<f64>()
                        / x_s.ncols() as f64;
                    let method = format!("{}/{}", kind_label(kind), reduction_label(reduction));
                    records.push(Record::new(group.clone(), method, k, err));
                }
            }
        }
        Ok(records)
    })?;
    let notes = vec![
        "B_R designs weight all nodes with the identity except the source block, which carries R^{1/2}".to_string(),
    ];
    Ok(ExperimentOutput::from_trials(
        ExperimentKind::Anc,
        trials,
        notes,
    ))
}
