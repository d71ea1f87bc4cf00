use spde_moments::chaos::{second_moment_chaos, ChaosBudget};
use spde_moments::fkmc::{fk_estimate, FkSettings};
use spde_moments::{EquationKind, InitialData, NoiseSpec, SpatialKernel};

fn agree(spec: &NoiseSpec, kind: EquationKind, t: f64, init: &InitialData, seed: u64) {
    let budget = ChaosBudget {
        outer_samples: 8000,
        inner_samples: 32,
        ..ChaosBudget::default()
    };
    let settings = FkSettings {
        configs_per_stratum: 8000,
        ..FkSettings::default()
    };
    let c = second_moment_chaos(spec, kind, t, init, 5, &budget, seed).unwrap();
    let x = vec![0.0; spec.dim()];
    let f = fk_estimate(spec, kind, t, &x, init, &settings, seed).unwrap();
    let z = c.estimate.z_score(&f.estimate);
    assert!(
        z < 3.5,
        "{} {kind} t={t}: chaos {} ± {}, fk {} ± {}",
        spec.kernel().name(),
        c.estimate.value,
        c.estimate.stderr,
        f.estimate.value,
        f.estimate.stderr
    );
}

#[test]
fn heat_gaussian() {
    let spec = NoiseSpec::new(0.7, SpatialKernel::Gaussian { length_scale: 0.8 }, 1).unwrap();
    agree(&spec, EquationKind::Heat, 0.4, &InitialData::new(1.0, 0.0).unwrap(), 31);
}

#[test]
fn wave_gaussian_two_dims_with_velocity() {
    let spec = NoiseSpec::new(0.8, SpatialKernel::Gaussian { length_scale: 1.0 }, 2).unwrap();
    agree(&spec, EquationKind::Wave, 0.5, &InitialData::new(1.0, 0.5).unwrap(), 32);
}

#[test]
fn wave_riesz_family_member() {
    let spec = NoiseSpec::riesz_family(0.75, 0.7).unwrap();
    agree(&spec, EquationKind::Wave, 0.4, &InitialData::new(1.0, 0.0).unwrap(), 33);
}

#[test]
fn heat_product_kernel() {
    let spec = NoiseSpec::new(0.75, SpatialKernel::ProductFractional { alphas: vec![0.3, 0.5] }, 2).unwrap();
    agree(&spec, EquationKind::Heat, 0.3, &InitialData::new(1.0, 0.0).unwrap(), 34);
}
