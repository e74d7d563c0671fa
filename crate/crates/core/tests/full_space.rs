use kerrcat::catspace::{reduced_liouvillian, CatModel};
use kerrcat::dynamics::{self, CatBasis, DensityMatrix, FullMethod, InitialState};
use kerrcat::fock;
use kerrcat::linalg::{self, c, C64};
use kerrcat::liouville::{self, kerr_cat_liouvillian};
use kerrcat::model::{ExperimentUnits, KappaConvention};
use kerrcat::ModelParams;

const DIM: usize = 40;

fn device() -> ModelParams {
    ExperimentUnits::kerr_cat_device()
        .to_params(KappaConvention::PlainRate)
        .unwrap()
}

#[test]
fn projected_generator_matches_reduced_matrix() {
    for params in [device(), device().with_drive(0.0), device().with_delta(1.3)] {
        let l = kerr_cat_liouvillian(&params, DIM).unwrap();
        let basis = CatBasis::new(params.alpha(), DIM).unwrap();
        let lr = reduced_liouvillian(&params);
        for k in 0..4 {
            let mut unit = [C64::new(0.0, 0.0); 4];
            unit[k] = c(1.0, 0.0);
            let column = basis.project(&l.act(&basis.embed(&unit)).unwrap()).unwrap();
            for r in 0..4 {
                let d = (column[r] - lr.entries[r][k]).norm();
                assert!(d < 1e-6, "entry ({r}, {k}) off by {d:e}");
            }
        }
    }
}

#[test]
fn slowest_full_modes_match_reduced_spectrum() {
    let params = device();
    let l = kerr_cat_liouvillian(&params, DIM).unwrap();
    let values = liouville::eigenvalues(&l).unwrap();
    let model = CatModel::from_params(&params);
    let r = model.rate_scale();
    // Population modes of states outside the cat manifold sit closer to zero
    // than the driven coherence pair, so pair each reduced eigenvalue with
    // its nearest full one.
    for z in model.spectrum(params.drive, params.delta).as_array() {
        let best = values.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-3 * z.norm().max(r), "{z}: nearest full eigenvalue {best:e} away");
    }
    // conjugation closure of the slow band; the near-real population modes
    // of high Fock levels are too ill-conditioned to hold it in floating point
    let tol = 1e-9 * linalg::norm_one(l.matrix()).max(1.0);
    for v in values.iter().filter(|v| v.re > -0.3) {
        let partner = values.iter().map(|w| (w - v.conj()).norm()).fold(f64::INFINITY, f64::min);
        assert!(partner < tol, "{v}: {partner:e}");
    }
}

#[test]
fn steady_state_photon_number_near_alpha_squared() {
    let params = device().with_drive(0.0);
    let l = kerr_cat_liouvillian(&params, DIM).unwrap();
    let ss = liouville::steady_state(&l).unwrap();
    let n: f64 = (0..DIM).map(|k| k as f64 * ss.matrix()[(k, k)].re).sum();
    let a2 = params.alpha_sq();
    assert!((n - a2).abs() < 0.02 * a2, "<n> = {n}, alpha^2 = {a2}");
    assert!((ss.trace() - c(1.0, 0.0)).norm() < 1e-12);
}

#[test]
fn zero_drive_cat_fidelity_stays_high() {
    let params = device().with_drive(0.0);
    let times = dynamics::linspace(0.0, 60.0, 61);
    let col = dynamics::fidelity_columns(&[InitialState::CatPlus], &params, &times, 30, FullMethod::Propagator)
        .unwrap()
        .remove(0);
    let min = col.fidelity.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min > 0.99, "min fidelity {min}");
    assert!((col.fidelity.last().unwrap() - 1.0).abs() < 1e-2);
    assert!(col.full.max_trace_drift < 1e-8);
}

#[test]
fn full_evolution_relaxes_to_steady_state() {
    // at ε = 0 an even cat only feels the fast population mode
    let params = device().with_drive(0.0);
    let dim = 30;
    let l = kerr_cat_liouvillian(&params, dim).unwrap();
    let ss = liouville::steady_state(&l).unwrap();
    let rho0 = DensityMatrix::pure(&fock::cat_state(params.alpha(), fock::Parity::Even, dim).unwrap()).unwrap();
    let times = dynamics::linspace(0.0, 60.0, 61);
    let traj = dynamics::evolve_with(&l, &rho0, &times, FullMethod::Propagator, None).unwrap();
    let d = traj.distances_to(&ss).unwrap();
    assert!(d.last().unwrap() < &1e-3, "final distance {}", d.last().unwrap());
    assert!(traj.relaxes_monotonically(&ss, 5, 1e-9).unwrap());
}
