//! Built-in configurations, one or more per acceptance criterion plus a
//! few that exercise the remaining estimator options.

use serde_json::{json, Value};

use crate::config::ExperimentConfig;

pub struct Recipe {
    pub name: &'static str,
    pub description: &'static str,
    /// Acceptance criterion reproduced by this recipe, if any.
    pub criterion: Option<u8>,
    json: Value,
}

impl Recipe {
    pub fn json(&self) -> &Value {
        &self.json
    }

    pub fn config(&self) -> ExperimentConfig {
        let c: ExperimentConfig = serde_json::from_value(self.json.clone())
            .unwrap_or_else(|e| panic!("recipe {} does not parse: {e}", self.name));
        c.validate()
            .unwrap_or_else(|e| panic!("recipe {} is invalid: {e}", self.name));
        c
    }
}

fn recipe(
    name: &'static str,
    description: &'static str,
    criterion: Option<u8>,
    seed: u64,
    system: Value,
    experiment: Value,
) -> Recipe {
    let json = json!({
        "name": name,
        "description": description,
        "seed": seed,
        "system": system,
        "experiment": experiment,
    });
    Recipe {
        name,
        description,
        criterion,
        json,
    }
}

pub fn recipes() -> Vec<Recipe> {
    let reference = json!({ "kind": "lorentz", "scatterers": { "kind": "reference" } });
    vec![
        recipe(
            "srw-mllt",
            "lazy walk MLLT at n = 64 against the exact pmf and the Gaussian reference",
            Some(1),
            1,
            json!({ "kind": "random_walk", "steps": { "kind": "lazy_1d" } }),
            json!({ "kind": "mllt", "n": 64, "samples": 200_000, "exact_check": {} }),
        ),
        recipe(
            "lorentz-invariance",
            "one-step pushforward of nu on the reference gas, reflection and energy identities",
            Some(2),
            2,
            reference.clone(),
            json!({
                "kind": "invariance", "samples": 1_000_000, "bins": 32, "alpha": 0.01, "collisions": 20_000,
                "energy_fields": [
                    { "kind": "gravity", "g": 0.5, "direction": [0.6, 0.8], "energy": 4.0 },
                    { "kind": "coulomb", "charge": 0.05, "center": [0.0, 0.0], "energy": 1.0 }
                ]
            }),
        ),
        recipe(
            "lorentz-horizon",
            "longest free flight of the reference gas over 10^7 rays against the recorded bound",
            Some(3),
            3,
            reference.clone(),
            json!({ "kind": "horizon", "rays": 10_000_000, "expect": "bounded" }),
        ),
        recipe(
            "single-disk-corridor",
            "one disk of radius 0.3 per cell leaves corridors; an escaping ray is reported",
            Some(3),
            4,
            json!({ "kind": "lorentz", "scatterers": { "kind": "single_disk", "radius": 0.3 } }),
            json!({ "kind": "horizon", "rays": 100_000, "expect": "corridor" }),
        ),
        recipe(
            "lorentz-mllt",
            "reference Lorentz gas MLLT at n = 100 with the covariance of the same run",
            Some(4),
            5,
            reference.clone(),
            json!({ "kind": "mllt", "n": 100, "samples": 1_000_000, "window": { "threshold": 0.15 } }),
        ),
        recipe(
            "lorentz-locglob",
            "sparse Lorentz gas: cell-0 indicator against the golden cosine observable up to n = 50",
            Some(5),
            6,
            json!({ "kind": "lorentz", "scatterers": { "kind": "sparse" } }),
            json!({
                "kind": "local_global", "cell": [0, 0], "observable": { "name": "golden_cosine" },
                "n_list": [10, 25, 50], "samples": 1_000_000, "tol": 0.01
            }),
        ),
        recipe(
            "perturbed-ggmix",
            "cell-0 disk removed: cube correlations of base-only observables at n = 10 for L = 10, 20, 40",
            Some(6),
            7,
            json!({ "kind": "lorentz", "scatterers": { "kind": "perturbed_reference" } }),
            json!({
                "kind": "perturbation", "phi1": { "name": "cos_phi" }, "phi2": { "name": "one_plus_sin_phi" },
                "n": 10, "sizes": [10, 20, 40], "center": [0, 0], "samples": 400_000, "tol": 0.05
            }),
        ),
        recipe(
            "pingpong-approx",
            "pingpong induced map against its limit map for I0 = 25 .. 200",
            Some(7),
            8,
            json!({ "kind": "pingpong" }),
            json!({ "kind": "pingpong_approx", "levels": [25.0, 50.0, 100.0, 200.0], "samples": 1000, "ky_fan_max": 0.02, "agreement_max": 1e-8 }),
        ),
        recipe(
            "galton-energy",
            "Galton board energy K_n / sqrt(n) at n = 10^4 against the energy SDE",
            Some(8),
            9,
            json!({ "kind": "galton", "g": 1.0, "h": 1.0 }),
            json!({
                "kind": "galton_energy", "n": 10_000, "samples": 5000,
                "sigma": { "k_start": 1000.0, "m": 200, "samples": 4000 },
                "sde": { "samples": 100_000, "steps": 10_000, "floor": 1e-3 },
                "ks_max": 0.08, "cross_ks_max": 0.02
            }),
        ),
        recipe(
            "escape-m6",
            "Galton board at large H on the sparse disks: fraction of trajectories within |z| <= 5",
            Some(9),
            10,
            json!({ "kind": "galton", "g": 1.0, "h": 100.0, "scatterers": { "kind": "sparse_half_plane" } }),
            json!({ "kind": "escape", "cell": [0, 0], "radius": 5.0, "n_list": [100, 1000, 10_000], "samples": 1000, "max_final": 0.2 }),
        ),
        recipe(
            "escape-halfstrip",
            "half-strip Lorentz gas on the sparse disks: fraction of trajectories within |z| <= 5",
            Some(9),
            11,
            json!({ "kind": "lorentz", "scatterers": { "kind": "reference_half_strip" } }),
            json!({ "kind": "escape", "cell": [0], "radius": 5.0, "n_list": [100, 1000, 10_000], "samples": 4000, "max_final": 0.2 }),
        ),
        recipe(
            "bounce-nonmixing",
            "bouncing-ball flow, tent observable at integer velocities, g T = 1/2",
            Some(10),
            12,
            json!({ "kind": "bounce_flow", "g": 1.0, "dt": 0.5 }),
            json!({
                "kind": "global_global", "phi1": { "name": "velocity_tent", "width": 0.01, "height": 15.0 },
                "phi2": { "name": "velocity_tent", "width": 0.01, "height": 15.0 },
                "flow_times": [0.5], "sizes": [100, 1000], "centers": [[1_000_000], [2_000_000]], "samples": 100_000,
                "verdict": { "kind": "non_mixing", "max_correlation": 1e-3, "min_product": 0.01, "min_lattice_gap": 0.04 }
            }),
        ),
        recipe(
            "lorentz-covariance",
            "drift and covariance of the reference gas displacement at n = 100",
            None,
            13,
            reference.clone(),
            json!({ "kind": "covariance", "n": 100, "samples": 100_000 }),
        ),
        recipe(
            "lorentz-mllt-weighted",
            "reference gas MLLT with weights psi1 = psi2 = 1 + sin(phi)",
            None,
            14,
            reference.clone(),
            json!({
                "kind": "mllt", "n": 50, "samples": 200_000, "psi1": "one_plus_sin_phi", "psi2": "one_plus_sin_phi",
                "window": { "threshold": 0.2 }
            }),
        ),
        recipe(
            "srw-drift-mllt",
            "walk with steps 0, 1, 2: MLLT around the estimated drift",
            None,
            15,
            json!({ "kind": "random_walk", "steps": { "kind": "atoms", "atoms": [[[0], 0.25], [[1], 0.5], [[2], 0.25]] } }),
            json!({ "kind": "mllt", "n": 64, "samples": 100_000, "window": { "shift": "drift" } }),
        ),
        recipe(
            "srw-periodic-mllt",
            "simple walk of period 2: MLLT on its parity sublattice",
            None,
            16,
            json!({ "kind": "random_walk", "steps": { "kind": "simple_1d" } }),
            json!({ "kind": "mllt", "n": 64, "samples": 100_000, "window": { "periodicity": { "period": 2, "residue": 1 } }, "exact_check": {} }),
        ),
        recipe(
            "srw-amllt",
            "lazy walk MLLT with the origin box of side 0.2 excluded",
            None,
            17,
            json!({ "kind": "random_walk", "steps": { "kind": "lazy_1d" } }),
            json!({ "kind": "mllt", "n": 64, "samples": 100_000, "window": { "exclusion": [[[-0.1], [0.1]]] } }),
        ),
        recipe(
            "pingpong-limit-covariance",
            "covariance of the centred pingpong limit map at n = 100",
            None,
            18,
            json!({ "kind": "pingpong_limit", "delta": 4.991743534443181, "convention": "centered" }),
            json!({ "kind": "covariance", "n": 100, "samples": 20_000 }),
        ),
    ]
}

pub fn find(name: &str) -> Option<Recipe> {
    recipes().into_iter().find(|r| r.name == name)
}
