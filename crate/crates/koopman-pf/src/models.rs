//! Benchmark dynamical systems and the fixed-step RK4 integrator used to
//! generate trajectory data.

use ndarray::prelude::*;

use crate::error::{Error, Result};

/// A first-order ODE system `ẋ = f(x)` with a boxed right-hand side.
pub struct OdeSystem {
    n: usize,
    name: String,
    params: Vec<(String, f64)>,
    rhs: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
}

impl std::fmt::Debug for OdeSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OdeSystem")
            .field("n", &self.n)
            .field("name", &self.name)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl OdeSystem {
    pub fn new(
        n: usize,
        name: impl Into<String>,
        params: Vec<(String, f64)>,
        rhs: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    ) -> OdeSystem {
        OdeSystem { n, name: name.into(), params, rhs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    /// Evaluate the right-hand side into `dx`.
    pub fn rhs(&self, x: &[f64], dx: &mut [f64]) {
        (self.rhs)(x, dx)
    }
}

/// The two-state benchmark with one quadratic coupling:
/// `ẋ₁ = λ₁(x₁ − x₂²)`, `ẋ₂ = λ₂x₂`.
///
/// Its Koopman-invariant subspace is spanned by `(x₁, x₂, x₂²)`, so a
/// dictionary containing exactly those observables closes the dynamics.
pub fn canonical_system(lambda1: f64, lambda2: f64) -> OdeSystem {
    OdeSystem::new(
        2,
        "canonical",
        vec![("lambda1".into(), lambda1), ("lambda2".into(), lambda2)],
        Box::new(move |x, dx| {
            dx[0] = lambda1 * (x[0] - x[1] * x[1]);
            dx[1] = lambda2 * x[1];
        }),
    )
}

/// The exact 3×3 linear lift of the canonical system on `(x₁, x₂, x₂²)`:
///
/// ```text
///     ⎡ λ₁   0   −λ₁ ⎤
/// L = ⎢  0   λ₂    0 ⎥
///     ⎣  0   0   2λ₂ ⎦
/// ```
pub fn lifted_canonical(lambda1: f64, lambda2: f64) -> Array2<f64> {
    array![
        [lambda1, 0.0, -lambda1],
        [0.0, lambda2, 0.0],
        [0.0, 0.0, 2.0 * lambda2]
    ]
}

/// Classical swing-equation surrogate in center-of-angle coordinates.
///
/// State layout: `x = (δ₁…δ_N, ω₁…ω_N)`. Machine `i` obeys
/// `M_i·ω̇_i = −D_i·ω_i − Σ_j K_ij·sin(δ_i − δ_j)` with the center-of-angle
/// acceleration removed, and `δ̇_i = ω_i − ω_COA`. The projection keeps the
/// inertia-weighted sums `ΣM_iδ_i` and `ΣM_iω_i` invariant, so the origin is
/// an equilibrium and trajectories stay on the zero-COA slice.
pub fn swing_surrogate(
    machines: usize,
    coupling: &ArrayView2<'_, f64>,
    damping: &[f64],
    inertia: &[f64],
) -> Result<OdeSystem> {
    if machines < 2 {
        return Err(Error::InvalidTopology(format!(
            "a swing network needs at least two machines, got {machines}"
        )));
    }
    if coupling.dim() != (machines, machines) {
        return Err(Error::InvalidTopology(format!(
            "coupling matrix is {:?}, expected ({machines}, {machines})",
            coupling.dim()
        )));
    }
    if damping.len() != machines || inertia.len() != machines {
        return Err(Error::InvalidTopology(format!(
            "damping/inertia lengths ({}, {}) must equal the machine count {machines}",
            damping.len(),
            inertia.len()
        )));
    }
    for i in 0..machines {
        if coupling[(i, i)] != 0.0 {
            return Err(Error::InvalidTopology(format!("coupling diagonal must be zero (row {i})")));
        }
        for j in 0..machines {
            let kij = coupling[(i, j)];
            if !kij.is_finite() || kij < 0.0 {
                return Err(Error::InvalidTopology(format!(
                    "coupling[{i}][{j}] = {kij} must be finite and non-negative"
                )));
            }
            if (kij - coupling[(j, i)]).abs() > 1e-12 * kij.abs().max(1.0) {
                return Err(Error::InvalidTopology(format!("coupling must be symmetric ({i}, {j})")));
            }
        }
        if !(inertia[i].is_finite() && inertia[i] > 0.0) {
            return Err(Error::InvalidTopology(format!("inertia[{i}] must be positive")));
        }
        if !(damping[i].is_finite() && damping[i] >= 0.0) {
            return Err(Error::InvalidTopology(format!("damping[{i}] must be non-negative")));
        }
    }

    let k = coupling.to_owned();
    let d = damping.to_vec();
    let m = inertia.to_vec();
    let m_total: f64 = m.iter().sum();
    let params: Vec<(String, f64)> = (0..machines)
        .map(|i| (format!("inertia{}", i + 1), m[i]))
        .chain((0..machines).map(|i| (format!("damping{}", i + 1), d[i])))
        .collect();

    Ok(OdeSystem::new(
        2 * machines,
        format!("swing{machines}"),
        params,
        Box::new(move |x, dx| {
            let (delta, omega) = x.split_at(machines);
            let mut accel = vec![0.0; machines];
            for i in 0..machines {
                let mut torque = -d[i] * omega[i];
                for j in 0..machines {
                    if i != j {
                        torque -= k[(i, j)] * (delta[i] - delta[j]).sin();
                    }
                }
                accel[i] = torque / m[i];
            }
            let omega_coa: f64 = m.iter().zip(omega).map(|(mi, wi)| mi * wi).sum::<f64>() / m_total;
            let accel_coa: f64 = m.iter().zip(&accel).map(|(mi, ai)| mi * ai).sum::<f64>() / m_total;
            for i in 0..machines {
                dx[i] = omega[i] - omega_coa;
                dx[machines + i] = accel[i] - accel_coa;
            }
        }),
    ))
}

/// Integrate with classical fixed-step RK4. Returns the n×(steps+1)
/// trajectory matrix whose column k is the state at `t = k·dt`.
pub fn integrate_rk4(sys: &OdeSystem, x0: &[f64], dt: f64, steps: usize) -> Result<Array2<f64>> {
    let n = sys.n();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x0.len(),
            context: "initial state passed to integrate_rk4".into(),
        });
    }
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidConfig(format!("step size must be positive, got {dt}")));
    }
    if steps == 0 {
        return Err(Error::InvalidConfig("step count must be at least 1".into()));
    }

    let mut traj = Array2::<f64>::zeros((n, steps + 1));
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    traj.column_mut(0).assign(&ArrayView1::from(&x[..]));

    for step in 1..=steps {
        sys.rhs(&x, &mut k1);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k1[i];
        }
        sys.rhs(&stage, &mut k2);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k2[i];
        }
        sys.rhs(&stage, &mut k3);
        for i in 0..n {
            stage[i] = x[i] + dt * k3[i];
        }
        sys.rhs(&stage, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        traj.column_mut(step).assign(&ArrayView1::from(&x[..]));
    }
    Ok(traj)
}

/// A named benchmark configuration: system, default initial state, sampling
/// interval and step count.
pub struct Preset {
    pub system: OdeSystem,
    pub x0: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
}

/// Default parameters of the four-machine swing surrogate.
pub fn swing4_parameters() -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let coupling = array![
        [0.0, 5.0, 0.4, 0.3],
        [5.0, 0.0, 0.35, 0.45],
        [0.4, 0.35, 0.0, 4.5],
        [0.3, 0.45, 4.5, 0.0]
    ];
    let damping = vec![0.05, 0.06, 0.04, 0.055];
    let inertia = vec![1.0, 1.2, 0.8, 1.1];
    (coupling, damping, inertia)
}

/// Small angular disturbance used by the `swing4` preset (zero-COA slice).
pub fn swing4_disturbance() -> Vec<f64> {
    let (_, _, inertia) = swing4_parameters();
    let machines = inertia.len();
    // Raw angle kicks, then project onto the zero-COA slice so the initial
    // state is consistent with the reduced dynamics.
    let raw = [0.04, -0.03, 0.035, -0.025];
    let m_total: f64 = inertia.iter().sum();
    let coa: f64 = inertia.iter().zip(raw).map(|(m, d)| m * d).sum::<f64>() / m_total;
    let mut x0 = vec![0.0; 2 * machines];
    for i in 0..machines {
        x0[i] = raw[i] - coa;
    }
    x0
}

/// Look up a preset by name: `canonical`, `canonical-lifted` or `swing4`.
pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "canonical" => Ok(Preset {
            system: canonical_system(-1.0, -0.05),
            x0: vec![-1.0, 2.0],
            dt: 0.01,
            steps: 1000,
        }),
        "canonical-lifted" => {
            let l = lifted_canonical(-1.0, -0.05);
            Ok(Preset {
                system: OdeSystem::new(
                    3,
                    "canonical-lifted",
                    vec![("lambda1".into(), -1.0), ("lambda2".into(), -0.05)],
                    Box::new(move |x, dx| {
                        for i in 0..3 {
                            dx[i] = (0..3).map(|j| l[(i, j)] * x[j]).sum();
                        }
                    }),
                ),
                x0: vec![-1.0, 2.0, 4.0],
                dt: 0.01,
                steps: 1000,
            })
        }
        "swing4" => {
            let (coupling, damping, inertia) = swing4_parameters();
            Ok(Preset {
                system: swing_surrogate(4, &coupling.view(), &damping, &inertia)?,
                x0: swing4_disturbance(),
                dt: 1.0 / 120.0,
                steps: 1200,
            })
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown preset '{other}' (expected canonical, canonical-lifted or swing4)"
        ))),
    }
}
