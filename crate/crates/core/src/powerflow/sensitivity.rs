use nalgebra::DMatrix;
use num_complex::Complex64;

use super::sweep::{solve_ac_power_flow_with, PowerFlowOptions, PowerFlowState};
use super::PowerFlowError;
use crate::netmodel::{build_admittance, Network, Topology};

/// Voltage-magnitude sensitivities `dv[m] / dp[l]` and `dv[m] / dq[l]`,
/// indexed by bus on both axes. Rows and columns of slack and
/// de-energized buses are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrices {
    pub kp: DMatrix<f64>,
    pub kq: DMatrix<f64>,
}

impl SensitivityMatrices {
    pub fn zeros(n: usize) -> Self {
        Self {
            kp: DMatrix::zeros(n, n),
            kq: DMatrix::zeros(n, n),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.kp - &other.kp)
            .abs()
            .max()
            .max((&self.kq - &other.kq).abs().max())
    }
}

/// Inverts the polar power-flow Jacobian at `state`.
pub fn compute_sensitivities(
    net: &Network,
    topo: &Topology,
    state: &PowerFlowState,
) -> Result<SensitivityMatrices, PowerFlowError> {
    let n = net.bus_count();
    if state.v.len() != n {
        return Err(PowerFlowError::Dimension {
            expected: n,
            found: state.v.len(),
        });
    }
    let y = build_admittance(net, topo)?;
    let pq: Vec<usize> = (0..n)
        .filter(|&b| state.energized[b] && !net.is_slack(b))
        .collect();
    let m = pq.len();
    let mut out = SensitivityMatrices::zeros(n);
    if m == 0 {
        return Ok(out);
    }

    let v: Vec<Complex64> = (0..n).map(|b| state.voltage(b)).collect();
    let current: Vec<Complex64> = (0..n)
        .map(|i| (0..n).map(|k| y[(i, k)] * v[k]).sum())
        .collect();

    // Rows: [P; Q] of pq buses. Columns: [theta; |V|] of pq buses.
    let mut jac = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for (a, &i) in pq.iter().enumerate() {
        for (c, &k) in pq.iter().enumerate() {
            let yik = y[(i, k)];
            let vk_unit = Complex64::from_polar(1.0, state.theta[k]);
            // dS_i/dtheta_k and dS_i/d|V_k|
            let mut ds_dth = -Complex64::i() * v[i] * (yik * v[k]).conj();
            let mut ds_dv = v[i] * (yik * vk_unit).conj();
            if i == k {
                ds_dth += Complex64::i() * v[i] * current[i].conj();
                ds_dv += Complex64::from_polar(1.0, state.theta[i]) * current[i].conj();
            }
            jac[(a, c)] = ds_dth.re;
            jac[(a, m + c)] = ds_dv.re;
            jac[(m + a, c)] = ds_dth.im;
            jac[(m + a, m + c)] = ds_dv.im;
        }
    }
    let inv = jac.try_inverse().ok_or(PowerFlowError::SingularJacobian)?;
    for (a, &i) in pq.iter().enumerate() {
        for (c, &k) in pq.iter().enumerate() {
            out.kp[(i, k)] = inv[(m + a, c)];
            out.kq[(i, k)] = inv[(m + a, m + c)];
        }
    }
    Ok(out)
}

/// Central-difference sensitivities around `injections`, step `h` p.u.
/// Used as an oracle for [`compute_sensitivities`].
pub fn finite_difference_sensitivities(
    net: &Network,
    topo: &Topology,
    injections: &[Complex64],
    h: f64,
) -> Result<SensitivityMatrices, PowerFlowError> {
    let opts = PowerFlowOptions {
        tolerance: 1e-14,
        max_iterations: 100_000,
    };
    let n = net.bus_count();
    let base = solve_ac_power_flow_with(net, topo, injections, &opts)?;
    let mut out = SensitivityMatrices::zeros(n);
    let mut inj = injections.to_vec();
    for l in 0..n {
        if !base.energized[l] || net.is_slack(l) {
            continue;
        }
        for (dir, target) in [(Complex64::new(h, 0.0), 0), (Complex64::new(0.0, h), 1)] {
            inj[l] = injections[l] + dir;
            let up = solve_ac_power_flow_with(net, topo, &inj, &opts)?;
            inj[l] = injections[l] - dir;
            let down = solve_ac_power_flow_with(net, topo, &inj, &opts)?;
            inj[l] = injections[l];
            let k = if target == 0 { &mut out.kp } else { &mut out.kq };
            for b in 0..n {
                if base.energized[b] && !net.is_slack(b) {
                    k[(b, l)] = (up.v[b] - down.v[b]) / (2.0 * h);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::solve_ac_power_flow;
    use super::*;
    use crate::netmodel::fixtures::{case33, chain};

    fn injections(net: &Network) -> Vec<Complex64> {
        net.buses
            .iter()
            .map(|b| -Complex64::new(b.load_p, b.load_q))
            .collect()
    }

    #[test]
    fn analytic_matches_finite_difference_case33() {
        let net = case33();
        let topo = Topology::base(&net);
        let inj = injections(&net);
        let st = solve_ac_power_flow_with(
            &net,
            &topo,
            &inj,
            &PowerFlowOptions {
                tolerance: 1e-14,
                max_iterations: 100_000,
            },
        )
        .unwrap();
        let k = compute_sensitivities(&net, &topo, &st).unwrap();
        let fd = finite_difference_sensitivities(&net, &topo, &inj, 1e-6).unwrap();
        let diff = k.max_abs_diff(&fd);
        assert!(diff < 1e-6, "max diff {diff:e}");
        // Injection raises voltage.
        assert!(k.kp[(17, 17)] > 0.0 && k.kq[(17, 17)] > 0.0);
        assert!(k.kp.row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn finite_difference_error_is_second_order() {
        let net = case33();
        let topo = Topology::base(&net);
        let inj = injections(&net);
        let st = solve_ac_power_flow_with(
            &net,
            &topo,
            &inj,
            &PowerFlowOptions {
                tolerance: 1e-14,
                max_iterations: 100_000,
            },
        )
        .unwrap();
        let k = compute_sensitivities(&net, &topo, &st).unwrap();
        let coarse = finite_difference_sensitivities(&net, &topo, &inj, 2e-2).unwrap();
        let fine = finite_difference_sensitivities(&net, &topo, &inj, 1e-2).unwrap();
        let (ec, ef) = (k.max_abs_diff(&coarse), k.max_abs_diff(&fine));
        let ratio = ec / ef;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn two_bus_no_load_is_line_impedance() {
        // At flat start the sensitivity of |V2| to its own injection is (r, x).
        let net = chain(2, 0.02, 0.05);
        let topo = Topology::base(&net);
        let st = solve_ac_power_flow(&net, &topo, &[Complex64::new(0.0, 0.0); 2]).unwrap();
        let k = compute_sensitivities(&net, &topo, &st).unwrap();
        assert!((k.kp[(1, 1)] - 0.02).abs() < 1e-12);
        assert!((k.kq[(1, 1)] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn de_energized_buses_have_zero_rows() {
        let mut net = case33();
        net.lines[31].switchable = true;
        let mut closed = Topology::base(&net).closed().to_vec();
        closed[31] = false;
        let topo = Topology::from_closed(&net, closed);
        let st = solve_ac_power_flow(&net, &topo, &injections(&net)).unwrap();
        let k = compute_sensitivities(&net, &topo, &st).unwrap();
        assert!(k.kp.row(32).iter().all(|&x| x == 0.0));
        assert!(k.kq.column(32).iter().all(|&x| x == 0.0));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(20))]
        #[test]
        fn analytic_matches_finite_difference_random_states(
            scale in 0.2f64..1.2,
            pv in proptest::collection::vec((1usize..33, 0.0f64..0.15, -0.03f64..0.03), 1..5),
        ) {
            let net = case33();
            let topo = Topology::base(&net);
            let mut inj: Vec<Complex64> = injections(&net).iter().map(|s| s * scale).collect();
            for (bus, p, q) in pv {
                inj[bus] += Complex64::new(p, q);
            }
            let st = solve_ac_power_flow_with(
                &net,
                &topo,
                &inj,
                &PowerFlowOptions { tolerance: 1e-14, max_iterations: 100_000 },
            )
            .unwrap();
            let k = compute_sensitivities(&net, &topo, &st).unwrap();
            let fd = finite_difference_sensitivities(&net, &topo, &inj, 1e-6).unwrap();
            for (a, b) in k.kp.iter().chain(k.kq.iter()).zip(fd.kp.iter().chain(fd.kq.iter())) {
                proptest::prop_assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-6), "{a} vs {b}");
            }
        }
    }
}
