use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Network, NetworkError, Topology};

/// Bus admittance matrix of the closed lines of `topo` (pi model, half the
/// line charging at each end). Open lines contribute nothing.
pub fn build_admittance(net: &Network, topo: &Topology) -> Result<DMatrix<Complex64>, NetworkError> {
    let n = net.bus_count();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (e, line) in net.lines.iter().enumerate() {
        if !topo.is_closed(e) {
            continue;
        }
        let z = Complex64::new(line.r, line.x);
        if z.norm() == 0.0 {
            return Err(NetworkError::DegenerateLine(e));
        }
        let series = z.inv();
        let shunt = Complex64::new(0.0, line.b / 2.0);
        let (f, t) = (line.from, line.to);
        y[(f, f)] += series + shunt;
        y[(t, t)] += series + shunt;
        y[(f, t)] -= series;
        y[(t, f)] -= series;
    }
    Ok(y)
}
