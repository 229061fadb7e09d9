//! Shared test oracles.
#![allow(dead_code)]

use bdris::antenna::{state_load_vector_with, PhaseState};
use bdris::emdata::{generate_synthetic, EmDataset, Incidence, SyntheticParams, Tier};
use bdris::netalg::{z_to_s, ComplexMatrix, TwoPortNetwork, C64, Z0};
use bdris::splitter::{IdealSplit, SplitterState};
use bdris::thevenin::{Simulator, SurfaceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense complex Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        assert!(a[piv][col].norm() > 1e-300, "singular nodal system");
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let t = a[col][k];
                a[row][k] -= f * t;
            }
            let t = b[col];
            b[row] -= f * t;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Circuit built from multiport elements joined pairwise at their ports.
/// Unknowns are the voltage and inflowing current of every element port.
#[derive(Default)]
pub struct Circuit {
    n_ports: usize,
    rows: Vec<(Vec<(usize, C64)>, C64)>,
}

pub type Port = usize;

impl Circuit {
    fn v(p: Port) -> usize {
        2 * p
    }

    fn i(p: Port) -> usize {
        2 * p + 1
    }

    fn new_ports(&mut self, n: usize) -> Vec<Port> {
        let start = self.n_ports;
        self.n_ports += n;
        (start..start + n).collect()
    }

    /// v − Z·i = v_src.
    pub fn impedance(&mut self, z: &[Vec<C64>], v_src: &[C64]) -> Vec<Port> {
        let ports = self.new_ports(z.len());
        for (r, &p) in ports.iter().enumerate() {
            let mut row = vec![(Self::v(p), C64::new(1.0, 0.0))];
            for (c, &q) in ports.iter().enumerate() {
                row.push((Self::i(q), -z[r][c]));
            }
            self.rows.push((row, v_src[r]));
        }
        ports
    }

    /// (I − S)·v − z0·(I + S)·i = 0.
    pub fn scattering(&mut self, s: &[Vec<C64>]) -> Vec<Port> {
        let ports = self.new_ports(s.len());
        let one = C64::new(1.0, 0.0);
        for (r, _) in ports.iter().enumerate() {
            let mut row = Vec::new();
            for (c, &q) in ports.iter().enumerate() {
                let d = if r == c { one } else { C64::new(0.0, 0.0) };
                row.push((Self::v(q), d - s[r][c]));
                row.push((Self::i(q), -Z0 * (d + s[r][c])));
            }
            self.rows.push((row, C64::new(0.0, 0.0)));
        }
        ports
    }

    /// v_a = v_b, i_a + i_b = 0.
    pub fn connect(&mut self, a: Port, b: Port) {
        let one = C64::new(1.0, 0.0);
        self.rows.push((vec![(Self::v(a), one), (Self::v(b), -one)], C64::new(0.0, 0.0)));
        self.rows.push((vec![(Self::i(a), one), (Self::i(b), one)], C64::new(0.0, 0.0)));
    }

    pub fn load(&mut self, z: C64, at: Port) {
        let p = self.impedance(&[vec![z]], &[C64::new(0.0, 0.0)]);
        self.connect(p[0], at);
    }

    pub fn solve(&self) -> Solution {
        let n = 2 * self.n_ports;
        assert_eq!(self.rows.len(), n, "nodal system is not square");
        let mut a = vec![vec![C64::new(0.0, 0.0); n]; n];
        let mut b = vec![C64::new(0.0, 0.0); n];
        for (r, (row, rhs)) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                a[r][c] += v;
            }
            b[r] = *rhs;
        }
        Solution(gauss_solve(a, b))
    }
}

pub struct Solution(Vec<C64>);

impl Solution {
    pub fn v(&self, p: Port) -> C64 {
        self.0[2 * p]
    }

    pub fn i(&self, p: Port) -> C64 {
        self.0[2 * p + 1]
    }
}

pub fn to_rows(m: &bdris::netalg::ComplexMatrix) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub struct NodalResult {
    pub i_r: Vec<C64>,
    pub v_r: Vec<C64>,
    pub i_t: Vec<C64>,
    pub i_t_internal: Vec<C64>,
}

fn shifter(phase: PhaseState) -> Vec<Vec<C64>> {
    let e = C64::from_polar(1.0, phase.phase_rad());
    vec![vec![C64::new(0.0, 0.0), e], vec![e, C64::new(0.0, 0.0)]]
}

/// Brute-force nodal solve of the full surface circuit: the illuminated
/// array as a Thévenin multiport, per-cell phase shifters (behavioral tier)
/// and splitter, the transmitting array, and switch loads on internal ports.
pub fn nodal_surface(ds: &EmDataset, cfg: &SurfaceConfig, v_oc: &[C64]) -> NodalResult {
    let m = ds.m;
    let mut c = Circuit::default();
    let arr_r = c.impedance(&to_rows(&ds.z_r), v_oc);
    let arr_t = c.impedance(&to_rows(&ds.z_t), &vec![C64::new(0.0, 0.0); ds.n_ports()]);
    for (k, cell) in cfg.cells.iter().enumerate() {
        let sp = cell.splitter.s;
        let split = c.scattering(&[vec![sp.s11(), sp.s12()], vec![sp.s21(), sp.s22()]]);
        match ds.tier {
            Tier::Behavioral => {
                let a = c.scattering(&shifter(cell.r_state));
                let b = c.scattering(&shifter(cell.t_state));
                c.connect(arr_r[k], a[0]);
                c.connect(a[1], split[0]);
                c.connect(split[1], b[0]);
                c.connect(b[1], arr_t[k]);
            }
            Tier::InternalPorts => {
                c.connect(arr_r[k], split[0]);
                c.connect(split[1], arr_t[k]);
            }
        }
    }
    if ds.q > 0 {
        let per = ds.q / m;
        for (k, cell) in cfg.cells.iter().enumerate() {
            let lr = state_load_vector_with(&ds.diode, cell.r_state, ds.f_hz);
            let lt = state_load_vector_with(&ds.diode, cell.t_state, ds.f_hz);
            for s in 0..per {
                c.load(lr[s], arr_r[m + per * k + s]);
                c.load(lt[s], arr_t[m + per * k + s]);
            }
        }
    }
    let sol = c.solve();
    NodalResult {
        i_r: arr_r.iter().map(|&p| sol.i(p)).collect(),
        v_r: arr_r.iter().map(|&p| sol.v(p)).collect(),
        i_t: arr_t[..m].iter().map(|&p| sol.i(p)).collect(),
        i_t_internal: arr_t[m..].iter().map(|&p| sol.i(p)).collect(),
    }
}

/// max |a − b| / max(max |b|, floor).
pub fn rel_err(a: &[C64], b: &[C64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().map(|x| x.norm()).fold(floor, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

/// Symmetric matrix with positive-definite real part.
pub fn random_impedance(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let mut z = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let r: f64 = (0..n).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 20.0 } else { 0.0 };
            let x = rng.gen_range(-30.0..30.0);
            z[(i, j)] = C64::new(r, x);
            z[(j, i)] = C64::new(r, x);
        }
    }
    z
}

pub fn random_splitter(rng: &mut ChaCha8Rng) -> SplitterState {
    match rng.gen_range(0..5) {
        0 => SplitterState::ideal(IdealSplit::Open),
        1 => SplitterState::ideal(IdealSplit::Short),
        2 => {
            // general passive reciprocal tee
            let z = random_impedance(rng, 2);
            let s = z_to_s(&z, Z0).unwrap();
            SplitterState::from_network(TwoPortNetwork::new([[s[(0, 0)], s[(0, 1)]], [s[(1, 0)], s[(1, 1)]]], Z0).unwrap())
        }
        _ => SplitterState::from_impedance(C64::new(rng.gen_range(0.0..20.0), rng.gen_range(-800.0..800.0))).unwrap(),
    }
}

pub fn random_states(rng: &mut ChaCha8Rng, m: usize) -> Vec<PhaseState> {
    (0..m).map(|_| PhaseState::ALL[rng.gen_range(0..4)]).collect()
}

/// Largest relative port-current error between the engine and the nodal
/// oracle on a random system.
pub fn oracle_error(seed: u64, m_x: usize, tier: Tier) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = generate_synthetic(&SyntheticParams {
        m_x,
        m_y: 1,
        tier,
        ..Default::default()
    })
    .unwrap();
    let n = ds.n_ports();
    ds.z_r = random_impedance(&mut rng, n);
    ds.z_t = random_impedance(&mut rng, n);
    let m = ds.m;
    let splitters: Vec<_> = (0..m).map(|_| random_splitter(&mut rng)).collect();
    let cfg = SurfaceConfig::new(&splitters, &random_states(&mut rng, m), &random_states(&mut rng, m)).unwrap();
    let inc = Incidence::new(rng.gen_range(0.0..60.0), rng.gen_range(0.0..360.0), 1.0);
    let sim = Simulator::new(&ds, inc).unwrap();
    let got = sim.solve(&cfg).unwrap();
    let want = nodal_surface(&ds, &cfg, sim.v_oc());
    // all-zero vectors (ideal open or short splitters) are compared against
    // the natural level of the excitation
    let v_scale = 1e-3 * sim.v_oc().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let i_scale = v_scale / ds.z_r.max_abs();
    [
        rel_err(&got.i_r, &want.i_r, i_scale),
        rel_err(&got.v_r, &want.v_r, v_scale),
        rel_err(&got.i_t, &want.i_t, i_scale),
        rel_err(&got.i_t_internal, &want.i_t_internal, i_scale),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}
